#include "epi/nowcast.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace epi {

bool ReportingTriangle::fully_observed(int i) const
{
    return (first_death_date + i) + max_delay <= last_report_date;
}

void ReportingTriangle::add(Date death_date, int delay, std::int64_t count)
{
    if (count < 0) {
        throw std::invalid_argument("reporting triangle counts must be non-negative");
    }
    if (delay < 0) {
        throw std::invalid_argument("report date precedes death date");
    }
    delay = std::min(delay, max_delay);
    if (counts.empty()) {
        first_death_date = death_date;
    }
    if (death_date < first_death_date) {
        const int shift = first_death_date - death_date;
        counts.insert(counts.begin(), shift, std::vector<std::int64_t>(max_delay + 1, 0));
        first_death_date = death_date;
    }
    const int idx = death_date - first_death_date;
    if (idx >= n_death_dates()) {
        counts.resize(idx + 1, std::vector<std::int64_t>(max_delay + 1, 0));
    }
    counts[idx][delay] += count;
    last_report_date = std::max(last_report_date, death_date + delay);
}

std::vector<double> DelayProfile::cumulative() const
{
    // One minus the unreported tail, so a fully mature day is exactly 1 and
    // the identity adjustment P = 1 holds without rounding residue.
    std::vector<double> cum(eta.size());
    double tail = 0.0;
    for (std::size_t d = eta.size(); d-- > 0;) {
        cum[d] = 1.0 - tail;
        tail += eta[d];
    }
    return cum;
}

DelayProfile estimate_eta(const ReportingTriangle& triangle)
{
    if (triangle.counts.empty()) {
        throw std::runtime_error("estimate_eta: empty reporting triangle");
    }
    std::vector<double> totals(triangle.max_delay + 1, 0.0);
    double grand_total = 0.0;
    for (int i = 0; i < triangle.n_death_dates(); ++i) {
        if (!triangle.fully_observed(i)) {
            continue;
        }
        for (int d = 0; d <= triangle.max_delay; ++d) {
            totals[d] += static_cast<double>(triangle.counts[i][d]);
            grand_total += static_cast<double>(triangle.counts[i][d]);
        }
    }
    if (grand_total <= 0.0) {
        throw std::runtime_error(
            "estimate_eta: no fully observed death date with a positive count");
    }
    DelayProfile profile;
    profile.eta.resize(totals.size());
    for (std::size_t d = 0; d < totals.size(); ++d) {
        profile.eta[d] = totals[d] / grand_total;
    }
    return profile;
}

std::vector<double> sample_dirichlet(const DelayProfile& profile, double alpha,
                                     std::mt19937_64& rng)
{
    std::vector<double> p(profile.eta.size());
    double total = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d) {
        const double shape = alpha * profile.eta[d];
        if (shape == 0.0) {
            p[d] = 0.0;
            continue;
        }
        std::gamma_distribution<double> gamma(shape, 1.0);
        p[d] = gamma(rng);
        total += p[d];
    }
    for (double& v : p) {
        v /= total;
    }
    return p;
}

std::vector<double> sample_delay_proportions(const DelayProfile& profile, std::mt19937_64& rng)
{
    std::gamma_distribution<double> alpha_prior(profile.alpha_shape, 1.0 / profile.alpha_rate);
    const double alpha = alpha_prior(rng);
    return sample_dirichlet(profile, alpha, rng);
}

std::vector<double> reporting_factors(const DelayProfile& profile, int n_days)
{
    const auto cum = profile.cumulative();
    std::vector<double> p(n_days);
    for (int t = 0; t < n_days; ++t) {
        const int age = n_days - 1 - t;
        p[t] = cum[std::min<std::size_t>(age, cum.size() - 1)];
    }
    return p;
}

AdjustedDeaths adjust_death_series(std::span<const std::int64_t> raw_deaths,
                                   std::span<const double> cumulative_reported)
{
    constexpr double kFloor = 0.05;
    if (raw_deaths.size() != cumulative_reported.size()) {
        throw std::invalid_argument("adjust_death_series: series lengths differ");
    }
    if (raw_deaths.size() < 2) {
        throw std::invalid_argument("adjust_death_series: need at least the two dropped days");
    }
    const std::size_t n = raw_deaths.size() - 2; // last two days are not reported
    AdjustedDeaths out;
    out.value.assign(n, 0.0);
    out.included.assign(n, true);
    for (std::size_t t = 0; t < n; ++t) {
        const double p = cumulative_reported[t];
        if (!(p > 0.0) || p > 1.0) {
            throw std::invalid_argument("adjust_death_series: proportions must lie in (0, 1]");
        }
        if (p < kFloor) {
            out.included[t] = false;
            continue;
        }
        out.value[t] = static_cast<double>(raw_deaths[t]) / p;
    }
    return out;
}

} // namespace epi
