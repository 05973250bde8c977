#include "epi/observation.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace epi {

std::vector<double> expected_deaths(std::span<const double> infections, const DiscretePmf& pi,
                                    const DeathModelParams& params)
{
    const int n = static_cast<int>(infections.size());
    if (pi.horizon() < n - 1) {
        throw std::invalid_argument("expected_deaths: pi horizon shorter than the series");
    }
    const double ifr_eff = params.ifr_effective();
    std::vector<double> d(n, 0.0);
    for (int t = 1; t < n; ++t) {
        double sum = 0.0;
        for (int lag = 1; lag <= t; ++lag) {
            sum += infections[t - lag] * pi.mass[lag - 1];
        }
        d[t] = ifr_eff * sum;
    }
    return d;
}

std::vector<double> apply_reporting_factors(std::span<const double> expected, double psi,
                                            std::span<const double> cumulative_reported)
{
    if (expected.size() != cumulative_reported.size()) {
        throw std::invalid_argument("apply_reporting_factors: series lengths differ");
    }
    std::vector<double> out(expected.size());
    for (std::size_t t = 0; t < expected.size(); ++t) {
        out[t] = psi * cumulative_reported[t] * expected[t];
    }
    return out;
}

double negbin_logpmf(std::int64_t observed, double mean, double phi, DispersionForm form)
{
    if (observed < 0 || !(phi > 0.0) || mean < 0.0) {
        return -std::numeric_limits<double>::infinity();
    }
    if (mean == 0.0) {
        return observed == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
    }
    // size r from the requested variance: linear  v = m + m/phi   -> r = m*phi
    //                                     quadratic v = m + m^2/phi -> r = phi
    const double r = (form == DispersionForm::linear) ? mean * phi : phi;
    const double y = static_cast<double>(observed);
    const double log_r_frac = std::log(r / (r + mean));
    const double log_m_frac = std::log(mean / (r + mean));
    return std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) + r * log_r_frac +
           y * log_m_frac;
}

double state_loglikelihood(std::span<const std::int64_t> observed,
                           std::span<const double> expected, double phi, int fit_start,
                           DispersionForm form)
{
    if (observed.size() != expected.size()) {
        throw std::invalid_argument("state_loglikelihood: series lengths differ");
    }
    const int n = static_cast<int>(observed.size());
    if (fit_start < 0 || fit_start >= n) {
        throw std::invalid_argument("state_loglikelihood: fit_start outside the series");
    }
    double ll = 0.0;
    for (int t = fit_start; t < n - 2; ++t) { // the last two days are never fitted
        ll += negbin_logpmf(observed[t], expected[t], phi, form);
    }
    return ll;
}

} // namespace epi
