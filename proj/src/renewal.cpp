#include "epi/renewal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace epi {

namespace {

/// Clamp a proposed infection count to the remaining susceptible headroom.
/// The clamped value is shaved by one ulp so that a left-to-right running sum
/// of the series can never round above the population.
double clamp_to_headroom(double c, double cumulative, double population)
{
    const double headroom = population - cumulative;
    if (!(headroom > 0.0)) {
        return 0.0;
    }
    if (c < headroom) {
        return c;
    }
    return std::nextafter(headroom, 0.0);
}

} // namespace

double rt_link(const RtParams& params, const std::array<double, 4>& x,
               const std::array<double, 4>& z)
{
    double u = 0.0;
    for (int k = 0; k < 4; ++k) {
        u -= (params.alpha[k] + params.beta[k]) * x[k] + params.gamma[k] * z[k];
    }
    return params.r0 * 2.0 / (1.0 + std::exp(-u));
}

std::vector<double> rt_series(const RtParams& params, const MobilityMatrix& mobility)
{
    const int n = mobility.n_days();
    std::vector<double> rt(n);
    for (int t = 0; t < n; ++t) {
        std::array<double, 4> x, z;
        for (int k = 0; k < 4; ++k) {
            x[k] = mobility.indicators[k][t];
            z[k] = mobility.dummies[k][t];
        }
        rt[t] = rt_link(params, x, z);
    }
    return rt;
}

double renewal_step(std::span<const double> history, const DiscretePmf& serial_interval,
                    double rt, double population)
{
    const int t_minus_1 = static_cast<int>(history.size());
    double cumulative = 0.0;
    for (double c : history) {
        cumulative += c;
    }
    const double s_t = std::max(0.0, 1.0 - cumulative / population);
    double force = 0.0;
    const int max_lag = std::min(t_minus_1, serial_interval.horizon());
    // lag = t - tau runs over 1..t-1; serial-interval mass beyond the horizon is zero
    for (int lag = 1; lag <= max_lag; ++lag) {
        force += history[t_minus_1 - lag] * serial_interval.mass[lag - 1];
    }
    return clamp_to_headroom(s_t * rt * force, cumulative, population);
}

InfectionSeries simulate_state(double seed_magnitude, int seed_days, int days,
                               const DiscretePmf& serial_interval, std::span<const double> rt,
                               double population)
{
    if (days < seed_days) {
        throw std::invalid_argument("simulate_state: horizon shorter than the seeding window");
    }
    if (static_cast<int>(rt.size()) != days) {
        throw std::invalid_argument("simulate_state: rt series must cover every day");
    }
    InfectionSeries out;
    out.population = population;
    out.infections.resize(days, 0.0);
    out.susceptible.resize(days, 1.0);

    double cumulative = 0.0;
    for (int t = 0; t < days; ++t) {
        out.susceptible[t] = std::max(0.0, 1.0 - cumulative / population);
        double c_t;
        if (t < seed_days) {
            c_t = clamp_to_headroom(seed_magnitude, cumulative, population);
        }
        else {
            c_t = renewal_step({out.infections.data(), static_cast<std::size_t>(t)},
                               serial_interval, rt[t], population);
        }
        out.infections[t] = c_t;
        cumulative += c_t;
    }
    return out;
}

} // namespace epi
