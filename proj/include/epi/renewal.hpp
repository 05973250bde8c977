#pragma once

#include "epi/delay.hpp"

#include <array>
#include <span>
#include <vector>

namespace epi {

/// Smoothed mobility covariates and post-relaxation dummies for one state,
/// on the state's modelled day grid. All four indicator series and the death
/// series share the same day index.
struct MobilityMatrix {
    std::array<std::vector<double>, 4> indicators; // X_k, 7-day-mean smoothed
    std::array<std::vector<double>, 4> dummies;    // Z_k in {0, 1}

    int n_days() const { return static_cast<int>(indicators[0].size()); }
};

/// Reproduction-number link parameters for one state: shared covariate
/// effects alpha, state offsets beta, and dummy effects gamma.
struct RtParams {
    double r0 = 0.0;
    std::array<double, 4> alpha{};
    std::array<double, 4> beta{};
    std::array<double, 4> gamma{};
};

/// Daily new infections with the running susceptible fraction.
struct InfectionSeries {
    std::vector<double> infections;  // c_t
    std::vector<double> susceptible; // S_t, non-increasing, in [0, 1]
    double population = 0.0;
};

/// R_t = r0 * 2 / (1 + exp(-u)), u = -Sum_k [(alpha_k + beta_k) x_k + gamma_k z_k].
/// Equals r0 when all covariates are zero; bounded in (0, 2*r0).
double rt_link(const RtParams& params, const std::array<double, 4>& x,
               const std::array<double, 4>& z);

/// rt_link evaluated on every day of the mobility matrix.
std::vector<double> rt_series(const RtParams& params, const MobilityMatrix& mobility);

/// One step of the renewal recursion: given infections c_1..c_{t-1}, returns
///   c_t = S_t * rt * Sum_{tau=1}^{t-1} c_tau * g_{t-tau},
/// with S_t = 1 - (Sum c)/N floored at zero and the result clamped so the
/// cumulative infection count never exceeds the population.
double renewal_step(std::span<const double> history, const DiscretePmf& serial_interval,
                    double rt, double population);

/// Forward-simulate a state: the first `seed_days` days carry `seed_magnitude`
/// infections each, the rest follow the renewal recursion under rt[t].
/// Deterministic in its inputs.
InfectionSeries simulate_state(double seed_magnitude, int seed_days, int days,
                               const DiscretePmf& serial_interval, std::span<const double> rt,
                               double population);

} // namespace epi
