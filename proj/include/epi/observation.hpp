#pragma once

#include "epi/delay.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace epi {

/// Choice of the negative-binomial variance in the death likelihood:
/// linear uses mean + mean/phi, quadratic uses mean + mean^2/phi.
enum class DispersionForm { linear, quadratic };

/// Per-state observation parameters: infection fatality ratio, its
/// multiplicative noise, under-reporting fraction psi and NegBin dispersion.
struct DeathModelParams {
    double ifr = 0.0;
    double ifr_noise = 1.0;
    double psi = 1.0;
    double phi = 1.0;

    double ifr_effective() const { return ifr * ifr_noise; }
};

/// Expected daily deaths d_t = IFR_eff * Sum_{tau=1}^{t-1} c_tau * pi_{t-tau};
/// d_1 is zero. pi is lag-indexed from one day (no same-day deaths).
std::vector<double> expected_deaths(std::span<const double> infections, const DiscretePmf& pi,
                                    const DeathModelParams& params);

/// Expectation of the observed (reported, delayed) count: psi * P_t * d_t.
std::vector<double> apply_reporting_factors(std::span<const double> expected, double psi,
                                            std::span<const double> cumulative_reported);

/// Log pmf of a negative binomial parameterized by mean and dispersion phi.
/// With the linear form the size parameter is mean*phi, with the quadratic
/// form it is phi. mean == 0 gives 0 for observed == 0 and -inf otherwise.
double negbin_logpmf(std::int64_t observed, double mean, double phi,
                     DispersionForm form = DispersionForm::linear);

/// Sum of negbin_logpmf over days t >= fit_start, excluding the final two
/// days of the series. Entries outside that window are never read.
double state_loglikelihood(std::span<const std::int64_t> observed,
                           std::span<const double> expected, double phi, int fit_start,
                           DispersionForm form = DispersionForm::linear);

} // namespace epi
