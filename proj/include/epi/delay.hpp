#pragma once

#include <vector>

namespace epi {

/// Gamma distribution specified by mean and coefficient of variation.
///
/// Note the convention: a pair written Gamma(a, b) throughout this project is
/// (mean a in days, coefficient of variation b), NOT (shape, rate). The shape
/// is 1/b^2 and the rate is shape/a. The three delay distributions used by the
/// death model are Gamma(5.1, 0.86) infection-to-onset, Gamma(18.8, 0.45)
/// onset-to-death and Gamma(6.5, 0.62) serial interval.
struct GammaSpec {
    double mean;
    double cv;

    double shape() const { return 1.0 / (cv * cv); }
    double rate() const { return shape() / mean; }
};

/// Probability mass on whole days s = 1..horizon; mass[s-1] is day s.
/// Day 1 collects the interval [0, 1.5]; day s >= 2 collects [s-0.5, s+0.5].
struct DiscretePmf {
    std::vector<double> mass;

    int horizon() const { return static_cast<int>(mass.size()); }

    /// Mean day, Sum_s s * mass[s-1].
    double mean_day() const;
};

/// CDF of the Gamma given by `spec` at x >= 0. Throws on non-finite or
/// negative x.
double gamma_cdf(const GammaSpec& spec, double x);

/// Per-day probabilities before truncation renormalization:
/// raw[0] = CDF(1.5), raw[s-1] = CDF(s+0.5) - CDF(s-0.5) for s >= 2.
std::vector<double> discretize_raw(const GammaSpec& spec, int horizon);

/// Discretized pmf, renormalized to sum to one over the horizon. Throws if
/// the mass beyond the horizon exceeds 1% before renormalization.
DiscretePmf discretize(const GammaSpec& spec, int horizon);

/// Raw per-day probabilities of the sum of two independent Gammas, computed
/// by numerical convolution on a 0.05-day grid and re-binned to whole days.
std::vector<double> convolve_raw(const GammaSpec& onset, const GammaSpec& death, int horizon);

/// Discretized distribution of the sum of two independent Gamma delays
/// (infection-to-onset plus onset-to-death), renormalized over the horizon.
/// Same tail-mass guard as discretize().
DiscretePmf convolve_infection_to_death(const GammaSpec& onset, const GammaSpec& death,
                                        int horizon);

} // namespace epi
