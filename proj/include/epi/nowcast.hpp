#pragma once

#include "epi/dates.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace epi {

/// Death counts cross-classified by date of death and reporting delay.
/// Delay d ranges over 0..max_delay days; reports later than max_delay are
/// clamped into the last cell when the triangle is built from records.
struct ReportingTriangle {
    Date first_death_date;
    Date last_report_date;
    int max_delay = 41; // k-1 in days; the profile has k = max_delay+1 cells
    // counts[i][d]: deaths on first_death_date + i reported d days later
    std::vector<std::vector<std::int64_t>> counts;

    int n_death_dates() const { return static_cast<int>(counts.size()); }

    /// True when every delay cell of death date index i falls on or before
    /// the last report date.
    bool fully_observed(int i) const;

    void add(Date death_date, int delay, std::int64_t count);
};

/// Empirical reporting-delay profile. eta[d] is the fraction of deaths
/// reported d days after death; entries sum to one. The Dirichlet
/// concentration alpha carries a Gamma(100, 1) hyper-prior.
struct DelayProfile {
    std::vector<double> eta;
    double alpha_shape = 100.0;
    double alpha_rate = 1.0;

    int max_delay() const { return static_cast<int>(eta.size()) - 1; }

    /// cumulative()[a] = fraction of deaths reported within a days of death.
    std::vector<double> cumulative() const;
};

/// Pool all fully observed death dates of the triangle and return the
/// empirical per-delay reporting proportions. Throws if the triangle is
/// empty or no death date is fully observed.
DelayProfile estimate_eta(const ReportingTriangle& triangle);

/// p ~ Dirichlet(alpha * eta) with the concentration held fixed.
std::vector<double> sample_dirichlet(const DelayProfile& profile, double alpha,
                                     std::mt19937_64& rng);

/// Draws alpha ~ Gamma(100, 1), then p ~ Dirichlet(alpha * eta).
/// Marginal mean of p_t is eta_t; conditional on alpha the variance is
/// eta_t (1 - eta_t) / (alpha + 1).
std::vector<double> sample_delay_proportions(const DelayProfile& profile, std::mt19937_64& rng);

/// Proportion of deaths on each series day expected to be reported by the
/// snapshot date: day t of an n_days series has age n_days-1-t, and gets the
/// profile's cumulative proportion at that age (1 once fully mature).
std::vector<double> reporting_factors(const DelayProfile& profile, int n_days);

/// Observed counts corrected for reporting maturity by dividing by the
/// cumulative reported proportion. The final two days are dropped outright;
/// days whose cumulative proportion is below 0.05 are excluded rather than
/// inflated.
struct AdjustedDeaths {
    std::vector<double> value;   // raw / P_t; 0 where excluded
    std::vector<bool> included;  // false where the correction would exceed 20x
};

AdjustedDeaths adjust_death_series(std::span<const std::int64_t> raw_deaths,
                                   std::span<const double> cumulative_reported);

} // namespace epi
