#pragma once

#include "epi/dates.hpp"
#include "epi/sampler.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace epi {

/// Cumulative share of the population infected by as_of_day, in percent,
/// clamped to [0, 100].
double attack_rate(std::span<const double> infections, double population, int as_of_day);

/// Infections over the 14 days ending at as_of_day (the official active-case
/// window). Throws if fewer than 14 days precede as_of_day.
double active_infections(std::span<const double> infections, int as_of_day);

/// 1e6 * deaths / population, rounded to the nearest integer.
std::int64_t deaths_per_million(double deaths_total, double population);

/// Everything the report needs for one state: observed facts plus per-draw
/// latent series, outer index draw, inner index day.
struct StateReportInputs {
    std::string name;
    Date start;
    double population = 0.0;
    double ifr = 0.0;
    std::int64_t deaths_total = 0;
    int as_of_day = -1; // summary day, relative to start; -1 means the last day
    std::vector<std::vector<double>> infections;
    std::vector<std::vector<double>> rt;
    std::vector<std::vector<double>> expected_deaths;
};

/// One summary row per state; point estimates are posterior medians with
/// central 95% credible bounds.
struct StateSummaryRow {
    std::string state;
    double ifr_percent = 0.0;
    double population = 0.0;
    std::int64_t deaths = 0;
    std::int64_t deaths_per_million = 0;
    double infections_thousands = 0, infections_lo95 = 0, infections_hi95 = 0;
    double infections_14d_thousands = 0, infections_14d_lo95 = 0, infections_14d_hi95 = 0;
    double attack_rate_percent = 0, attack_rate_lo95 = 0, attack_rate_hi95 = 0;
};

struct DayBand {
    Date date;
    double q2_5 = 0, q25 = 0, q50 = 0, q75 = 0, q97_5 = 0;
};

struct StateBands {
    std::string state;
    std::vector<DayBand> infections, deaths, rt;
};

struct FitReport {
    std::vector<StateSummaryRow> rows;
    std::vector<StateBands> bands;
    bool convergence_warning = false;
    std::vector<std::string> flagged_parameters;
    double rhat_max = 0.0;
    double ess_min = 0.0;
};

/// Summarize per-draw latents into Table-style rows and per-day bands.
FitReport build_report(const std::vector<StateReportInputs>& states);

/// Attach convergence diagnostics; R-hat above the threshold raises the
/// report's warning flag but never suppresses output.
void attach_diagnostics(FitReport& report, const Diagnostics& diag, double threshold = 1.05);

/// File-name slug for a state: lower case, non-alphanumerics collapsed to '_'.
std::string state_slug(const std::string& name);

/// Write summary.csv, per-state band CSVs (infections_<slug>.csv,
/// deaths_<slug>.csv, rt_<slug>.csv) and manifest.json under output_dir.
/// run_info is recorded verbatim in the manifest next to the diagnostics.
void write_report(const FitReport& report, const nlohmann::json& run_info,
                  const std::string& output_dir);

} // namespace epi
