#pragma once

#include "epi/dates.hpp"
#include "epi/nowcast.hpp"
#include "epi/renewal.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace epi {

using Warnings = std::vector<std::string>;

/// One state's raw daily death series on a contiguous date grid.
struct DeathSeries {
    std::string state;
    Date start;
    std::vector<std::int64_t> deaths;
};

/// One state's raw mobility indicators on a contiguous date grid.
struct MobilitySeries {
    std::string state;
    Date start;
    std::array<std::vector<double>, 4> indicators;

    int n_days() const { return static_cast<int>(indicators[0].size()); }
};

/// Loaders for the fixed CSV schemas. Gaps in a death series are zero-filled
/// with a warning; gaps inside a mobility series are linearly interpolated
/// with a warning. Out-of-order or duplicate dates within a state are errors.
std::vector<DeathSeries> load_deaths(const std::string& path, Warnings* warnings = nullptr);
std::vector<MobilitySeries> load_mobility(const std::string& path, Warnings* warnings = nullptr);
/// `state,population`; positive counts, one row per state.
std::map<std::string, double> load_population(const std::string& path);
/// `state,ifr_percent`; returns fractions, rejecting values outside (0, 10%).
std::map<std::string, double> load_ifr(const std::string& path);
/// `death_date,report_date,count` records pooled into a reporting triangle.
ReportingTriangle load_triangle(const std::string& path, int max_delay = 41);
/// `delay_days,eta,cumulative` (cumulative column is redundant but checked).
DelayProfile load_delay_profile(const std::string& path);

void save_deaths(const std::string& path, const std::vector<DeathSeries>& series);
void save_mobility(const std::string& path, const std::vector<MobilitySeries>& series);
void save_population(const std::string& path, const std::map<std::string, double>& population);
void save_ifr(const std::string& path, const std::map<std::string, double>& ifr_fraction);
void save_delay_profile(const std::string& path, const DelayProfile& profile);

/// Seven-day trailing moving average (each point is the mean of the day and
/// the previous six; the first six days average what is available) plus the
/// relaxation dummies, set to 1 on and after `dummy_start`.
MobilityMatrix smooth_mobility(const std::array<std::vector<double>, 4>& raw, Date start,
                               Date dummy_start = Date(2020, 6, 1));

struct EpidemicWindow {
    int window_start = 0; // fit_start - 30, clamped to the series start
    int fit_start = 0;    // day after cumulative deaths first reach 10
};

/// Empty when the series never accumulates 10 deaths before its final day.
std::optional<EpidemicWindow> epidemic_window(std::span<const std::int64_t> deaths);

/// Linear IFR interpolation across the five ordered marginalization levels.
/// Level 1 is the least marginalized anchor (Mexico City), level 5 the most
/// marginalized anchors; the result is scaled by the state's age weight.
struct IfrInterpolationTable {
    double anchor_least_marginalized = 0.0065;
    double anchor_most_marginalized = 0.0110;
    int levels = 5;
};

double interpolate_ifr(const IfrInterpolationTable& table, int level, double age_weight = 1.0);

/// One state after ingestion: aligned raw series plus the window indices.
struct StateData {
    std::string name;
    double population = 0.0;
    Date start;
    std::vector<std::int64_t> deaths;
    std::array<std::vector<double>, 4> mobility_raw;
    MobilityMatrix mobility; // smoothed, on the same grid
    double ifr = 0.0;
    int window_start = 0;
    int fit_start = 0;
};

struct Dataset {
    std::vector<StateData> states;
    std::vector<std::string> excluded; // never reached 10 cumulative deaths
    Warnings warnings;
};

/// Load, align and validate everything a fit needs. Mobility must cover each
/// state's death date range; states missing population, IFR or mobility are
/// errors, states that never reach 10 cumulative deaths are excluded with a
/// notice.
Dataset assemble_dataset(const std::string& deaths_path, const std::string& mobility_path,
                         const std::string& population_path, const std::string& ifr_path,
                         Date dummy_start = Date(2020, 6, 1));

} // namespace epi
