#include "epi/report.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

using namespace epi;

namespace {

// Type-7 quantile, written out locally so the report plumbing is checked
// against something other than itself.
double q7(std::vector<double> v, double p)
{
    std::sort(v.begin(), v.end());
    const double h = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

StateReportInputs random_state(const std::string& name, int n_draws, int n_days,
                               std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::lognormal_distribution<double> ln(4.0, 0.8);
    std::lognormal_distribution<double> ln_small(0.0, 0.3);
    StateReportInputs st;
    st.name = name;
    st.start = Date(2020, 3, 15);
    st.population = 2.5e6;
    st.ifr = 0.008;
    st.deaths_total = 1234;
    st.infections.resize(n_draws);
    st.rt.resize(n_draws);
    st.expected_deaths.resize(n_draws);
    for (int d = 0; d < n_draws; ++d) {
        st.infections[d].resize(n_days);
        st.rt[d].resize(n_days);
        st.expected_deaths[d].resize(n_days);
        for (int t = 0; t < n_days; ++t) {
            st.infections[d][t] = ln(rng);
            st.rt[d][t] = ln_small(rng);
            st.expected_deaths[d][t] = 0.01 * ln(rng);
        }
    }
    return st;
}

} // namespace

TEST_CASE("attack rate: share of the population infected to date")
{
    std::vector<double> zero(20, 0.0);
    CHECK(attack_rate(zero, 1e6, 19) == 0.0);

    // one documented state-level figure
    std::vector<double> bc(20, 85'500.0); // sums to 1,710,000
    CHECK(attack_rate(bc, 3'606'940.0, 19) == doctest::Approx(47.4).epsilon(2e-3));

    std::vector<double> all(10, 1e5);
    CHECK(attack_rate(all, 1e6, 9) == 100.0);  // cumulative equals N
    CHECK(attack_rate(all, 5e5, 9) == 100.0);  // clamped above N

    // only days up to as_of_day count
    std::vector<double> steps = {100.0, 100.0, 700.0};
    CHECK(attack_rate(steps, 1000.0, 1) == 20.0);

    CHECK_THROWS(attack_rate(steps, 1000.0, 3));
    CHECK_THROWS(attack_rate(steps, 1000.0, -1));
    CHECK_THROWS(attack_rate(steps, 0.0, 1));
}

TEST_CASE("active infections: trailing 14-day window")
{
    std::vector<double> constant(30, 10.0);
    CHECK(active_infections(constant, 29) == doctest::Approx(140.0).epsilon(1e-14));
    CHECK(active_infections(constant, 13) == doctest::Approx(140.0).epsilon(1e-14));

    // a spike exactly 15 days back falls outside the window
    std::vector<double> spike(30, 0.0);
    spike[29 - 14] = 100.0;
    CHECK(active_infections(spike, 29) == 0.0);
    spike[29 - 13] = 7.0; // oldest day still inside
    CHECK(active_infections(spike, 29) == 7.0);

    CHECK_THROWS(active_infections(constant, 12)); // window underflow
    CHECK_THROWS(active_infections(constant, 30)); // past the series
}

TEST_CASE("deaths per million: table arithmetic")
{
    CHECK(deaths_per_million(6119.0, 9'025'363.0) == 678);
    CHECK(deaths_per_million(6392.0, 17'338'220.0) == 369);
    CHECK(deaths_per_million(0.0, 1'000'000.0) == 0);
    CHECK(deaths_per_million(1.0, 2'000'000.0) == 1); // .5 rounds away from zero
    CHECK_THROWS(deaths_per_million(10.0, 0.0));
}

TEST_CASE("summary rows match a per-draw oracle")
{
    const int n_draws = 200, n_days = 30;
    const auto st = random_state("Sonora", n_draws, n_days, 808);
    const FitReport report = build_report({st});
    REQUIRE(report.rows.size() == 1);
    const StateSummaryRow& row = report.rows[0];

    CHECK(row.state == "Sonora");
    CHECK(row.ifr_percent == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(row.population == st.population);
    CHECK(row.deaths == 1234);
    CHECK(row.deaths_per_million == deaths_per_million(1234.0, st.population));

    std::vector<double> totals, last14, rates;
    for (const auto& draw : st.infections) {
        totals.push_back(std::accumulate(draw.begin(), draw.end(), 0.0) / 1000.0);
        double w = 0.0;
        for (int t = n_days - 14; t < n_days; ++t) {
            w += draw[t];
        }
        last14.push_back(w / 1000.0);
        rates.push_back(
            std::clamp(100.0 * std::accumulate(draw.begin(), draw.end(), 0.0) / st.population,
                       0.0, 100.0));
    }
    CHECK(row.infections_thousands == doctest::Approx(q7(totals, 0.5)).epsilon(1e-12));
    CHECK(row.infections_lo95 == doctest::Approx(q7(totals, 0.025)).epsilon(1e-12));
    CHECK(row.infections_hi95 == doctest::Approx(q7(totals, 0.975)).epsilon(1e-12));
    CHECK(row.infections_14d_thousands == doctest::Approx(q7(last14, 0.5)).epsilon(1e-12));
    CHECK(row.infections_14d_lo95 == doctest::Approx(q7(last14, 0.025)).epsilon(1e-12));
    CHECK(row.infections_14d_hi95 == doctest::Approx(q7(last14, 0.975)).epsilon(1e-12));
    CHECK(row.attack_rate_percent == doctest::Approx(q7(rates, 0.5)).epsilon(1e-12));
    CHECK(row.attack_rate_lo95 == doctest::Approx(q7(rates, 0.025)).epsilon(1e-12));
    CHECK(row.attack_rate_hi95 == doctest::Approx(q7(rates, 0.975)).epsilon(1e-12));

    CHECK(row.infections_lo95 <= row.infections_thousands);
    CHECK(row.infections_thousands <= row.infections_hi95);
}

TEST_CASE("an explicit as_of_day truncates the cumulative quantities")
{
    auto st = random_state("Yucatan", 50, 40, 809);
    st.as_of_day = 20;
    const FitReport report = build_report({st});

    std::vector<double> totals;
    for (const auto& draw : st.infections) {
        totals.push_back(std::accumulate(draw.begin(), draw.begin() + 21, 0.0) / 1000.0);
    }
    CHECK(report.rows[0].infections_thousands == doctest::Approx(q7(totals, 0.5)).epsilon(1e-12));

    // bands still cover the full modelled window
    CHECK(report.bands[0].infections.size() == 40);
}

TEST_CASE("per-day bands: shape, dates, quantile order, oracle")
{
    const int n_draws = 120, n_days = 25;
    const auto st = random_state("Jalisco", n_draws, n_days, 810);
    const FitReport report = build_report({st});
    REQUIRE(report.bands.size() == 1);
    const StateBands& bands = report.bands[0];
    CHECK(bands.state == "Jalisco");
    REQUIRE(bands.infections.size() == static_cast<std::size_t>(n_days));
    REQUIRE(bands.deaths.size() == static_cast<std::size_t>(n_days));
    REQUIRE(bands.rt.size() == static_cast<std::size_t>(n_days));

    for (int t = 0; t < n_days; ++t) {
        const DayBand& b = bands.infections[t];
        CHECK(b.date == st.start + t);
        CHECK(b.q2_5 <= b.q25);
        CHECK(b.q25 <= b.q50);
        CHECK(b.q50 <= b.q75);
        CHECK(b.q75 <= b.q97_5);

        std::vector<double> column;
        for (const auto& draw : st.infections) {
            column.push_back(draw[t]);
        }
        CHECK(b.q50 == doctest::Approx(q7(column, 0.5)).epsilon(1e-12));
        CHECK(b.q2_5 == doctest::Approx(q7(column, 0.025)).epsilon(1e-12));
        CHECK(b.q97_5 == doctest::Approx(q7(column, 0.975)).epsilon(1e-12));
    }
}

TEST_CASE("report input validation")
{
    auto st = random_state("Colima", 10, 20, 811);

    auto ragged = st;
    ragged.infections[3].pop_back();
    CHECK_THROWS(build_report({ragged}));

    auto empty = st;
    empty.infections.clear();
    CHECK_THROWS(build_report({empty}));

    auto short_window = random_state("Colima", 10, 10, 812); // < 14 days
    CHECK_THROWS(build_report({short_window}));

    auto bad_day = st;
    bad_day.as_of_day = 20;
    CHECK_THROWS(build_report({bad_day}));
}

TEST_CASE("diagnostics attach without suppressing the report")
{
    FitReport report;
    Diagnostics diag;
    diag.rhat = {1.01, 1.12, 1.0};
    diag.ess = {900.0, 150.0, 2000.0};
    diag.flagged = {"beta2_sonora"};
    attach_diagnostics(report, diag);
    CHECK(report.rhat_max == 1.12);
    CHECK(report.ess_min == 150.0);
    CHECK(report.convergence_warning);
    REQUIRE(report.flagged_parameters.size() == 1);
    CHECK(report.flagged_parameters[0] == "beta2_sonora");

    FitReport clean;
    diag.rhat = {1.01, 1.03};
    diag.flagged.clear();
    attach_diagnostics(clean, diag, 1.05);
    CHECK(!clean.convergence_warning);
    CHECK(clean.rhat_max == 1.03);

    FitReport empty;
    attach_diagnostics(empty, Diagnostics{});
    CHECK(empty.rhat_max == 0.0);
    CHECK(empty.ess_min == 0.0);
    CHECK(!empty.convergence_warning);
}

TEST_CASE("state slugs are file-system friendly")
{
    CHECK(state_slug("Baja California Sur") == "baja_california_sur");
    CHECK(state_slug("CDMX") == "cdmx");
    CHECK(state_slug("Queretaro") == "queretaro");
    CHECK(state_slug("a-b.c") == "a_b_c");
    // bytes outside ASCII letters map to underscores, one per byte
    CHECK(state_slug("M\xc3\xa9xico") == "m__xico");
}

TEST_CASE("write_report emits the documented files")
{
    // single draw so every quantile equals the draw itself
    StateReportInputs st;
    st.name = "Baja California";
    st.start = Date(2020, 4, 1);
    st.population = 3'606'940.0;
    st.ifr = 0.008;
    st.deaths_total = 2025;
    st.infections = {std::vector<double>(20, 85'500.0)}; // cumulative 1,710,000
    st.rt = {std::vector<double>(20, 1.1)};
    st.expected_deaths = {std::vector<double>(20, 12.5)};

    FitReport report = build_report({st});
    Diagnostics diag;
    diag.rhat = {1.0};
    diag.ess = {400.0};
    attach_diagnostics(report, diag);

    testutil::TempDir tmp;
    const std::string dir = tmp.file("out");
    nlohmann::json run_info = {{"seed", 42}, {"command", "fit"}};
    write_report(report, run_info, dir);

    const std::string summary = testutil::read_file(dir + "/summary.csv");
    const std::string header =
        "state,ifr_percent,population,deaths,deaths_per_million,"
        "infections_thousands,infections_lo95,infections_hi95,"
        "infections_14d_thousands,infections_14d_lo95,infections_14d_hi95,"
        "attack_rate_percent,attack_rate_lo95,attack_rate_hi95";
    REQUIRE(summary.find(header + "\n") == 0);
    const std::string row = summary.substr(header.size() + 1);
    CHECK(row == "Baja California,0.80,3606940,2025,561,"
                 "1710.0,1710.0,1710.0,1197.0,1197.0,1197.0,47.4,47.4,47.4\n");

    for (const std::string stem : {"infections", "deaths", "rt"}) {
        const std::string band = testutil::read_file(dir + "/" + stem + "_baja_california.csv");
        REQUIRE(band.find("date,q2_5,q25,q50,q75,q97_5\n") == 0);
        CHECK(std::count(band.begin(), band.end(), '\n') == 21); // header + one row per day
        CHECK(band.find("2020-04-01,") != std::string::npos);
        CHECK(band.find("2020-04-20,") != std::string::npos);
    }

    const auto manifest = nlohmann::json::parse(testutil::read_file(dir + "/manifest.json"));
    CHECK(manifest["run"]["seed"] == 42);
    CHECK(manifest["run"]["command"] == "fit");
    CHECK(manifest["diagnostics"]["convergence_warning"] == false);
    CHECK(manifest["diagnostics"]["rhat_max"] == 1.0);
    CHECK(manifest["diagnostics"]["ess_min"] == 400.0);
    CHECK(manifest["states"] == nlohmann::json::array({"Baja California"}));

    // same inputs, second directory: byte-identical output
    const std::string dir2 = tmp.file("out2");
    write_report(report, run_info, dir2);
    CHECK(testutil::read_file(dir2 + "/summary.csv") == summary);
    CHECK(testutil::read_file(dir2 + "/manifest.json") ==
          testutil::read_file(dir + "/manifest.json"));
}

TEST_CASE("colliding state file names are rejected")
{
    auto a = random_state("CDMX", 5, 20, 813);
    auto b = random_state("cdmx", 5, 20, 814);
    const FitReport report = build_report({a, b});
    testutil::TempDir tmp;
    CHECK_THROWS(write_report(report, nlohmann::json::object(), tmp.file("out")));
}
