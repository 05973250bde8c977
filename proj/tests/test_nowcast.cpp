#include "epi/nowcast.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace epi;

namespace {

DelayProfile profile_from(std::vector<double> eta)
{
    DelayProfile p;
    p.eta = std::move(eta);
    return p;
}

} // namespace

TEST_CASE("triangle bookkeeping: growth, shifting, clamping")
{
    ReportingTriangle tri;
    tri.max_delay = 3;
    const Date d0 = Date::parse("2020-03-10");

    tri.add(d0, 0, 5);
    CHECK(tri.first_death_date == d0);
    CHECK(tri.n_death_dates() == 1);

    tri.add(d0 + 4, 1, 2); // grows forward
    CHECK(tri.n_death_dates() == 5);
    CHECK(tri.counts[4][1] == 2);

    tri.add(d0 - 2, 2, 7); // shifts the origin back
    CHECK(tri.first_death_date == d0 - 2);
    CHECK(tri.n_death_dates() == 7);
    CHECK(tri.counts[0][2] == 7);
    CHECK(tri.counts[2][0] == 5); // original row moved with the shift

    tri.add(d0, 9, 1); // delay beyond max_delay lands in the last cell
    CHECK(tri.counts[2][3] == 1);

    CHECK_THROWS(tri.add(d0, -1, 1));
    CHECK_THROWS(tri.add(d0, 0, -1));
}

TEST_CASE("fully_observed needs max_delay days of reports")
{
    ReportingTriangle tri;
    tri.max_delay = 2;
    const Date d0 = Date::parse("2020-03-01");
    tri.add(d0, 0, 1);
    tri.add(d0 + 3, 1, 1); // last report: 2020-03-05

    CHECK(tri.last_report_date == d0 + 4);
    CHECK(tri.fully_observed(0));      // 03-01 + 2 <= 03-05
    CHECK(tri.fully_observed(2));      // 03-03 + 2 <= 03-05
    CHECK_FALSE(tri.fully_observed(3)); // 03-04 + 2 > 03-05
}

TEST_CASE("estimate_eta: degenerate all-at-once reporting")
{
    ReportingTriangle tri;
    tri.max_delay = 4;
    const Date d0 = Date::parse("2020-04-01");
    tri.add(d0, 0, 50);
    tri.add(d0 + 10, 0, 30); // makes d0 fully observed
    const DelayProfile p = estimate_eta(tri);
    REQUIRE(p.eta.size() == 5);
    CHECK(p.eta[0] == 1.0);
    for (int d = 1; d <= 4; ++d) {
        CHECK(p.eta[d] == 0.0);
    }
}

TEST_CASE("estimate_eta: direct ratio on one complete date")
{
    ReportingTriangle tri;
    tri.max_delay = 1;
    const Date d0 = Date::parse("2020-04-01");
    tri.add(d0, 0, 10);
    tri.add(d0, 1, 30);
    // a later, incomplete date with wildly different proportions; ignored
    tri.add(d0 + 1, 0, 500);
    const DelayProfile p = estimate_eta(tri);
    CHECK(p.eta[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(p.eta[1] == doctest::Approx(0.75).epsilon(1e-12));

    double total = std::accumulate(p.eta.begin(), p.eta.end(), 0.0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("estimate_eta recovers a known profile from simulated reports")
{
    const std::vector<double> truth = {0.1, 0.3, 0.4, 0.2};
    ReportingTriangle tri;
    tri.max_delay = 3;
    std::mt19937_64 rng(99);
    std::discrete_distribution<int> delay_of(truth.begin(), truth.end());
    const Date d0 = Date::parse("2020-04-01");
    for (int i = 0; i < 100000; ++i) {
        tri.add(d0 + (i % 10), delay_of(rng), 1);
    }
    tri.add(d0 + 40, 0, 1); // sentinel report making all earlier dates complete

    const DelayProfile p = estimate_eta(tri);
    for (int d = 0; d < 4; ++d) {
        CHECK(std::abs(p.eta[d] - truth[d]) < 0.01);
    }
}

TEST_CASE("estimate_eta error cases")
{
    ReportingTriangle empty;
    CHECK_THROWS(estimate_eta(empty));

    ReportingTriangle incomplete;
    incomplete.max_delay = 5;
    incomplete.add(Date::parse("2020-04-01"), 0, 10); // last report = death date
    CHECK_THROWS(estimate_eta(incomplete));
}

TEST_CASE("sampled proportions live on the simplex")
{
    const DelayProfile p = profile_from({0.1, 0.3, 0.4, 0.2});
    std::mt19937_64 rng(5);
    for (int i = 0; i < 1000; ++i) {
        const auto draw = sample_delay_proportions(p, rng);
        REQUIRE(draw.size() == 4);
        double total = 0.0;
        for (const double v : draw) {
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(std::abs(total - 1.0) < 1e-12);
    }
}

TEST_CASE("zero-mass delay cells stay exactly zero")
{
    const DelayProfile p = profile_from({0.5, 0.0, 0.5});
    std::mt19937_64 rng(6);
    const auto draw = sample_dirichlet(p, 100.0, rng);
    CHECK(draw[1] == 0.0);
    CHECK(draw[0] + draw[2] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Dirichlet marginal mean matches eta")
{
    const DelayProfile p = profile_from({0.5, 0.5});
    std::mt19937_64 rng(7);
    const int n = 100000;
    double sum = 0.0, sum2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = sample_delay_proportions(p, rng)[0];
        sum += v;
        sum2 += v * v;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    const double se = std::sqrt(var / n);
    CHECK(std::abs(mean - 0.5) < 3.0 * se);
}

TEST_CASE("Dirichlet variance at fixed concentration")
{
    // conditional on alpha = 100: Var(p_1) = eta (1-eta) / (alpha + 1)
    const DelayProfile p = profile_from({0.2, 0.8});
    std::mt19937_64 rng(8);
    const int n = 100000;
    std::vector<double> draws(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        draws[i] = sample_dirichlet(p, 100.0, rng)[0];
        sum += draws[i];
    }
    const double mean = sum / n;
    double var = 0.0, fourth = 0.0;
    for (const double v : draws) {
        const double d2 = (v - mean) * (v - mean);
        var += d2;
        fourth += d2 * d2;
    }
    var /= n;
    fourth /= n;
    const double se_var = std::sqrt((fourth - var * var) / n);
    const double want = 0.2 * 0.8 / 101.0;
    CHECK(std::abs(var - want) < 3.0 * se_var);
    CHECK(std::abs(mean - 0.2) < 3.0 * std::sqrt(var / n));
}

TEST_CASE("reporting factors by age of record")
{
    const DelayProfile p = profile_from({0.6, 0.3, 0.1});
    const auto cum = p.cumulative();
    REQUIRE(cum.size() == 3);
    CHECK(cum[0] == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(cum[1] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(cum[2] == 1.0); // full maturity is exactly one

    const auto factors = reporting_factors(p, 5);
    REQUIRE(factors.size() == 5);
    CHECK(factors[0] == 1.0); // age 4: beyond the profile, fully mature
    CHECK(factors[1] == 1.0);
    CHECK(factors[2] == 1.0); // age 2: cumulative caps at 1
    CHECK(factors[3] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(factors[4] == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("adjustment divides by maturity and drops the last two days")
{
    const std::vector<std::int64_t> raw = {45, 45, 45, 45, 45};
    const std::vector<double> p = {1.0, 0.9, 1.0, 0.9, 0.6};
    const AdjustedDeaths adj = adjust_death_series(raw, p);
    REQUIRE(adj.value.size() == 3); // the last two days are gone
    CHECK(adj.value[0] == 45.0);    // fully mature: identity
    CHECK(adj.value[1] == doctest::Approx(50.0).epsilon(1e-12));
    CHECK(adj.value[2] == 45.0);
    CHECK(adj.included == std::vector<bool>{true, true, true});
}

TEST_CASE("adjustment is the identity on fully reported series")
{
    const std::vector<std::int64_t> raw = {3, 1, 4, 1, 5, 9, 2};
    const std::vector<double> p(raw.size(), 1.0);
    const AdjustedDeaths adj = adjust_death_series(raw, p);
    REQUIRE(adj.value.size() == raw.size() - 2);
    for (std::size_t t = 0; t < adj.value.size(); ++t) {
        CHECK(adj.value[t] == static_cast<double>(raw[t]));
    }
}

TEST_CASE("immature days below the floor are excluded, not inflated")
{
    const std::vector<std::int64_t> raw = {10, 10, 10, 10};
    const std::vector<double> p = {1.0, 0.04, 1.0, 1.0};
    const AdjustedDeaths adj = adjust_death_series(raw, p);
    CHECK(adj.included == std::vector<bool>{true, false});
    CHECK(adj.value[0] == 10.0);
    CHECK(adj.value[1] == 0.0);
}

TEST_CASE("adjustment input validation")
{
    const std::vector<std::int64_t> raw = {1, 2, 3, 4};
    CHECK_THROWS(adjust_death_series(raw, std::vector<double>{1.0, 1.0, 1.0}));
    CHECK_THROWS(adjust_death_series(raw, std::vector<double>{0.0, 1.0, 1.0, 1.0}));
    CHECK_THROWS(adjust_death_series(raw, std::vector<double>{1.1, 1.0, 1.0, 1.0}));
    CHECK_THROWS(adjust_death_series(std::vector<std::int64_t>{5},
                                     std::vector<double>{1.0}));
}

TEST_CASE("binomial thinning round-trip")
{
    // true deaths thinned by known maturity; division recovers the totals
    const int n_days = 60;
    const std::vector<double> truth_eta = {0.1, 0.3, 0.4, 0.2};
    const DelayProfile profile = profile_from(truth_eta);
    const auto factors = reporting_factors(profile, n_days);

    std::mt19937_64 rng(321);
    const std::int64_t true_daily = 200;
    std::vector<std::int64_t> observed(n_days);
    for (int t = 0; t < n_days; ++t) {
        std::binomial_distribution<std::int64_t> thin(true_daily, factors[t]);
        observed[t] = thin(rng);
    }
    const AdjustedDeaths adj = adjust_death_series(observed, factors);

    double total = 0.0, var = 0.0;
    int included_days = 0;
    for (std::size_t t = 0; t < adj.value.size(); ++t) {
        if (!adj.included[t]) {
            continue;
        }
        ++included_days;
        total += adj.value[t];
        const double p = factors[t];
        var += static_cast<double>(true_daily) * (1.0 - p) / p; // Var(X/p)
    }
    const double expected_total = static_cast<double>(true_daily) * included_days;
    CHECK(std::abs(total - expected_total) < 3.0 * std::sqrt(var) + 1e-9);
}
