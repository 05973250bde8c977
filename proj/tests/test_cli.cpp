#include "epi/dates.hpp"

#include "support.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
    std::string err;
};

/// Run the installed binary inside `dir` so relative manifest paths and
/// relative output directories land in the scratch space.
CliResult run_in(const std::string& dir, const std::string& args)
{
    static int counter = 0;
    const std::string out_path = dir + "/cli_out_" + std::to_string(counter) + ".txt";
    const std::string err_path = dir + "/cli_err_" + std::to_string(counter) + ".txt";
    ++counter;
    const std::string cmd = "cd '" + dir + "' && '" + EPIFIT_BINARY + "' " + args + " > '" +
                            out_path + "' 2> '" + err_path + "'";
    const int status = std::system(cmd.c_str());
    CliResult r;
    if (status >= 0 && WIFEXITED(status)) {
        r.code = WEXITSTATUS(status);
    }
    r.out = testutil::read_file(out_path);
    r.err = testutil::read_file(err_path);
    return r;
}

/// Two-state synthetic inputs: a mobility-reduction index that ramps up, flat
/// populations and IFRs. 70 days so the delay pmfs pass their tail guards.
void write_sim_inputs(const std::string& dir)
{
    std::string mob = "state,date,k1,k2,k3,k4\n";
    for (const std::string state : {"alpha", "beta"}) {
        for (int t = 0; t < 70; ++t) {
            const std::string date = (epi::Date{2020, 3, 1} + t).to_string();
            const double x = 1.2 * std::min(t / 25.0, 1.0);
            mob += state + "," + date + "," + std::to_string(x) + ",0,0,0\n";
        }
    }
    testutil::write_file(dir + "/mobility.csv", mob);
    testutil::write_file(dir + "/population.csv", "state,population\nalpha,2000000\nbeta,3000000\n");
    testutil::write_file(dir + "/ifr.csv", "state,ifr_percent\nalpha,0.8\nbeta,1.0\n");

    json manifest;
    manifest["mobility"] = "mobility.csv";
    manifest["population"] = "population.csv";
    manifest["ifr"] = "ifr.csv";
    manifest["output_dir"] = "sim";
    manifest["chains"] = {{"seed", 11}, {"n_chains", 2}, {"n_warmup", 150}, {"n_samples", 60}};
    manifest["model"] = {{"seed_days", 6}};
    manifest["true_params"] = {{"r0", 3.0},
                               {"alpha", {0.9, 0.0, 0.0, 0.0}},
                               {"seed_infections", 60.0},
                               {"psi", 0.5},
                               {"phi", 2.0}};
    testutil::write_file(dir + "/sim_manifest.json", manifest.dump(2));
}

} // namespace

TEST_CASE("usage errors exit 1, help exits 0")
{
    testutil::TempDir tmp;
    CHECK(run_in(tmp.path.string(), "").code == 1);
    CHECK(run_in(tmp.path.string(), "frobnicate x.json").code == 1);
    CHECK(run_in(tmp.path.string(), "fit").code == 1);       // manifest is required
    CHECK(run_in(tmp.path.string(), "fit m.json --bogus").code == 1);
    CHECK(run_in(tmp.path.string(), "--help").code == 0);
}

TEST_CASE("missing or malformed manifests exit 2 and name the problem")
{
    testutil::TempDir tmp;
    const auto missing = run_in(tmp.path.string(), "fit no_such_manifest.json");
    CHECK(missing.code == 2);
    CHECK(missing.err.find("no_such_manifest.json") != std::string::npos);

    testutil::write_file(tmp.file("bad.json"), "{\"deaths\": \"d.csv\", \"surprise\": 1}");
    const auto unknown = run_in(tmp.path.string(), "fit bad.json");
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("surprise") != std::string::npos);

    testutil::write_file(tmp.file("broken.json"), "{ not json");
    CHECK(run_in(tmp.path.string(), "fit broken.json").code == 2);

    // referenced input file missing: clear error naming the path
    json manifest;
    manifest["deaths"] = "deaths_missing.csv";
    manifest["mobility"] = "mobility.csv";
    manifest["population"] = "population.csv";
    manifest["ifr"] = "ifr.csv";
    testutil::write_file(tmp.file("m.json"), manifest.dump());
    const auto gone = run_in(tmp.path.string(), "fit m.json");
    CHECK(gone.code == 2);
    CHECK(gone.err.find("deaths_missing.csv") != std::string::npos);
}

TEST_CASE("validate passes the bundled demo dataset")
{
    testutil::TempDir tmp;
    const std::string manifest = std::string(EPI_DATA_DIR) + "/demo/manifest.json";
    const auto r = run_in(tmp.path.string(), "validate '" + manifest + "'");
    CHECK(r.code == 0);
    CHECK(r.out.find("all checks passed") != std::string::npos);
    CHECK(r.out.find("FAIL") == std::string::npos);
    CHECK(r.out.find("PASS  pmf normalization") != std::string::npos);
}

TEST_CASE("validate reports named failure rows")
{
    testutil::TempDir tmp;
    const std::string dir = tmp.path.string();
    write_sim_inputs(dir);

    // fabricate observed deaths: fine except for one negative count
    std::string deaths = "state,date,deaths\n";
    for (int t = 0; t < 70; ++t) {
        const std::string date = (epi::Date{2020, 3, 1} + t).to_string();
        deaths += "alpha," + date + "," + std::to_string(t == 40 ? -3 : 2) + "\n";
    }
    testutil::write_file(dir + "/bad_deaths.csv", deaths);

    json manifest;
    manifest["deaths"] = "bad_deaths.csv";
    manifest["mobility"] = "mobility.csv";
    manifest["population"] = "population.csv";
    manifest["ifr"] = "ifr.csv";
    testutil::write_file(dir + "/v.json", manifest.dump());

    const auto r = run_in(dir, "validate v.json");
    CHECK(r.code == 2);
    CHECK(r.out.find("FAIL  deaths") != std::string::npos);
    CHECK(r.out.find("negative death count") != std::string::npos);

    // a pmf horizon too short for the fit window is a named failure, not a crash
    std::string good_deaths = deaths;
    const auto pos = good_deaths.find(",-3");
    good_deaths.replace(pos, 3, ",3");
    testutil::write_file(dir + "/good_deaths.csv", good_deaths);
    manifest["deaths"] = "good_deaths.csv";
    manifest["model"] = {{"pmf_horizon", 10}};
    testutil::write_file(dir + "/v2.json", manifest.dump());

    const auto r2 = run_in(dir, "validate v2.json");
    CHECK(r2.code == 2);
    CHECK(r2.out.find("FAIL  alignment and windows") != std::string::npos);
    CHECK(r2.out.find("pmf_horizon") != std::string::npos);
}

TEST_CASE("simulate, fit, summarize round trip")
{
    testutil::TempDir tmp;
    const std::string dir = tmp.path.string();
    write_sim_inputs(dir);

    const auto sim = run_in(dir, "simulate sim_manifest.json");
    CHECK(sim.code == 0);
    REQUIRE(fs::exists(dir + "/sim/deaths.csv"));
    REQUIRE(fs::exists(dir + "/sim/ground_truth.json"));
    REQUIRE(fs::exists(dir + "/sim/fit_manifest.json"));

    const auto truth = json::parse(testutil::read_file(dir + "/sim/ground_truth.json"));
    CHECK(truth["states"]["alpha"]["r0"] == 3.0);
    CHECK(truth["states"]["beta"]["psi"] == 0.5);
    CHECK(truth["states"]["alpha"]["cumulative_infections"].get<double>() > 0.0);

    // identical seed, identical bytes; different seed, different data
    const auto sim_b = run_in(dir, "simulate sim_manifest.json --output sim_b");
    CHECK(sim_b.code == 0);
    CHECK(testutil::read_file(dir + "/sim_b/deaths.csv") ==
          testutil::read_file(dir + "/sim/deaths.csv"));
    const auto sim_c = run_in(dir, "simulate sim_manifest.json --output sim_c --seed 12");
    CHECK(sim_c.code == 0);
    CHECK(testutil::read_file(dir + "/sim_c/deaths.csv") !=
          testutil::read_file(dir + "/sim/deaths.csv"));

    // dry run: validates and prints dimensions, writes nothing
    const auto dry = run_in(dir, "fit sim/fit_manifest.json --dry-run --output dry_out");
    CHECK(dry.code == 0);
    CHECK(dry.out.find("model: 2 state(s), dim 33") != std::string::npos);
    CHECK(dry.out.find("dry run:") != std::string::npos);
    CHECK(!fs::exists(dir + "/dry_out"));

    // 60 retained draws per chain is below the diagnostics floor, so the fit
    // is flagged: exit 3 by default, exit 0 when explicitly allowed
    const auto strict = run_in(dir, "fit sim/fit_manifest.json --output fit_strict");
    CHECK(strict.code == 3);
    CHECK(fs::exists(dir + "/fit_strict/summary.csv")); // report still written

    const auto fit = run_in(dir, "fit sim/fit_manifest.json --allow-nonconverged --output fit_a");
    CHECK(fit.code == 0);
    REQUIRE(fs::exists(dir + "/fit_a/draws.csv"));
    REQUIRE(fs::exists(dir + "/fit_a/summary.csv"));
    REQUIRE(fs::exists(dir + "/fit_a/manifest.json"));
    REQUIRE(fs::exists(dir + "/fit_a/rt_alpha.csv"));

    const auto report_manifest = json::parse(testutil::read_file(dir + "/fit_a/manifest.json"));
    CHECK(report_manifest["diagnostics"]["convergence_warning"] == true);
    CHECK(report_manifest["states"].size() == 2);

    const std::string summary = testutil::read_file(dir + "/fit_a/summary.csv");
    CHECK(summary.find("state,ifr_percent,population,deaths,deaths_per_million") == 0);
    CHECK(summary.find("\nalpha,0.80,2000000,") != std::string::npos);

    // byte-identical rerun under the same seed
    const auto fit_b =
        run_in(dir, "fit sim/fit_manifest.json --allow-nonconverged --output fit_b");
    CHECK(fit_b.code == 0);
    CHECK(testutil::read_file(dir + "/fit_b/draws.csv") ==
          testutil::read_file(dir + "/fit_a/draws.csv"));

    const auto summ = run_in(dir, "summarize sim/fit_manifest.json --output fit_a");
    CHECK(summ.code == 0);
    const std::string params = testutil::read_file(dir + "/fit_a/parameters.csv");
    CHECK(params.find("name,mean,sd,q2_5,q25,median,q75,q97_5,ess,rhat") == 0);
    CHECK(params.find("r0_alpha") != std::string::npos);
    CHECK(params.find("delay_alpha") != std::string::npos);
}
