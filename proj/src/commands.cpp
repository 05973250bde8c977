#include "epi/commands.hpp"

#include "epi/csv.hpp"
#include "epi/delay.hpp"
#include "epi/hierarchy.hpp"
#include "epi/ingest.hpp"
#include "epi/report.hpp"
#include "epi/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace epi {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const GammaSpec kInfectionToOnset{5.1, 0.86};
const GammaSpec kOnsetToDeath{18.8, 0.45};
const GammaSpec kSerialInterval{6.5, 0.62};

/// Thrown for problems that map to the convergence exit code.
struct SamplingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Manifest {
    fs::path dir; // manifest location; relative paths resolve against it
    std::string deaths, mobility, population, ifr;
    std::string reporting_triangle, delay_profile;
    std::string output_dir = "out";
    std::optional<Date> as_of_date;
    PriorSpec prior;
    ChainConfig chains;
    ModelConfig model;
    Date dummy_start{2020, 6, 1};
    int max_delay = 41;
    int report_draws = 1000;
    int pmf_horizon = 0; // 0 = derive from the data window
    json true_params;
    json raw;
};

std::string resolve(const Manifest& m, const std::string& path) {
    const fs::path p(path);
    return p.is_absolute() ? p.string() : (m.dir / p).string();
}

void require_keys(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* k) { return key == k; }) == allowed.end())
            throw std::runtime_error("unknown key \"" + key + "\" in " + where);
    }
}

void read_prior(const json& obj, PriorSpec& prior) {
    require_keys(obj,
                 {"r0_mean", "k_scale", "alpha_sd", "sigma_beta_scale", "sigma_gamma_scale",
                  "seed_mean", "psi_shape1", "psi_shape2", "phi_scale", "ifr_noise_mean",
                  "ifr_noise_sd", "delay_alpha_shape", "delay_alpha_rate"},
                 "prior");
    prior.r0_mean = obj.value("r0_mean", prior.r0_mean);
    prior.k_scale = obj.value("k_scale", prior.k_scale);
    prior.alpha_sd = obj.value("alpha_sd", prior.alpha_sd);
    prior.sigma_beta_scale = obj.value("sigma_beta_scale", prior.sigma_beta_scale);
    prior.sigma_gamma_scale = obj.value("sigma_gamma_scale", prior.sigma_gamma_scale);
    prior.seed_mean = obj.value("seed_mean", prior.seed_mean);
    prior.psi_shape1 = obj.value("psi_shape1", prior.psi_shape1);
    prior.psi_shape2 = obj.value("psi_shape2", prior.psi_shape2);
    prior.phi_scale = obj.value("phi_scale", prior.phi_scale);
    prior.ifr_noise_mean = obj.value("ifr_noise_mean", prior.ifr_noise_mean);
    prior.ifr_noise_sd = obj.value("ifr_noise_sd", prior.ifr_noise_sd);
    prior.delay_alpha_shape = obj.value("delay_alpha_shape", prior.delay_alpha_shape);
    prior.delay_alpha_rate = obj.value("delay_alpha_rate", prior.delay_alpha_rate);
}

void read_chains(const json& obj, ChainConfig& cfg) {
    require_keys(obj,
                 {"n_chains", "n_warmup", "n_samples", "thin", "seed", "target_accept",
                  "max_init_tries", "parallel", "covariance_start", "chol_refresh",
                  "adapt_decay"},
                 "chains");
    cfg.n_chains = obj.value("n_chains", cfg.n_chains);
    cfg.n_warmup = obj.value("n_warmup", cfg.n_warmup);
    cfg.n_samples = obj.value("n_samples", cfg.n_samples);
    cfg.thin = obj.value("thin", cfg.thin);
    cfg.seed = obj.value("seed", cfg.seed);
    cfg.target_accept = obj.value("target_accept", cfg.target_accept);
    cfg.max_init_tries = obj.value("max_init_tries", cfg.max_init_tries);
    cfg.parallel = obj.value("parallel", cfg.parallel);
    cfg.covariance_start = obj.value("covariance_start", cfg.covariance_start);
    cfg.chol_refresh = obj.value("chol_refresh", cfg.chol_refresh);
    cfg.adapt_decay = obj.value("adapt_decay", cfg.adapt_decay);
}

Manifest load_manifest(const CliOptions& options) {
    std::ifstream in(options.manifest_path);
    if (!in) throw std::runtime_error("cannot open manifest " + options.manifest_path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw std::runtime_error(options.manifest_path + ": " + e.what());
    }
    require_keys(doc,
                 {"deaths", "mobility", "population", "ifr", "reporting_triangle",
                  "delay_profile", "as_of_date", "output_dir", "prior", "chains", "model",
                  "true_params"},
                 options.manifest_path);

    Manifest m;
    m.raw = doc;
    m.dir = fs::absolute(fs::path(options.manifest_path)).parent_path();
    m.deaths = doc.value("deaths", "");
    m.mobility = doc.value("mobility", "");
    m.population = doc.value("population", "");
    m.ifr = doc.value("ifr", "");
    m.reporting_triangle = doc.value("reporting_triangle", "");
    m.delay_profile = doc.value("delay_profile", "");
    if (!m.reporting_triangle.empty() && !m.delay_profile.empty())
        throw std::runtime_error("give either reporting_triangle or delay_profile, not both");
    m.output_dir = doc.value("output_dir", m.output_dir);
    if (doc.contains("as_of_date")) m.as_of_date = Date::parse(doc["as_of_date"]);
    if (doc.contains("prior")) read_prior(doc["prior"], m.prior);
    if (doc.contains("chains")) read_chains(doc["chains"], m.chains);
    if (doc.contains("model")) {
        const json& obj = doc["model"];
        require_keys(obj,
                     {"dispersion_form", "seed_days", "dummy_start", "max_delay",
                      "report_draws", "pmf_horizon"},
                     "model");
        const std::string form = obj.value("dispersion_form", "linear");
        if (form == "linear")
            m.model.dispersion = DispersionForm::linear;
        else if (form == "quadratic")
            m.model.dispersion = DispersionForm::quadratic;
        else
            throw std::runtime_error("dispersion_form must be linear or quadratic");
        m.model.seed_days = obj.value("seed_days", m.model.seed_days);
        if (obj.contains("dummy_start")) m.dummy_start = Date::parse(obj["dummy_start"]);
        m.max_delay = obj.value("max_delay", m.max_delay);
        m.report_draws = obj.value("report_draws", m.report_draws);
        m.pmf_horizon = obj.value("pmf_horizon", m.pmf_horizon);
    }
    if (doc.contains("true_params")) m.true_params = doc["true_params"];

    if (options.seed) m.chains.seed = *options.seed;
    if (options.chains) m.chains.n_chains = *options.chains;
    if (options.output) m.output_dir = *options.output;
    if (m.model.seed_days < 1) throw std::runtime_error("seed_days must be positive");
    if (m.report_draws < 1) throw std::runtime_error("report_draws must be positive");
    return m;
}

std::optional<DelayProfile> load_profile(const Manifest& m) {
    if (!m.reporting_triangle.empty())
        return estimate_eta(load_triangle(resolve(m, m.reporting_triangle), m.max_delay));
    if (!m.delay_profile.empty()) return load_delay_profile(resolve(m, m.delay_profile));
    return std::nullopt;
}

/// Cumulative reported proportion for each day of a series ending at or
/// before the snapshot date.
std::vector<double> factors_for_dates(const DelayProfile& profile, Date start, int n_days,
                                      Date as_of) {
    const std::vector<double> cum = profile.cumulative();
    std::vector<double> out(n_days, 1.0);
    for (int t = 0; t < n_days; ++t) {
        const int age = as_of - (start + t);
        if (age < 0)
            throw std::runtime_error("death series extends past as_of_date " + as_of.to_string());
        out[t] = cum[std::min<std::size_t>(static_cast<std::size_t>(age), cum.size() - 1)];
    }
    return out;
}

double per_state_number(const json& value, const std::string& state, const char* what) {
    if (value.is_number()) return value.get<double>();
    if (value.is_object()) {
        if (!value.contains(state))
            throw std::runtime_error(std::string(what) + " has no entry for state " + state);
        return value[state].get<double>();
    }
    throw std::runtime_error(std::string(what) + " must be a number or a per-state object");
}

std::array<double, 4> read_vec4(const json& value, const char* what) {
    if (!value.is_array() || value.size() != 4)
        throw std::runtime_error(std::string(what) + " must be an array of 4 numbers");
    std::array<double, 4> out{};
    for (int k = 0; k < 4; ++k) out[k] = value[k].get<double>();
    return out;
}

std::array<double, 4> per_state_vec4(const json& value, const std::string& state,
                                     const char* what) {
    if (value.is_null()) return {0.0, 0.0, 0.0, 0.0};
    if (value.is_array()) return read_vec4(value, what);
    if (value.is_object()) {
        if (!value.contains(state)) return {0.0, 0.0, 0.0, 0.0};
        return read_vec4(value[state], what);
    }
    throw std::runtime_error(std::string(what) + " must be an array or a per-state object");
}

/// Gamma-Poisson mixture draw of a negative binomial with the given mean.
std::int64_t negbin_draw(double mean, double phi, DispersionForm form, std::mt19937_64& rng) {
    if (mean <= 0.0) return 0;
    const double size = form == DispersionForm::linear ? mean * phi : phi;
    std::gamma_distribution<double> mix(size, mean / size);
    const double lambda = mix(rng);
    if (lambda <= 0.0) return 0;
    std::poisson_distribution<std::int64_t> pois(lambda);
    return pois(rng);
}

/// The window slice of a state plus everything needed for reporting.
struct PreparedState {
    StateModelData model; // window-relative series
    Date window_start_date;
    Date series_start;
    int full_days = 0;
    std::int64_t deaths_total = 0;
};

struct PreparedFit {
    ModelContext context;
    std::vector<PreparedState> states;
    Date as_of;
    Dataset dataset;
};

PreparedFit prepare_fit(const Manifest& m) {
    PreparedFit out;
    out.dataset = assemble_dataset(resolve(m, m.deaths), resolve(m, m.mobility),
                                   resolve(m, m.population), resolve(m, m.ifr), m.dummy_start);
    if (out.dataset.states.empty())
        throw std::runtime_error("no state reaches the 10-death threshold; nothing to fit");

    Date last_date = out.dataset.states.front().start;
    for (const auto& st : out.dataset.states) {
        const Date end = st.start + (static_cast<int>(st.deaths.size()) - 1);
        last_date = std::max(last_date, end);
    }
    out.as_of = m.as_of_date.value_or(last_date);
    if (out.as_of < last_date)
        throw std::runtime_error("as_of_date " + out.as_of.to_string() +
                                 " precedes the end of the death series " +
                                 last_date.to_string());

    const std::optional<DelayProfile> profile = load_profile(m);

    int max_window = 0;
    for (const auto& st : out.dataset.states)
        max_window = std::max(max_window,
                              static_cast<int>(st.deaths.size()) - st.window_start);
    int horizon = m.pmf_horizon > 0 ? m.pmf_horizon : max_window;
    if (horizon < max_window)
        throw std::runtime_error("pmf_horizon shorter than the longest fit window");

    try {
        out.context.serial = discretize(kSerialInterval, horizon);
        out.context.pi = convolve_infection_to_death(kInfectionToOnset, kOnsetToDeath, horizon);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("delay discretization failed (window of ") +
                                 std::to_string(horizon) + " days): " + e.what());
    }
    out.context.prior = m.prior;
    out.context.config = m.model;

    for (const auto& st : out.dataset.states) {
        const int n = static_cast<int>(st.deaths.size());
        const int w = st.window_start;
        PreparedState ps;
        ps.series_start = st.start;
        ps.window_start_date = st.start + w;
        ps.full_days = n;
        ps.deaths_total = std::accumulate(st.deaths.begin(), st.deaths.end(), std::int64_t{0});

        StateModelData sm;
        sm.name = st.name;
        sm.population = st.population;
        sm.ifr = st.ifr;
        sm.fit_start = st.fit_start - w;
        sm.observed_deaths.assign(st.deaths.begin() + w, st.deaths.end());
        for (int k = 0; k < 4; ++k) {
            sm.mobility.indicators[k].assign(st.mobility.indicators[k].begin() + w,
                                             st.mobility.indicators[k].end());
            sm.mobility.dummies[k].assign(st.mobility.dummies[k].begin() + w,
                                          st.mobility.dummies[k].end());
        }
        if (profile) {
            sm.cum_reported =
                factors_for_dates(*profile, ps.window_start_date, n - w, out.as_of);
            for (int t = sm.fit_start; t < n - w - 2; ++t)
                if (sm.cum_reported[t] <= 0.0 && sm.observed_deaths[t] > 0)
                    throw std::runtime_error(
                        "reporting profile gives zero maturity to a fitted day with deaths (" +
                        st.name + ", " + (ps.window_start_date + t).to_string() + ")");
        } else {
            sm.cum_reported.assign(n - w, 1.0);
        }
        ps.model = std::move(sm);
        out.states.push_back(std::move(ps));
    }
    for (auto& ps : out.states) out.context.states.push_back(ps.model);
    return out;
}

json run_info_json(const char* command, const Manifest& m, const Dataset& dataset) {
    json info;
    info["command"] = command;
    info["seed"] = m.chains.seed;
    info["manifest"] = m.raw;
    info["output_dir"] = m.output_dir;
    info["warnings"] = dataset.warnings;
    info["excluded_states"] = dataset.excluded;
    return info;
}

void print_warnings(const Dataset& dataset) {
    for (const auto& w : dataset.warnings) std::cout << "note: " << w << "\n";
    for (const auto& e : dataset.excluded) std::cout << "note: excluded " << e << "\n";
}

int guarded(const char* command, const std::function<int()>& body) {
    try {
        return body();
    } catch (const SamplingError& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitConvergence;
    } catch (const std::exception& e) {
        std::cerr << command << ": " << e.what() << "\n";
        return kExitData;
    }
}

} // namespace

int cmd_simulate(const CliOptions& options) {
    return guarded("simulate", [&]() {
        const Manifest m = load_manifest(options);
        if (m.mobility.empty() || m.population.empty() || m.ifr.empty())
            throw std::runtime_error("simulate needs mobility, population and ifr inputs");
        if (m.true_params.is_null())
            throw std::runtime_error("simulate needs a true_params block in the manifest");

        Warnings warnings;
        const auto mobility = load_mobility(resolve(m, m.mobility), &warnings);
        const auto population = load_population(resolve(m, m.population));
        const auto ifr = load_ifr(resolve(m, m.ifr));
        const std::optional<DelayProfile> profile = load_profile(m);

        const json& tp = m.true_params;
        require_keys(tp,
                     {"r0", "alpha", "beta", "gamma", "seed_infections", "psi", "phi",
                      "ifr_noise"},
                     "true_params");
        const std::array<double, 4> alpha =
            tp.contains("alpha") ? read_vec4(tp["alpha"], "alpha")
                                 : std::array<double, 4>{0, 0, 0, 0};
        if (!tp.contains("r0")) throw std::runtime_error("true_params.r0 is required");
        if (!tp.contains("seed_infections"))
            throw std::runtime_error("true_params.seed_infections is required");
        if (!tp.contains("psi") || !tp.contains("phi"))
            throw std::runtime_error("true_params needs psi and phi");

        std::mt19937_64 rng(m.chains.seed);
        std::vector<DeathSeries> synthetic;
        json truth_states = json::object();

        for (const auto& mob : mobility) {
            const auto pop_it = population.find(mob.state);
            if (pop_it == population.end())
                throw std::runtime_error("no population entry for state " + mob.state);
            const auto ifr_it = ifr.find(mob.state);
            if (ifr_it == ifr.end())
                throw std::runtime_error("no IFR entry for state " + mob.state);

            RtParams link;
            link.r0 = per_state_number(tp["r0"], mob.state, "r0");
            link.alpha = alpha;
            link.beta = per_state_vec4(tp.contains("beta") ? tp["beta"] : json(), mob.state,
                                       "beta");
            link.gamma = per_state_vec4(tp.contains("gamma") ? tp["gamma"] : json(), mob.state,
                                        "gamma");
            const double seed_mag =
                per_state_number(tp["seed_infections"], mob.state, "seed_infections");
            const double psi = per_state_number(tp["psi"], mob.state, "psi");
            const double phi = per_state_number(tp["phi"], mob.state, "phi");
            const double noise = tp.contains("ifr_noise")
                                     ? per_state_number(tp["ifr_noise"], mob.state, "ifr_noise")
                                     : 1.0;
            if (!(link.r0 > 0.0) || !(seed_mag > 0.0) || !(phi > 0.0) || !(psi > 0.0) ||
                !(psi < 1.0) || !(noise > 0.0))
                throw std::runtime_error("true_params out of domain for state " + mob.state);

            const int n = mob.n_days();
            const MobilityMatrix smoothed =
                smooth_mobility(mob.indicators, mob.start, m.dummy_start);
            const std::vector<double> rt = rt_series(link, smoothed);
            const int horizon = m.pmf_horizon > 0 ? m.pmf_horizon : n;
            const DiscretePmf serial = discretize(kSerialInterval, horizon);
            const DiscretePmf pi =
                convolve_infection_to_death(kInfectionToOnset, kOnsetToDeath, horizon);
            const InfectionSeries sim = simulate_state(seed_mag, m.model.seed_days, n, serial,
                                                       rt, pop_it->second);
            const DeathModelParams obs{ifr_it->second, noise, psi, phi};
            const std::vector<double> deaths = expected_deaths(sim.infections, pi, obs);
            const Date end = mob.start + (n - 1);
            const Date as_of = m.as_of_date.value_or(end);
            std::vector<double> factors(n, 1.0);
            if (profile) factors = factors_for_dates(*profile, mob.start, n, as_of);
            const std::vector<double> mean = apply_reporting_factors(deaths, psi, factors);

            DeathSeries out_series;
            out_series.state = mob.state;
            out_series.start = mob.start;
            out_series.deaths.resize(n);
            for (int t = 0; t < n; ++t)
                out_series.deaths[t] = negbin_draw(mean[t], phi, m.model.dispersion, rng);
            synthetic.push_back(std::move(out_series));

            const double cumulative =
                std::accumulate(sim.infections.begin(), sim.infections.end(), 0.0);
            truth_states[mob.state] = {
                {"r0", link.r0},
                {"seed_infections", seed_mag},
                {"psi", psi},
                {"phi", phi},
                {"ifr_noise", noise},
                {"beta", link.beta},
                {"gamma", link.gamma},
                {"population", pop_it->second},
                {"cumulative_infections", cumulative},
                {"attack_rate_percent", 100.0 * cumulative / pop_it->second},
                {"expected_deaths_total",
                 std::accumulate(deaths.begin(), deaths.end(), 0.0)},
            };
        }

        fs::create_directories(m.output_dir);
        save_deaths(m.output_dir + "/deaths.csv", synthetic);
        save_mobility(m.output_dir + "/mobility.csv", mobility);
        save_population(m.output_dir + "/population.csv", population);
        save_ifr(m.output_dir + "/ifr.csv", ifr);
        if (profile) save_delay_profile(m.output_dir + "/delay_profile.csv", *profile);

        json truth;
        truth["seed"] = m.chains.seed;
        truth["alpha"] = alpha;
        truth["states"] = truth_states;
        {
            std::ofstream out(m.output_dir + "/ground_truth.json");
            if (!out) throw std::runtime_error("cannot write ground_truth.json");
            out << truth.dump(2) << '\n';
        }

        json fit_manifest;
        fit_manifest["deaths"] = "deaths.csv";
        fit_manifest["mobility"] = "mobility.csv";
        fit_manifest["population"] = "population.csv";
        fit_manifest["ifr"] = "ifr.csv";
        if (profile) fit_manifest["delay_profile"] = "delay_profile.csv";
        if (m.as_of_date) fit_manifest["as_of_date"] = m.as_of_date->to_string();
        fit_manifest["output_dir"] = "fit";
        if (m.raw.contains("prior")) fit_manifest["prior"] = m.raw["prior"];
        if (m.raw.contains("chains")) fit_manifest["chains"] = m.raw["chains"];
        if (m.raw.contains("model")) fit_manifest["model"] = m.raw["model"];
        {
            std::ofstream out(m.output_dir + "/fit_manifest.json");
            if (!out) throw std::runtime_error("cannot write fit_manifest.json");
            out << fit_manifest.dump(2) << '\n';
        }

        for (const auto& w : warnings) std::cout << "note: " << w << "\n";
        std::cout << "simulated " << synthetic.size() << " state(s) into " << m.output_dir
                  << "\n";
        return kExitOk;
    });
}

int cmd_fit(const CliOptions& options) {
    return guarded("fit", [&]() {
        const Manifest m = load_manifest(options);
        if (m.deaths.empty() || m.mobility.empty() || m.population.empty() || m.ifr.empty())
            throw std::runtime_error("fit needs deaths, mobility, population and ifr inputs");

        PreparedFit prep = prepare_fit(m);
        print_warnings(prep.dataset);
        const ModelContext& ctx = prep.context;
        const std::size_t dim = ctx.dim();

        std::cout << "model: " << ctx.n_states() << " state(s), dim " << dim << "\n";
        for (std::size_t i = 0; i < prep.states.size(); ++i) {
            const auto& ps = prep.states[i];
            std::cout << "  " << ps.model.name << ": window "
                      << ps.window_start_date.to_string() << " +"
                      << ps.model.observed_deaths.size() << "d, fitted from day "
                      << ps.model.fit_start << "\n";
        }
        if (options.dry_run) {
            std::cout << "dry run: " << m.chains.n_chains << " chain(s) x ("
                      << m.chains.n_warmup << " warmup + " << m.chains.n_samples
                      << " samples), thin " << m.chains.thin << "\n";
            return kExitOk;
        }

        const LogDensity target = [&ctx](std::span<const double> v) {
            return ctx.log_posterior_unconstrained(v);
        };
        const InitRule init = [&ctx](std::mt19937_64& rng) {
            return unconstrain(ctx.draw_from_prior(rng));
        };

        PosteriorDraws unconstrained;
        try {
            unconstrained =
                run_chains(target, dim, init, m.chains, ctx.blocks(), ctx.names());
        } catch (const std::exception& e) {
            throw SamplingError(e.what());
        }

        // Draws are kept on the constrained scale everywhere downstream.
        PosteriorDraws draws = unconstrained;
        const int M = ctx.n_states();
        for (int c = 0; c < draws.n_chains; ++c)
            for (int i = 0; i < draws.n_samples; ++i) {
                std::span<double> row(
                    draws.data.data() +
                        (static_cast<std::size_t>(c) * draws.n_samples + i) * dim,
                    dim);
                const std::vector<double> values = flatten(constrain(row, M));
                std::copy(values.begin(), values.end(), row.begin());
            }

        FitReport report;
        bool have_diag = draws.n_chains >= 2 && draws.n_samples >= 100;
        Diagnostics diag;
        if (have_diag) {
            diag = diagnose(draws);
        }

        // Latent bands from an evenly spaced subsample of draws.
        const int total = draws.n_chains * draws.n_samples;
        const int keep = std::min(total, m.report_draws);
        std::vector<StateReportInputs> inputs(prep.states.size());
        for (std::size_t s = 0; s < prep.states.size(); ++s) {
            const auto& ps = prep.states[s];
            inputs[s].name = ps.model.name;
            inputs[s].start = ps.window_start_date;
            inputs[s].population = ps.model.population;
            inputs[s].ifr = ps.model.ifr;
            inputs[s].deaths_total = ps.deaths_total;
            const int window_days = static_cast<int>(ps.model.observed_deaths.size());
            const int series_end_day =
                (ps.series_start + (ps.full_days - 1)) - ps.window_start_date;
            inputs[s].as_of_day = std::min(window_days - 1, series_end_day);
        }
        for (int j = 0; j < keep; ++j) {
            const int flat_index = static_cast<int>(
                static_cast<long long>(j) * total / keep);
            const int c = flat_index / draws.n_samples;
            const int i = flat_index % draws.n_samples;
            std::vector<double> row(dim);
            for (std::size_t p = 0; p < dim; ++p) row[p] = draws.at(c, i, static_cast<int>(p));
            const ParamVector theta = unflatten(row, M);
            for (int s = 0; s < M; ++s) {
                StateLatents lat = ctx.state_latents(theta, s);
                inputs[s].infections.push_back(std::move(lat.infections));
                inputs[s].rt.push_back(std::move(lat.rt));
                inputs[s].expected_deaths.push_back(std::move(lat.expected_deaths));
            }
        }

        report = build_report(inputs);
        if (have_diag) attach_diagnostics(report, diag);
        else {
            report.convergence_warning = true;
            report.flagged_parameters = {"(too few draws for diagnostics)"};
        }

        fs::create_directories(m.output_dir);
        write_draws_csv(draws, m.output_dir + "/draws.csv");
        write_report(report, run_info_json("fit", m, prep.dataset), m.output_dir);

        if (have_diag)
            std::cout << "diagnostics: max R-hat " << report.rhat_max << ", min ESS "
                      << report.ess_min << (report.convergence_warning ? " [NOT CONVERGED]"
                                                                        : " [ok]")
                      << "\n";
        std::cout << "report written to " << m.output_dir << "\n";
        if (report.convergence_warning && !options.allow_nonconverged) {
            std::cerr << "fit: convergence diagnostics failed (see manifest.json)\n";
            return kExitConvergence;
        }
        return kExitOk;
    });
}

int cmd_summarize(const CliOptions& options) {
    return guarded("summarize", [&]() {
        const Manifest m = load_manifest(options);
        const std::string path = m.output_dir + "/draws.csv";
        const CsvTable table = read_csv(path);
        if (table.header.size() < 3 || table.header[0] != "chain" ||
            table.header[1] != "iteration")
            throw std::runtime_error(path + ": not a draws file");

        PosteriorDraws draws;
        draws.names.assign(table.header.begin() + 2, table.header.end());
        int max_chain = -1;
        for (const auto& row : table.rows)
            max_chain = std::max(max_chain, static_cast<int>(parse_int(row[0], path)));
        draws.n_chains = max_chain + 1;
        if (draws.n_chains < 1 || table.rows.empty())
            throw std::runtime_error(path + ": no draws");
        if (table.rows.size() % draws.n_chains != 0)
            throw std::runtime_error(path + ": chains have unequal lengths");
        draws.n_samples = static_cast<int>(table.rows.size()) / draws.n_chains;
        draws.data.resize(table.rows.size() * draws.names.size());
        std::vector<int> counter(draws.n_chains, 0);
        for (const auto& row : table.rows) {
            const int c = static_cast<int>(parse_int(row[0], path));
            const int i = counter[c]++;
            if (i >= draws.n_samples)
                throw std::runtime_error(path + ": chains have unequal lengths");
            for (std::size_t p = 0; p < draws.names.size(); ++p)
                draws.data[(static_cast<std::size_t>(c) * draws.n_samples + i) *
                               draws.names.size() +
                           p] = parse_double(row[2 + p], path);
        }

        const auto rows = summarize(draws);
        std::ofstream out(m.output_dir + "/parameters.csv");
        if (!out) throw std::runtime_error("cannot write parameters.csv");
        out << "name,mean,sd,q2_5,q25,median,q75,q97_5,ess,rhat\n";
        std::printf("%-24s %10s %10s %10s %10s %8s %8s\n", "parameter", "mean", "sd", "q2.5",
                    "q97.5", "ess", "rhat");
        for (const auto& r : rows) {
            out << r.name << ',' << format_double(r.mean) << ',' << format_double(r.sd) << ','
                << format_double(r.q2_5) << ',' << format_double(r.q25) << ','
                << format_double(r.median) << ',' << format_double(r.q75) << ','
                << format_double(r.q97_5) << ',' << format_double(r.ess) << ','
                << format_double(r.rhat) << '\n';
            std::printf("%-24s %10.4g %10.4g %10.4g %10.4g %8.1f %8.3f\n", r.name.c_str(),
                        r.mean, r.sd, r.q2_5, r.q97_5, r.ess, r.rhat);
        }
        return kExitOk;
    });
}

int cmd_validate(const CliOptions& options) {
    int failures = 0;
    auto check = [&](const std::string& name, const std::function<std::string()>& body) {
        try {
            const std::string detail = body();
            std::cout << "PASS  " << name << (detail.empty() ? "" : ": " + detail) << "\n";
        } catch (const std::exception& e) {
            std::cout << "FAIL  " << name << ": " << e.what() << "\n";
            ++failures;
        }
    };

    Manifest m;
    try {
        m = load_manifest(options);
    } catch (const std::exception& e) {
        std::cout << "FAIL  manifest: " << e.what() << "\n";
        return kExitData;
    }
    std::cout << "PASS  manifest: " << options.manifest_path << "\n";

    check("deaths", [&]() {
        Warnings w;
        const auto d = load_deaths(resolve(m, m.deaths), &w);
        return std::to_string(d.size()) + " state(s), " + std::to_string(w.size()) +
               " warning(s)";
    });
    check("mobility", [&]() {
        Warnings w;
        const auto mm = load_mobility(resolve(m, m.mobility), &w);
        return std::to_string(mm.size()) + " state(s), " + std::to_string(w.size()) +
               " warning(s)";
    });
    check("population", [&]() {
        return std::to_string(load_population(resolve(m, m.population)).size()) + " state(s)";
    });
    check("ifr", [&]() {
        return std::to_string(load_ifr(resolve(m, m.ifr)).size()) + " state(s)";
    });
    if (!m.reporting_triangle.empty() || !m.delay_profile.empty())
        check("delay profile", [&]() {
            const auto profile = load_profile(m);
            const auto cum = profile->cumulative();
            if (std::abs(cum.back() - 1.0) > 1e-6)
                throw std::runtime_error("proportions do not sum to 1");
            return std::to_string(profile->eta.size()) + " delay cells";
        });

    PreparedFit prep;
    bool prepared = false;
    check("alignment and windows", [&]() {
        prep = prepare_fit(m);
        prepared = true;
        std::string detail = std::to_string(prep.states.size()) + " fittable state(s)";
        if (!prep.dataset.excluded.empty())
            detail += ", " + std::to_string(prep.dataset.excluded.size()) + " excluded";
        return detail;
    });
    if (prepared) {
        check("pmf normalization", [&]() {
            const double sg = std::accumulate(prep.context.serial.mass.begin(),
                                              prep.context.serial.mass.end(), 0.0);
            const double sp = std::accumulate(prep.context.pi.mass.begin(),
                                              prep.context.pi.mass.end(), 0.0);
            if (std::abs(sg - 1.0) > 1e-9 || std::abs(sp - 1.0) > 1e-9)
                throw std::runtime_error("pmf sums deviate from 1");
            char buf[96];
            std::snprintf(buf, sizeof(buf), "horizon %d, mean delay %.1f days",
                          prep.context.pi.horizon(), prep.context.pi.mean_day());
            return std::string(buf);
        });
        check("prior predictive", [&]() {
            std::mt19937_64 rng(1);
            for (int rep = 0; rep < 5; ++rep) {
                const ParamVector theta = prep.context.draw_from_prior(rng);
                if (!std::isfinite(log_prior(theta, prep.context.prior)))
                    throw std::runtime_error("prior draw out of domain");
                for (int s = 0; s < prep.context.n_states(); ++s) {
                    const StateLatents lat = prep.context.state_latents(theta, s);
                    for (double v : lat.expected_observed)
                        if (!std::isfinite(v))
                            throw std::runtime_error("non-finite expected deaths for state " +
                                                     prep.context.states[s].name);
                }
            }
            return std::string("5 prior draws, all expected-death series finite");
        });
    }

    std::cout << (failures == 0 ? "all checks passed" : std::to_string(failures) + " check(s) failed")
              << "\n";
    return failures == 0 ? kExitOk : kExitData;
}

} // namespace epi
