#include "epi/hierarchy.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace epi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Flat layout offsets; every field's position is a function of M only.
struct Layout {
    int M;

    int r0() const { return 0; }
    int k() const { return M; }
    int alpha() const { return M + 1; }
    int sigma_beta() const { return M + 5; }
    int sigma_gamma() const { return M + 6; }
    int beta() const { return M + 7; }              // state-major, 4 per state
    int gamma() const { return M + 7 + 4 * M; }
    int seed() const { return M + 7 + 8 * M; }
    int psi() const { return seed() + M; }
    int phi() const { return psi() + M; }
    int ifr_noise() const { return phi() + 1; }
    int delay_alpha() const { return ifr_noise() + M; }
    std::size_t dim() const { return static_cast<std::size_t>(delay_alpha()) + 1; }
};

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double to_log(double x, const char* what) {
    if (!(x > 0.0) || !std::isfinite(x))
        throw std::domain_error(std::string(what) + " must be positive to unconstrain");
    return std::log(x);
}

double to_logit(double x, const char* what) {
    if (!(x > 0.0) || !(x < 1.0))
        throw std::domain_error(std::string(what) + " must lie strictly in (0, 1)");
    return std::log(x / (1.0 - x));
}

double require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw std::domain_error(std::string(what) + " must be finite");
    return x;
}

double normal_lpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * std::log(2.0 * std::numbers::pi) - std::log(sd) - 0.5 * z * z;
}

/// Density of |N(0, scale)| on x >= 0.
double half_normal_lpdf(double x, double scale) {
    const double z = x / scale;
    return 0.5 * std::log(2.0 / std::numbers::pi) - std::log(scale) - 0.5 * z * z;
}

double beta_lpdf(double x, double a, double b) {
    return std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + (a - 1.0) * std::log(x) +
           (b - 1.0) * std::log1p(-x);
}

double exponential_lpdf(double x, double mean) { return -std::log(mean) - x / mean; }

double gamma_lpdf(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

} // namespace

ParamVector ParamVector::zeros(int n_states) {
    ParamVector theta;
    theta.r0.assign(n_states, 1.0);
    theta.k_scale = 0.5;
    theta.alpha = {0.0, 0.0, 0.0, 0.0};
    theta.sigma_beta = 0.1;
    theta.sigma_gamma = 0.1;
    theta.beta.assign(n_states, {0.0, 0.0, 0.0, 0.0});
    theta.gamma.assign(n_states, {0.0, 0.0, 0.0, 0.0});
    theta.seed.assign(n_states, 1.0);
    theta.psi.assign(n_states, 0.5);
    theta.phi = 1.0;
    theta.ifr_noise.assign(n_states, 1.0);
    theta.delay_alpha = 100.0;
    return theta;
}

std::size_t param_dim(int n_states) { return Layout{n_states}.dim(); }

std::vector<std::string> param_names(const std::vector<std::string>& state_names) {
    const int M = static_cast<int>(state_names.size());
    std::vector<std::string> names(param_dim(M));
    const Layout lay{M};
    for (int m = 0; m < M; ++m) names[lay.r0() + m] = "r0_" + state_names[m];
    names[lay.k()] = "k";
    for (int k = 0; k < 4; ++k) names[lay.alpha() + k] = "alpha" + std::to_string(k + 1);
    names[lay.sigma_beta()] = "sigma_beta";
    names[lay.sigma_gamma()] = "sigma_gamma";
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < 4; ++k)
            names[lay.beta() + 4 * m + k] = "beta" + std::to_string(k + 1) + "_" + state_names[m];
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < 4; ++k)
            names[lay.gamma() + 4 * m + k] = "gamma" + std::to_string(k + 1) + "_" + state_names[m];
    for (int m = 0; m < M; ++m) names[lay.seed() + m] = "seed_" + state_names[m];
    for (int m = 0; m < M; ++m) names[lay.psi() + m] = "psi_" + state_names[m];
    names[lay.phi()] = "phi";
    for (int m = 0; m < M; ++m) names[lay.ifr_noise() + m] = "ifr_noise_" + state_names[m];
    names[lay.delay_alpha()] = "delay_alpha";
    return names;
}

std::vector<double> flatten(const ParamVector& theta) {
    const int M = theta.n_states();
    const Layout lay{M};
    std::vector<double> v(lay.dim());
    for (int m = 0; m < M; ++m) v[lay.r0() + m] = theta.r0[m];
    v[lay.k()] = theta.k_scale;
    for (int k = 0; k < 4; ++k) v[lay.alpha() + k] = theta.alpha[k];
    v[lay.sigma_beta()] = theta.sigma_beta;
    v[lay.sigma_gamma()] = theta.sigma_gamma;
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < 4; ++k) {
            v[lay.beta() + 4 * m + k] = theta.beta[m][k];
            v[lay.gamma() + 4 * m + k] = theta.gamma[m][k];
        }
    for (int m = 0; m < M; ++m) v[lay.seed() + m] = theta.seed[m];
    for (int m = 0; m < M; ++m) v[lay.psi() + m] = theta.psi[m];
    v[lay.phi()] = theta.phi;
    for (int m = 0; m < M; ++m) v[lay.ifr_noise() + m] = theta.ifr_noise[m];
    v[lay.delay_alpha()] = theta.delay_alpha;
    return v;
}

ParamVector unflatten(std::span<const double> values, int n_states) {
    const Layout lay{n_states};
    if (values.size() != lay.dim())
        throw std::invalid_argument("flat parameter vector has the wrong dimension");
    ParamVector theta = ParamVector::zeros(n_states);
    for (int m = 0; m < n_states; ++m) theta.r0[m] = values[lay.r0() + m];
    theta.k_scale = values[lay.k()];
    for (int k = 0; k < 4; ++k) theta.alpha[k] = values[lay.alpha() + k];
    theta.sigma_beta = values[lay.sigma_beta()];
    theta.sigma_gamma = values[lay.sigma_gamma()];
    for (int m = 0; m < n_states; ++m)
        for (int k = 0; k < 4; ++k) {
            theta.beta[m][k] = values[lay.beta() + 4 * m + k];
            theta.gamma[m][k] = values[lay.gamma() + 4 * m + k];
        }
    for (int m = 0; m < n_states; ++m) theta.seed[m] = values[lay.seed() + m];
    for (int m = 0; m < n_states; ++m) theta.psi[m] = values[lay.psi() + m];
    theta.phi = values[lay.phi()];
    for (int m = 0; m < n_states; ++m) theta.ifr_noise[m] = values[lay.ifr_noise() + m];
    theta.delay_alpha = values[lay.delay_alpha()];
    return theta;
}

std::vector<double> unconstrain(const ParamVector& theta) {
    const int M = theta.n_states();
    if (static_cast<int>(theta.beta.size()) != M || static_cast<int>(theta.gamma.size()) != M ||
        static_cast<int>(theta.seed.size()) != M || static_cast<int>(theta.psi.size()) != M ||
        static_cast<int>(theta.ifr_noise.size()) != M)
        throw std::invalid_argument("per-state parameter vectors disagree on the state count");
    const Layout lay{M};
    std::vector<double> v(lay.dim());
    for (int m = 0; m < M; ++m) v[lay.r0() + m] = to_log(theta.r0[m], "r0");
    v[lay.k()] = to_log(theta.k_scale, "k");
    for (int k = 0; k < 4; ++k) v[lay.alpha() + k] = require_finite(theta.alpha[k], "alpha");
    v[lay.sigma_beta()] = to_log(theta.sigma_beta, "sigma_beta");
    v[lay.sigma_gamma()] = to_log(theta.sigma_gamma, "sigma_gamma");
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < 4; ++k) {
            v[lay.beta() + 4 * m + k] = require_finite(theta.beta[m][k], "beta");
            v[lay.gamma() + 4 * m + k] = require_finite(theta.gamma[m][k], "gamma");
        }
    for (int m = 0; m < M; ++m) v[lay.seed() + m] = to_log(theta.seed[m], "seed");
    for (int m = 0; m < M; ++m) v[lay.psi() + m] = to_logit(theta.psi[m], "psi");
    v[lay.phi()] = to_log(theta.phi, "phi");
    for (int m = 0; m < M; ++m) v[lay.ifr_noise() + m] = to_log(theta.ifr_noise[m], "ifr_noise");
    v[lay.delay_alpha()] = to_log(theta.delay_alpha, "delay_alpha");
    return v;
}

ParamVector constrain(std::span<const double> v, int n_states) {
    const Layout lay{n_states};
    if (v.size() != lay.dim())
        throw std::invalid_argument("flat parameter vector has the wrong dimension");
    ParamVector theta = ParamVector::zeros(n_states);
    for (int m = 0; m < n_states; ++m) theta.r0[m] = std::exp(v[lay.r0() + m]);
    theta.k_scale = std::exp(v[lay.k()]);
    for (int k = 0; k < 4; ++k) theta.alpha[k] = v[lay.alpha() + k];
    theta.sigma_beta = std::exp(v[lay.sigma_beta()]);
    theta.sigma_gamma = std::exp(v[lay.sigma_gamma()]);
    for (int m = 0; m < n_states; ++m)
        for (int k = 0; k < 4; ++k) {
            theta.beta[m][k] = v[lay.beta() + 4 * m + k];
            theta.gamma[m][k] = v[lay.gamma() + 4 * m + k];
        }
    for (int m = 0; m < n_states; ++m) theta.seed[m] = std::exp(v[lay.seed() + m]);
    for (int m = 0; m < n_states; ++m) theta.psi[m] = logistic(v[lay.psi() + m]);
    theta.phi = std::exp(v[lay.phi()]);
    for (int m = 0; m < n_states; ++m) theta.ifr_noise[m] = std::exp(v[lay.ifr_noise() + m]);
    theta.delay_alpha = std::exp(v[lay.delay_alpha()]);
    return theta;
}

double log_jacobian(std::span<const double> v, int n_states) {
    const Layout lay{n_states};
    if (v.size() != lay.dim())
        throw std::invalid_argument("flat parameter vector has the wrong dimension");
    double sum = 0.0;
    auto add_log = [&](int idx) { sum += v[idx]; };
    auto add_logit = [&](int idx) { sum += -softplus(v[idx]) - softplus(-v[idx]); };
    for (int m = 0; m < n_states; ++m) add_log(lay.r0() + m);
    add_log(lay.k());
    add_log(lay.sigma_beta());
    add_log(lay.sigma_gamma());
    for (int m = 0; m < n_states; ++m) add_log(lay.seed() + m);
    for (int m = 0; m < n_states; ++m) add_logit(lay.psi() + m);
    add_log(lay.phi());
    for (int m = 0; m < n_states; ++m) add_log(lay.ifr_noise() + m);
    add_log(lay.delay_alpha());
    return sum;
}

double log_prior(const ParamVector& theta, const PriorSpec& spec) {
    const int M = theta.n_states();
    auto in_domain = [&]() {
        if (!(theta.k_scale > 0.0) || !(theta.sigma_beta > 0.0) || !(theta.sigma_gamma > 0.0) ||
            !(theta.phi > 0.0) || !(theta.delay_alpha > 0.0))
            return false;
        for (int m = 0; m < M; ++m) {
            if (!(theta.r0[m] > 0.0) || !(theta.seed[m] > 0.0) || !(theta.ifr_noise[m] > 0.0))
                return false;
            if (!(theta.psi[m] > 0.0) || !(theta.psi[m] < 1.0)) return false;
            for (int k = 0; k < 4; ++k)
                if (!std::isfinite(theta.beta[m][k]) || !std::isfinite(theta.gamma[m][k]))
                    return false;
        }
        for (int k = 0; k < 4; ++k)
            if (!std::isfinite(theta.alpha[k])) return false;
        return std::isfinite(theta.k_scale) && std::isfinite(theta.sigma_beta) &&
               std::isfinite(theta.sigma_gamma) && std::isfinite(theta.phi) &&
               std::isfinite(theta.delay_alpha);
    };
    if (!in_domain()) return kNegInf;

    double lp = 0.0;
    lp += half_normal_lpdf(theta.k_scale, spec.k_scale);
    for (int m = 0; m < M; ++m) lp += normal_lpdf(theta.r0[m], spec.r0_mean, theta.k_scale);
    for (int k = 0; k < 4; ++k) lp += normal_lpdf(theta.alpha[k], 0.0, spec.alpha_sd);
    lp += half_normal_lpdf(theta.sigma_beta, spec.sigma_beta_scale);
    lp += half_normal_lpdf(theta.sigma_gamma, spec.sigma_gamma_scale);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < 4; ++k) {
            lp += normal_lpdf(theta.beta[m][k], 0.0, theta.sigma_beta);
            lp += normal_lpdf(theta.gamma[m][k], 0.0, theta.sigma_gamma);
        }
    for (int m = 0; m < M; ++m) lp += exponential_lpdf(theta.seed[m], spec.seed_mean);
    for (int m = 0; m < M; ++m) lp += beta_lpdf(theta.psi[m], spec.psi_shape1, spec.psi_shape2);
    lp += half_normal_lpdf(theta.phi, spec.phi_scale);
    for (int m = 0; m < M; ++m)
        lp += normal_lpdf(theta.ifr_noise[m], spec.ifr_noise_mean, spec.ifr_noise_sd);
    lp += gamma_lpdf(theta.delay_alpha, spec.delay_alpha_shape, spec.delay_alpha_rate);
    return lp;
}

std::vector<std::string> ModelContext::names() const {
    std::vector<std::string> state_names;
    state_names.reserve(states.size());
    for (const auto& st : states) state_names.push_back(st.name);
    return param_names(state_names);
}

StateLatents ModelContext::state_latents(const ParamVector& theta, int m) const {
    const StateModelData& st = states.at(m);
    RtParams link{theta.r0[m], theta.alpha, theta.beta[m], theta.gamma[m]};
    StateLatents out;
    out.rt = rt_series(link, st.mobility);
    InfectionSeries sim = simulate_state(theta.seed[m], config.seed_days, st.mobility.n_days(),
                                         serial, out.rt, st.population);
    out.infections = std::move(sim.infections);
    DeathModelParams obs{st.ifr, theta.ifr_noise[m], theta.psi[m], theta.phi};
    out.expected_deaths = expected_deaths(out.infections, pi, obs);
    out.expected_observed =
        apply_reporting_factors(out.expected_deaths, theta.psi[m], st.cum_reported);
    return out;
}

double ModelContext::state_loglik(const ParamVector& theta, int m) const {
    const StateModelData& st = states.at(m);
    const StateLatents lat = state_latents(theta, m);
    return state_loglikelihood(st.observed_deaths, lat.expected_observed, theta.phi, st.fit_start,
                               config.dispersion);
}

double ModelContext::log_posterior(const ParamVector& theta) const {
    if (theta.n_states() != n_states())
        throw std::invalid_argument("parameter vector and context disagree on the state count");
    double lp = log_prior(theta, prior);
    if (!std::isfinite(lp)) return kNegInf;
    for (int m = 0; m < n_states(); ++m) {
        lp += state_loglik(theta, m);
        if (!std::isfinite(lp)) return kNegInf;
    }
    return lp;
}

double ModelContext::log_posterior_unconstrained(std::span<const double> v) const {
    for (double x : v)
        if (std::isnan(x)) return kNegInf;
    const ParamVector theta = constrain(v, n_states());
    const double lp = log_posterior(theta);
    if (!std::isfinite(lp)) return kNegInf;
    return lp + log_jacobian(v, n_states());
}

std::vector<std::vector<int>> ModelContext::blocks() const {
    const int M = n_states();
    const Layout lay{M};
    std::vector<std::vector<int>> out;
    std::vector<int> global{lay.k()};
    for (int k = 0; k < 4; ++k) global.push_back(lay.alpha() + k);
    global.push_back(lay.sigma_beta());
    global.push_back(lay.sigma_gamma());
    global.push_back(lay.phi());
    global.push_back(lay.delay_alpha());
    out.push_back(std::move(global));
    for (int m = 0; m < M; ++m) {
        std::vector<int> block{lay.r0() + m};
        for (int k = 0; k < 4; ++k) block.push_back(lay.beta() + 4 * m + k);
        for (int k = 0; k < 4; ++k) block.push_back(lay.gamma() + 4 * m + k);
        block.push_back(lay.seed() + m);
        block.push_back(lay.psi() + m);
        block.push_back(lay.ifr_noise() + m);
        out.push_back(std::move(block));
    }
    return out;
}

ParamVector ModelContext::draw_from_prior(std::mt19937_64& rng) const {
    const int M = n_states();
    ParamVector theta = ParamVector::zeros(M);
    std::normal_distribution<double> unit(0.0, 1.0);
    auto truncated_positive = [&](double mean, double sd) {
        for (;;) {
            const double x = mean + sd * unit(rng);
            if (x > 0.0) return x;
        }
    };
    auto half_normal = [&](double scale) {
        for (;;) {
            const double x = std::abs(unit(rng)) * scale;
            if (x > 0.0) return x;
        }
    };
    theta.k_scale = half_normal(prior.k_scale);
    for (int m = 0; m < M; ++m) theta.r0[m] = truncated_positive(prior.r0_mean, theta.k_scale);
    for (int k = 0; k < 4; ++k) theta.alpha[k] = prior.alpha_sd * unit(rng);
    theta.sigma_beta = half_normal(prior.sigma_beta_scale);
    theta.sigma_gamma = half_normal(prior.sigma_gamma_scale);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < 4; ++k) theta.beta[m][k] = theta.sigma_beta * unit(rng);
    for (int m = 0; m < M; ++m)
        for (int k = 0; k < 4; ++k) theta.gamma[m][k] = theta.sigma_gamma * unit(rng);
    std::exponential_distribution<double> seed_dist(1.0 / prior.seed_mean);
    for (int m = 0; m < M; ++m) theta.seed[m] = seed_dist(rng);
    std::gamma_distribution<double> ga(prior.psi_shape1, 1.0), gb(prior.psi_shape2, 1.0);
    for (int m = 0; m < M; ++m) {
        const double a = ga(rng), b = gb(rng);
        theta.psi[m] = a / (a + b);
    }
    theta.phi = half_normal(prior.phi_scale);
    for (int m = 0; m < M; ++m)
        theta.ifr_noise[m] = truncated_positive(prior.ifr_noise_mean, prior.ifr_noise_sd);
    std::gamma_distribution<double> da(prior.delay_alpha_shape, 1.0 / prior.delay_alpha_rate);
    theta.delay_alpha = da(rng);
    return theta;
}

} // namespace epi
