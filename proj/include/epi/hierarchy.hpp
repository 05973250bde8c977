#pragma once

#include "epi/delay.hpp"
#include "epi/observation.hpp"
#include "epi/renewal.hpp"

#include <array>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace epi {

/// Hyperparameters of every prior in the hierarchy. Defaults are the model's
/// published choices where stated and weakly-informative ones elsewhere.
struct PriorSpec {
    double r0_mean = 3.28;        // R_{0,m} ~ N(3.28, k)
    double k_scale = 0.5;         // k ~ N+(0, 0.5)
    double alpha_sd = 0.5;        // alpha_k ~ N(0, 0.5)
    double sigma_beta_scale = 0.5;  // sigma_beta ~ N+(0, 0.5); beta ~ N(0, sigma_beta)
    double sigma_gamma_scale = 0.5; // sigma_gamma ~ N+(0, 0.5); gamma ~ N(0, sigma_gamma)
    double seed_mean = 30.0;      // seeded infections/day ~ Exponential(mean 30)
    double psi_shape1 = 80.0;     // psi_m ~ Beta(80, 80), mode 0.5
    double psi_shape2 = 80.0;
    double phi_scale = 5.0;       // phi ~ N+(0, 5)
    double ifr_noise_mean = 1.0;  // IFR multiplier ~ N(1, 0.1)
    double ifr_noise_sd = 0.1;
    double delay_alpha_shape = 100.0; // Dirichlet concentration ~ Gamma(100, 1)
    double delay_alpha_rate = 1.0;
};

/// The full hierarchical parameter set in constrained space.
struct ParamVector {
    std::vector<double> r0;                     // per state, > 0
    double k_scale = 0.5;                       // > 0
    std::array<double, 4> alpha{};              // shared covariate effects
    double sigma_beta = 0.1;                    // > 0
    double sigma_gamma = 0.1;                   // > 0
    std::vector<std::array<double, 4>> beta;    // per state
    std::vector<std::array<double, 4>> gamma;   // per state
    std::vector<double> seed;                   // per state, > 0
    std::vector<double> psi;                    // per state, in (0, 1)
    double phi = 1.0;                           // > 0
    std::vector<double> ifr_noise;              // per state, > 0
    double delay_alpha = 100.0;                 // > 0

    int n_states() const { return static_cast<int>(r0.size()); }

    static ParamVector zeros(int n_states);
};

/// Flat-vector layout: r0[M], k, alpha[4], sigma_beta, sigma_gamma,
/// beta[M][4], gamma[M][4], seed[M], psi[M], phi, ifr_noise[M], delay_alpha.
std::size_t param_dim(int n_states);
std::vector<std::string> param_names(const std::vector<std::string>& state_names);

/// Constrained values in the flat layout (no transform), and back.
std::vector<double> flatten(const ParamVector& theta);
ParamVector unflatten(std::span<const double> values, int n_states);

/// Map to the unconstrained space: log for positives, logit for (0,1),
/// identity for reals. Throws on boundary or out-of-domain values.
std::vector<double> unconstrain(const ParamVector& theta);
ParamVector constrain(std::span<const double> v, int n_states);

/// log |d constrained / d unconstrained| at the unconstrained point.
double log_jacobian(std::span<const double> v, int n_states);

/// Joint log prior density in constrained space; -inf out of domain.
double log_prior(const ParamVector& theta, const PriorSpec& spec);

/// One state's data, windowed and aligned for likelihood evaluation.
struct StateModelData {
    std::string name;
    double population = 0.0;
    std::vector<std::int64_t> observed_deaths; // one entry per modelled day
    MobilityMatrix mobility;                   // same day grid, smoothed
    double ifr = 0.0;
    int fit_start = 0;                         // first fitted day (0-based)
    std::vector<double> cum_reported;          // P_t per modelled day
};

struct ModelConfig {
    DispersionForm dispersion = DispersionForm::linear;
    int seed_days = 6;
};

/// Latent series implied by one parameter draw for one state.
struct StateLatents {
    std::vector<double> infections;
    std::vector<double> rt;
    std::vector<double> expected_deaths;      // before reporting factors
    std::vector<double> expected_observed;    // psi * P_t * d_t
};

/// Read-only bundle of everything the posterior needs. Evaluation is pure
/// and deterministic; chains may share one context concurrently.
struct ModelContext {
    std::vector<StateModelData> states;
    DiscretePmf pi;     // infection-to-death delay
    DiscretePmf serial; // serial interval
    PriorSpec prior;
    ModelConfig config;

    int n_states() const { return static_cast<int>(states.size()); }
    std::size_t dim() const { return param_dim(n_states()); }
    std::vector<std::string> names() const;

    StateLatents state_latents(const ParamVector& theta, int m) const;
    double state_loglik(const ParamVector& theta, int m) const;
    double log_posterior(const ParamVector& theta) const;
    /// log_posterior(constrain(v)) plus the transform Jacobian.
    double log_posterior_unconstrained(std::span<const double> v) const;

    /// Sampler blocks: one global block plus one block per state.
    std::vector<std::vector<int>> blocks() const;

    ParamVector draw_from_prior(std::mt19937_64& rng) const;
};

} // namespace epi
