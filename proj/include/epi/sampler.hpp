#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace epi {

/// Log target density over a flat coordinate vector. Must be reentrant:
/// chains evaluate it concurrently with no shared mutable state.
using LogDensity = std::function<double(std::span<const double>)>;

/// Produces one candidate starting point per call (one rule, many tries).
using InitRule = std::function<std::vector<double>(std::mt19937_64&)>;

struct ChainConfig {
    int n_chains = 4;
    int n_warmup = 1000;
    int n_samples = 1000;
    int thin = 1;              // sweeps between retained draws
    std::uint64_t seed = 1;
    double target_accept = 0.234;
    int max_init_tries = 100;
    bool parallel = true;
    int covariance_start = 200; // warmup sweeps before the empirical covariance kicks in
    int chol_refresh = 100;     // sweeps between proposal re-factorizations
    double adapt_decay = 0.7;   // Robbins-Monro step exponent
};

/// Retained draws, chain-major: data[(c * n_samples + i) * dim + p].
struct PosteriorDraws {
    std::vector<std::string> names;
    int n_chains = 0;
    int n_samples = 0;
    std::vector<double> data;
    std::vector<double> accept_rate; // per chain, post-warmup proposals

    int dim() const { return static_cast<int>(names.size()); }
    double at(int chain, int iter, int param) const {
        return data[(static_cast<std::size_t>(chain) * n_samples + iter) * names.size() + param];
    }
    /// All chains pooled, iteration-major within chain.
    std::vector<double> column(int param) const;
    std::vector<double> chain_column(int chain, int param) const;
};

/// Blocked adaptive random-walk Metropolis. Empty `blocks` means one block
/// over all coordinates. Proposal scale follows a Robbins-Monro recursion
/// toward cfg.target_accept; the proposal covariance adapts during warmup
/// (diagonal first, then the empirical block covariance) and is frozen after.
/// Reproducible: a fixed seed gives bit-identical draws, threaded or not.
PosteriorDraws run_chains(const LogDensity& target, std::size_t dim, const InitRule& init,
                          const ChainConfig& cfg, std::vector<std::vector<int>> blocks = {},
                          std::vector<std::string> names = {});

/// Split-half R-hat over chains of equal length. Constant identical chains
/// give 1; constant but different chains give +inf.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Effective sample size via Geyer's initial monotone positive sequence on
/// split chains. Constant chains report the nominal draw count.
double effective_sample_size(const std::vector<std::vector<double>>& chains);

struct Diagnostics {
    std::vector<double> rhat;        // per parameter
    std::vector<double> ess;         // per parameter
    std::vector<double> accept_rate; // per chain, post-warmup
    std::vector<std::string> flagged;
    bool converged = true;
};

/// Requires >= 2 chains and >= 100 draws per chain.
Diagnostics diagnose(const PosteriorDraws& draws, double rhat_threshold = 1.05);

/// Type-7 (linear interpolation) quantile; copies and sorts.
double quantile(std::span<const double> values, double p);

struct SummaryRow {
    std::string name;
    double mean = 0, sd = 0;
    double q2_5 = 0, q25 = 0, median = 0, q75 = 0, q97_5 = 0;
    double ess = 0, rhat = 0;
};

/// Pooled-chain summaries with diagnostics attached.
std::vector<SummaryRow> summarize(const PosteriorDraws& draws);

/// One row per draw: chain, iteration, then named parameter columns.
void write_draws_csv(const PosteriorDraws& draws, const std::string& path);

} // namespace epi
