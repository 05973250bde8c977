#include "epi/sampler.hpp"

#include "epi/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace epi {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::mt19937_64 make_chain_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

/// In-place lower Cholesky of a row-major d x d matrix; false if not SPD.
bool cholesky_lower(std::vector<double>& a, int d) {
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j <= i; ++j) {
            double sum = a[i * d + j];
            for (int k = 0; k < j; ++k) sum -= a[i * d + k] * a[j * d + k];
            if (i == j) {
                if (!(sum > 0.0)) return false;
                a[i * d + i] = std::sqrt(sum);
            } else {
                a[i * d + j] = sum / a[j * d + j];
            }
        }
        for (int j = i + 1; j < d; ++j) a[i * d + j] = 0.0;
    }
    return true;
}

/// One proposal block with its Robbins-Monro scale and warmup moments.
struct Block {
    std::vector<int> idx;
    double log_scale = 0.0;
    std::vector<double> chol;      // row-major lower factor of the proposal shape
    long n_obs = 0;                // warmup states folded into the moments
    long n_adapt = 0;              // scale updates so far
    std::vector<double> mean, m2;  // Welford accumulators (d and d*d)
    std::vector<double> delta_old; // scratch

    explicit Block(std::vector<int> indices) : idx(std::move(indices)) {
        const int d = static_cast<int>(idx.size());
        log_scale = std::log(2.38 / std::sqrt(static_cast<double>(d)));
        chol.assign(static_cast<std::size_t>(d) * d, 0.0);
        for (int i = 0; i < d; ++i) chol[static_cast<std::size_t>(i) * d + i] = 1.0;
        mean.assign(d, 0.0);
        m2.assign(static_cast<std::size_t>(d) * d, 0.0);
        delta_old.assign(d, 0.0);
    }

    void fold_state(const std::vector<double>& x) {
        const int d = static_cast<int>(idx.size());
        ++n_obs;
        for (int i = 0; i < d; ++i) {
            delta_old[i] = x[idx[i]] - mean[i];
            mean[i] += delta_old[i] / static_cast<double>(n_obs);
        }
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j)
                m2[static_cast<std::size_t>(i) * d + j] += delta_old[i] * (x[idx[j]] - mean[j]);
    }

    /// Refactor the proposal shape from the accumulated covariance.
    void refresh_shape() {
        const int d = static_cast<int>(idx.size());
        if (n_obs < 2) return;
        std::vector<double> cov(static_cast<std::size_t>(d) * d);
        double max_diag = 0.0;
        for (int i = 0; i < d; ++i)
            max_diag = std::max(max_diag, m2[static_cast<std::size_t>(i) * d + i]);
        max_diag /= static_cast<double>(n_obs - 1);
        const double ridge = 1e-12 + 1e-6 * max_diag;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                const std::size_t ij = static_cast<std::size_t>(i) * d + j;
                const std::size_t ji = static_cast<std::size_t>(j) * d + i;
                cov[ij] = 0.5 * (m2[ij] + m2[ji]) / static_cast<double>(n_obs - 1);
                if (i == j) cov[ij] += ridge;
            }
        if (cholesky_lower(cov, d)) {
            chol = std::move(cov);
        } else {
            // Degenerate warmup sample: keep a diagonal shape from the variances.
            std::fill(chol.begin(), chol.end(), 0.0);
            for (int i = 0; i < d; ++i) {
                const double v = m2[static_cast<std::size_t>(i) * d + i] /
                                     static_cast<double>(n_obs - 1) +
                                 ridge;
                chol[static_cast<std::size_t>(i) * d + i] = std::sqrt(v);
            }
        }
    }
};

struct ChainOutput {
    std::vector<double> draws; // n_samples x dim, iteration-major
    double accept_rate = 0.0;
};

ChainOutput run_one_chain(const LogDensity& target, std::size_t dim, const InitRule& init,
                          const ChainConfig& cfg, const std::vector<std::vector<int>>& block_idx,
                          int chain) {
    std::mt19937_64 rng =
        make_chain_rng(cfg.seed, static_cast<std::uint64_t>(chain) + 1);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    std::vector<double> x;
    double lp = kNegInf;
    for (int attempt = 0; attempt < cfg.max_init_tries && !std::isfinite(lp); ++attempt) {
        x = init(rng);
        if (x.size() != dim)
            throw std::invalid_argument("init rule returned a point of the wrong dimension");
        lp = target(x);
        if (std::isnan(lp) || lp == std::numeric_limits<double>::infinity())
            throw std::runtime_error("log density returned NaN or +inf at an initial point");
    }
    if (!std::isfinite(lp))
        throw std::runtime_error("no finite-density starting point found within the retry budget");

    std::vector<Block> blocks;
    blocks.reserve(block_idx.size());
    for (const auto& idx : block_idx) blocks.emplace_back(idx);

    std::vector<double> prop(dim), z;
    long accepted = 0, proposed = 0;

    auto sweep = [&](bool warmup, int sweep_no) {
        for (Block& b : blocks) {
            const int d = static_cast<int>(b.idx.size());
            z.resize(d);
            for (double& zi : z) zi = unit(rng);
            prop = x;
            const double s = std::exp(b.log_scale);
            for (int i = 0; i < d; ++i) {
                double dot = 0.0;
                for (int j = 0; j <= i; ++j) dot += b.chol[static_cast<std::size_t>(i) * d + j] * z[j];
                prop[b.idx[i]] += s * dot;
            }
            const double lp_new = target(prop);
            if (std::isnan(lp_new) || lp_new == std::numeric_limits<double>::infinity())
                throw std::runtime_error("log density returned NaN or +inf during sampling");
            double alpha = 0.0;
            if (lp_new >= lp)
                alpha = 1.0;
            else if (std::isfinite(lp_new))
                alpha = std::exp(lp_new - lp);
            if (u01(rng) < alpha) {
                x = prop;
                lp = lp_new;
                if (!warmup) ++accepted;
            }
            if (!warmup) ++proposed;
            if (warmup) {
                ++b.n_adapt;
                const double step = std::pow(static_cast<double>(b.n_adapt), -cfg.adapt_decay);
                b.log_scale += step * (alpha - cfg.target_accept);
                b.fold_state(x);
                if (sweep_no >= cfg.covariance_start && sweep_no % cfg.chol_refresh == 0)
                    b.refresh_shape();
            }
        }
    };

    for (int w = 0; w < cfg.n_warmup; ++w) sweep(true, w + 1);

    ChainOutput out;
    out.draws.resize(static_cast<std::size_t>(cfg.n_samples) * dim);
    for (int i = 0; i < cfg.n_samples; ++i) {
        for (int t = 0; t < cfg.thin; ++t) sweep(false, 0);
        std::copy(x.begin(), x.end(), out.draws.begin() + static_cast<std::size_t>(i) * dim);
    }
    out.accept_rate =
        proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0;
    return out;
}

void validate_config(const ChainConfig& cfg) {
    if (cfg.n_chains < 2) throw std::invalid_argument("n_chains must be at least 2");
    if (cfg.n_warmup < 100) throw std::invalid_argument("n_warmup must be at least 100");
    if (cfg.n_samples < 1) throw std::invalid_argument("n_samples must be at least 1");
    if (cfg.thin < 1) throw std::invalid_argument("thin must be at least 1");
    if (!(cfg.target_accept > 0.0 && cfg.target_accept < 1.0))
        throw std::invalid_argument("target_accept must lie in (0, 1)");
    if (cfg.max_init_tries < 1) throw std::invalid_argument("max_init_tries must be positive");
    if (cfg.chol_refresh < 1) throw std::invalid_argument("chol_refresh must be positive");
    if (!(cfg.adapt_decay > 0.5 && cfg.adapt_decay <= 1.0))
        throw std::invalid_argument("adapt_decay must lie in (0.5, 1]");
}

void validate_blocks(const std::vector<std::vector<int>>& blocks, std::size_t dim) {
    std::vector<int> seen(dim, 0);
    for (const auto& b : blocks) {
        if (b.empty()) throw std::invalid_argument("empty sampler block");
        for (int i : b) {
            if (i < 0 || static_cast<std::size_t>(i) >= dim)
                throw std::invalid_argument("sampler block index out of range");
            ++seen[i];
        }
    }
    for (std::size_t i = 0; i < dim; ++i)
        if (seen[i] != 1)
            throw std::invalid_argument("sampler blocks must partition the coordinates");
}

/// Split each chain into halves of equal length (middle element dropped when odd).
std::vector<std::vector<double>> split_halves(const std::vector<std::vector<double>>& chains) {
    std::vector<std::vector<double>> out;
    out.reserve(2 * chains.size());
    for (const auto& c : chains) {
        const std::size_t h = c.size() / 2;
        out.emplace_back(c.begin(), c.begin() + h);
        out.emplace_back(c.end() - h, c.end());
    }
    return out;
}

struct PooledVariance {
    double w = 0.0;        // mean within-sequence variance
    double var_means = 0.0; // variance of sequence means
    double var_plus = 0.0;
    std::size_t n = 0;     // common sequence length
    std::vector<double> means;
};

PooledVariance pooled_variance(const std::vector<std::vector<double>>& seqs) {
    PooledVariance out;
    out.n = seqs.front().size();
    for (const auto& s : seqs)
        if (s.size() != out.n)
            throw std::invalid_argument("chains must have equal length");
    if (out.n < 2) throw std::invalid_argument("chains too short for diagnostics");
    double w_sum = 0.0;
    for (const auto& s : seqs) {
        const double mu = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(out.n);
        double ss = 0.0;
        for (double v : s) ss += (v - mu) * (v - mu);
        w_sum += ss / static_cast<double>(out.n - 1);
        out.means.push_back(mu);
    }
    const double m = static_cast<double>(seqs.size());
    out.w = w_sum / m;
    if (seqs.size() > 1) {
        const double grand =
            std::accumulate(out.means.begin(), out.means.end(), 0.0) / m;
        double ss = 0.0;
        for (double mu : out.means) ss += (mu - grand) * (mu - grand);
        out.var_means = ss / (m - 1.0);
    }
    const double n = static_cast<double>(out.n);
    out.var_plus = (n - 1.0) / n * out.w + out.var_means;
    return out;
}

double autocov_at(const std::vector<double>& s, double mean, std::size_t lag) {
    const std::size_t n = s.size();
    double sum = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) sum += (s[i] - mean) * (s[i + lag] - mean);
    return sum / static_cast<double>(n);
}

} // namespace

std::vector<double> PosteriorDraws::column(int param) const {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n_chains) * n_samples);
    for (int c = 0; c < n_chains; ++c)
        for (int i = 0; i < n_samples; ++i) out.push_back(at(c, i, param));
    return out;
}

std::vector<double> PosteriorDraws::chain_column(int chain, int param) const {
    std::vector<double> out;
    out.reserve(n_samples);
    for (int i = 0; i < n_samples; ++i) out.push_back(at(chain, i, param));
    return out;
}

PosteriorDraws run_chains(const LogDensity& target, std::size_t dim, const InitRule& init,
                          const ChainConfig& cfg, std::vector<std::vector<int>> blocks,
                          std::vector<std::string> names) {
    validate_config(cfg);
    if (dim == 0) throw std::invalid_argument("dimension must be positive");
    if (blocks.empty()) {
        blocks.emplace_back(dim);
        std::iota(blocks.front().begin(), blocks.front().end(), 0);
    }
    validate_blocks(blocks, dim);
    if (names.empty()) {
        names.reserve(dim);
        for (std::size_t p = 0; p < dim; ++p) names.push_back("p" + std::to_string(p));
    }
    if (names.size() != dim)
        throw std::invalid_argument("parameter name count must match the dimension");

    std::vector<ChainOutput> outputs(cfg.n_chains);
    std::vector<std::exception_ptr> errors(cfg.n_chains);
    auto work = [&](int c) {
        try {
            outputs[c] = run_one_chain(target, dim, init, cfg, blocks, c);
        } catch (...) {
            errors[c] = std::current_exception();
        }
    };
    if (cfg.parallel && cfg.n_chains > 1) {
        std::vector<std::thread> pool;
        pool.reserve(cfg.n_chains);
        for (int c = 0; c < cfg.n_chains; ++c) pool.emplace_back(work, c);
        for (auto& t : pool) t.join();
    } else {
        for (int c = 0; c < cfg.n_chains; ++c) work(c);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    PosteriorDraws draws;
    draws.names = std::move(names);
    draws.n_chains = cfg.n_chains;
    draws.n_samples = cfg.n_samples;
    draws.data.resize(static_cast<std::size_t>(cfg.n_chains) * cfg.n_samples * dim);
    for (int c = 0; c < cfg.n_chains; ++c) {
        std::copy(outputs[c].draws.begin(), outputs[c].draws.end(),
                  draws.data.begin() + static_cast<std::size_t>(c) * cfg.n_samples * dim);
        draws.accept_rate.push_back(outputs[c].accept_rate);
    }
    return draws;
}

double split_rhat(const std::vector<std::vector<double>>& chains) {
    if (chains.size() < 2) throw std::invalid_argument("split R-hat needs at least 2 chains");
    const auto seqs = split_halves(chains);
    const PooledVariance pv = pooled_variance(seqs);
    if (pv.w == 0.0) {
        if (pv.var_means == 0.0) return 1.0; // identical constant chains
        return std::numeric_limits<double>::infinity();
    }
    return std::sqrt(pv.var_plus / pv.w);
}

double effective_sample_size(const std::vector<std::vector<double>>& chains) {
    if (chains.empty()) throw std::invalid_argument("effective sample size needs draws");
    const auto seqs = split_halves(chains);
    const PooledVariance pv = pooled_variance(seqs);
    const std::size_t n = pv.n;
    const double total = static_cast<double>(seqs.size()) * static_cast<double>(n);
    if (pv.var_plus <= 0.0) return total; // constant draws: no correlation structure
    const double m = static_cast<double>(seqs.size());

    auto rho = [&](std::size_t lag) {
        double acov = 0.0;
        for (std::size_t s = 0; s < seqs.size(); ++s)
            acov += autocov_at(seqs[s], pv.means[s], lag);
        acov /= m;
        return 1.0 - (pv.w - acov) / pv.var_plus;
    };

    // Geyer initial monotone positive sequence over lag pairs.
    double sum_pairs = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
        const double r_even = (k == 0) ? 1.0 : rho(2 * k);
        const double r_odd = rho(2 * k + 1);
        double pair = r_even + r_odd;
        if (pair <= 0.0) break;
        pair = std::min(pair, prev_pair);
        sum_pairs += pair;
        prev_pair = pair;
    }
    const double tau = std::max(2.0 * sum_pairs - 1.0, 1.0 / static_cast<double>(n));
    return total / tau;
}

Diagnostics diagnose(const PosteriorDraws& draws, double rhat_threshold) {
    if (draws.n_chains < 2 || draws.n_samples < 100)
        throw std::invalid_argument("diagnostics need at least 2 chains of 100 draws each");
    Diagnostics out;
    out.accept_rate = draws.accept_rate;
    for (int p = 0; p < draws.dim(); ++p) {
        std::vector<std::vector<double>> chains;
        chains.reserve(draws.n_chains);
        for (int c = 0; c < draws.n_chains; ++c) chains.push_back(draws.chain_column(c, p));
        const double r = split_rhat(chains);
        out.rhat.push_back(r);
        out.ess.push_back(effective_sample_size(chains));
        if (!(r <= rhat_threshold)) {
            out.flagged.push_back(draws.names[p]);
            out.converged = false;
        }
    }
    return out;
}

double quantile(std::span<const double> values, double p) {
    if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
    std::vector<double> xs(values.begin(), values.end());
    std::sort(xs.begin(), xs.end());
    p = std::clamp(p, 0.0, 1.0);
    const double h = p * static_cast<double>(xs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= xs.size()) return xs.back();
    const double frac = h - static_cast<double>(lo);
    return xs[lo] + frac * (xs[lo + 1] - xs[lo]);
}

std::vector<SummaryRow> summarize(const PosteriorDraws& draws) {
    if (draws.data.empty()) throw std::invalid_argument("summarize needs draws");
    Diagnostics diag;
    bool have_diag = false;
    if (draws.n_chains >= 2 && draws.n_samples >= 100) {
        diag = diagnose(draws);
        have_diag = true;
    }
    std::vector<SummaryRow> rows;
    rows.reserve(draws.dim());
    for (int p = 0; p < draws.dim(); ++p) {
        const std::vector<double> xs = draws.column(p);
        SummaryRow row;
        row.name = draws.names[p];
        row.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
        double ss = 0.0;
        for (double v : xs) ss += (v - row.mean) * (v - row.mean);
        row.sd = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
        row.q2_5 = quantile(xs, 0.025);
        row.q25 = quantile(xs, 0.25);
        row.median = quantile(xs, 0.5);
        row.q75 = quantile(xs, 0.75);
        row.q97_5 = quantile(xs, 0.975);
        row.ess = have_diag ? diag.ess[p] : std::numeric_limits<double>::quiet_NaN();
        row.rhat = have_diag ? diag.rhat[p] : std::numeric_limits<double>::quiet_NaN();
        rows.push_back(row);
    }
    return rows;
}

void write_draws_csv(const PosteriorDraws& draws, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "chain,iteration";
    for (const auto& name : draws.names) out << ',' << name;
    out << '\n';
    for (int c = 0; c < draws.n_chains; ++c)
        for (int i = 0; i < draws.n_samples; ++i) {
            out << c << ',' << i;
            for (int p = 0; p < draws.dim(); ++p)
                out << ',' << format_double(draws.at(c, i, p), 17);
            out << '\n';
        }
    if (!out) throw std::runtime_error("failed while writing " + path);
}

} // namespace epi
