#include "epi/delay.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace epi {

namespace {

constexpr double kMaxTailMass = 0.01;
constexpr int kCellsPerDay = 20; // 0.05-day convolution sub-grid
constexpr double kGridStep = 1.0 / kCellsPerDay;

void check_spec(const GammaSpec& spec)
{
    if (!(spec.mean > 0.0) || !std::isfinite(spec.mean) || !(spec.cv > 0.0) ||
        !std::isfinite(spec.cv)) {
        throw std::invalid_argument("GammaSpec requires positive finite mean and cv");
    }
}

/// Probability in ((s-1)*h, s*h] cells of a sub-day grid, one entry per cell.
std::vector<double> grid_cells(const GammaSpec& spec, int n_cells, double h)
{
    std::vector<double> w(n_cells);
    double prev = 0.0;
    for (int i = 1; i <= n_cells; ++i) {
        const double cur = gamma_cdf(spec, i * h);
        w[i - 1] = cur - prev;
        prev = cur;
    }
    return w;
}

std::vector<double> bin_to_days(const std::vector<double>& grid_mass, int horizon)
{
    // grid_mass[k] sits at t = (k+1)/kCellsPerDay days; day 1 collects
    // t in [0, 1.5], day s collects (s-0.5, s+0.5]. A grid point exactly on
    // a bin edge splits evenly: the underlying cell-pair mass spreads
    // symmetrically about its midpoint, so half belongs to either day.
    constexpr int half = kCellsPerDay / 2;
    static_assert(kCellsPerDay % 2 == 0, "bin edges must be representable on the grid");
    std::vector<double> days(horizon, 0.0);
    const auto deposit = [&](int day, double m) {
        if (day >= 1 && day <= horizon) {
            days[day - 1] += m;
        }
    };
    for (std::size_t k = 0; k < grid_mass.size(); ++k) {
        const int idx = static_cast<int>(k) + 1;
        const int day = (idx + half) / kCellsPerDay;
        if (idx >= kCellsPerDay + half && (idx - half) % kCellsPerDay == 0) {
            deposit(day - 1, 0.5 * grid_mass[k]);
            deposit(day, 0.5 * grid_mass[k]);
        }
        else {
            deposit(std::max(day, 1), grid_mass[k]);
        }
    }
    return days;
}

DiscretePmf renormalize_with_guard(std::vector<double> raw, int horizon, const char* what)
{
    double total = 0.0;
    for (double m : raw) {
        total += m;
    }
    if (1.0 - total >= kMaxTailMass) {
        throw std::runtime_error(std::string(what) + ": horizon " + std::to_string(horizon) +
                                 " leaves " + std::to_string(1.0 - total) +
                                 " of the mass beyond the last day (limit 0.01)");
    }
    for (double& m : raw) {
        m /= total;
    }
    return DiscretePmf{std::move(raw)};
}

} // namespace

double DiscretePmf::mean_day() const
{
    double m = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
        m += static_cast<double>(i + 1) * mass[i];
    }
    return m;
}

double gamma_cdf(const GammaSpec& spec, double x)
{
    check_spec(spec);
    if (!std::isfinite(x) || x < 0.0) {
        throw std::invalid_argument("gamma_cdf requires finite x >= 0");
    }
    if (x == 0.0) {
        return 0.0;
    }
    return boost::math::gamma_p(spec.shape(), spec.rate() * x);
}

std::vector<double> discretize_raw(const GammaSpec& spec, int horizon)
{
    check_spec(spec);
    if (horizon < 1) {
        throw std::invalid_argument("discretize requires horizon >= 1");
    }
    std::vector<double> raw(horizon);
    raw[0] = gamma_cdf(spec, 1.5);
    double prev = gamma_cdf(spec, 1.5);
    for (int s = 2; s <= horizon; ++s) {
        const double cur = gamma_cdf(spec, s + 0.5);
        raw[s - 1] = cur - prev;
        prev = cur;
    }
    return raw;
}

DiscretePmf discretize(const GammaSpec& spec, int horizon)
{
    return renormalize_with_guard(discretize_raw(spec, horizon), horizon, "discretize");
}

std::vector<double> convolve_raw(const GammaSpec& onset, const GammaSpec& death, int horizon)
{
    check_spec(onset);
    check_spec(death);
    if (horizon < 1) {
        throw std::invalid_argument("convolve requires horizon >= 1");
    }
    // Each input needs support up to the last day boundary; the convolution
    // of the two cell masses lands on the same grid.
    const int n_cells = horizon * kCellsPerDay + kCellsPerDay / 2;
    const auto a = grid_cells(onset, n_cells, kGridStep);
    const auto b = grid_cells(death, n_cells, kGridStep);

    // Mass of cell i is placed at its midpoint (i+0.5)*h, so the sum of cells
    // i and j sits at (i+j+1)*h; index k = i+j+1 below is exact on the grid.
    std::vector<double> sum_mass(n_cells + 1, 0.0);
    for (int i = 0; i < n_cells; ++i) {
        if (a[i] == 0.0) {
            continue;
        }
        const int j_max = n_cells - i - 1;
        for (int j = 0; j <= j_max; ++j) {
            sum_mass[i + j + 1] += a[i] * b[j];
        }
    }
    // sum_mass[k] corresponds to time (k+1)*h with sum_mass[0] unused offset:
    // rebuild as grid_mass[k] at time (k+1)*h.
    std::vector<double> grid_mass(n_cells, 0.0);
    for (int k = 1; k <= n_cells; ++k) {
        grid_mass[k - 1] = sum_mass[k];
    }
    return bin_to_days(grid_mass, horizon);
}

DiscretePmf convolve_infection_to_death(const GammaSpec& onset, const GammaSpec& death,
                                        int horizon)
{
    return renormalize_with_guard(convolve_raw(onset, death, horizon), horizon,
                                  "convolve_infection_to_death");
}

} // namespace epi
