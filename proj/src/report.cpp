#include "epi/report.hpp"

#include "epi/csv.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace epi {

namespace {

std::string fixed(double x, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, x);
    return buf;
}

/// Quantiles of one scalar statistic evaluated on every draw.
template <typename Stat>
std::array<double, 3> median_and_95(const std::vector<std::vector<double>>& draws, Stat&& stat) {
    std::vector<double> values;
    values.reserve(draws.size());
    for (const auto& d : draws) values.push_back(stat(d));
    return {quantile(values, 0.5), quantile(values, 0.025), quantile(values, 0.975)};
}

std::vector<DayBand> day_bands(const std::vector<std::vector<double>>& draws, Date start) {
    if (draws.empty()) throw std::invalid_argument("report needs at least one draw");
    const std::size_t n_days = draws.front().size();
    std::vector<DayBand> out(n_days);
    std::vector<double> column(draws.size());
    for (std::size_t t = 0; t < n_days; ++t) {
        for (std::size_t d = 0; d < draws.size(); ++d) {
            if (draws[d].size() != n_days)
                throw std::invalid_argument("latent draws disagree on the day count");
            column[d] = draws[d][t];
        }
        DayBand& band = out[t];
        band.date = start + static_cast<int>(t);
        band.q2_5 = quantile(column, 0.025);
        band.q25 = quantile(column, 0.25);
        band.q50 = quantile(column, 0.5);
        band.q75 = quantile(column, 0.75);
        band.q97_5 = quantile(column, 0.975);
    }
    return out;
}

void write_band_csv(const std::string& path, const std::vector<DayBand>& bands) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << "date,q2_5,q25,q50,q75,q97_5\n";
    for (const DayBand& b : bands)
        out << b.date.to_string() << ',' << format_double(b.q2_5) << ',' << format_double(b.q25)
            << ',' << format_double(b.q50) << ',' << format_double(b.q75) << ','
            << format_double(b.q97_5) << '\n';
    if (!out) throw std::runtime_error("failed while writing " + path);
}

} // namespace

double attack_rate(std::span<const double> infections, double population, int as_of_day) {
    if (as_of_day < 0 || as_of_day >= static_cast<int>(infections.size()))
        throw std::invalid_argument("attack_rate: day outside the modelled window");
    if (!(population > 0.0)) throw std::invalid_argument("attack_rate: population must be positive");
    double cumulative = 0.0;
    for (int t = 0; t <= as_of_day; ++t) cumulative += infections[t];
    return std::clamp(100.0 * cumulative / population, 0.0, 100.0);
}

double active_infections(std::span<const double> infections, int as_of_day) {
    if (as_of_day >= static_cast<int>(infections.size()))
        throw std::invalid_argument("active_infections: day outside the modelled window");
    if (as_of_day < 13)
        throw std::invalid_argument("active_infections: fewer than 14 modelled days");
    double sum = 0.0;
    for (int t = as_of_day - 13; t <= as_of_day; ++t) sum += infections[t];
    return sum;
}

std::int64_t deaths_per_million(double deaths_total, double population) {
    if (!(population > 0.0))
        throw std::invalid_argument("deaths_per_million: population must be positive");
    return std::llround(1e6 * deaths_total / population);
}

FitReport build_report(const std::vector<StateReportInputs>& states) {
    FitReport report;
    for (const StateReportInputs& st : states) {
        if (st.infections.empty()) throw std::invalid_argument("report needs at least one draw");
        const int n_days = static_cast<int>(st.infections.front().size());
        const int day = st.as_of_day < 0 ? n_days - 1 : st.as_of_day;
        if (day < 0 || day >= n_days)
            throw std::invalid_argument("report day outside the modelled window");

        StateSummaryRow row;
        row.state = st.name;
        row.ifr_percent = st.ifr * 100.0;
        row.population = st.population;
        row.deaths = st.deaths_total;
        row.deaths_per_million =
            deaths_per_million(static_cast<double>(st.deaths_total), st.population);

        const auto total = median_and_95(st.infections, [&](const std::vector<double>& c) {
            return std::accumulate(c.begin(), c.begin() + day + 1, 0.0) / 1000.0;
        });
        row.infections_thousands = total[0];
        row.infections_lo95 = total[1];
        row.infections_hi95 = total[2];

        const auto last14 = median_and_95(st.infections, [&](const std::vector<double>& c) {
            return active_infections(c, day) / 1000.0;
        });
        row.infections_14d_thousands = last14[0];
        row.infections_14d_lo95 = last14[1];
        row.infections_14d_hi95 = last14[2];

        const auto ar = median_and_95(st.infections, [&](const std::vector<double>& c) {
            return attack_rate(c, st.population, day);
        });
        row.attack_rate_percent = ar[0];
        row.attack_rate_lo95 = ar[1];
        row.attack_rate_hi95 = ar[2];
        report.rows.push_back(std::move(row));

        StateBands bands;
        bands.state = st.name;
        bands.infections = day_bands(st.infections, st.start);
        bands.deaths = day_bands(st.expected_deaths, st.start);
        bands.rt = day_bands(st.rt, st.start);
        report.bands.push_back(std::move(bands));
    }
    return report;
}

void attach_diagnostics(FitReport& report, const Diagnostics& diag, double threshold) {
    report.flagged_parameters = diag.flagged;
    report.rhat_max = diag.rhat.empty() ? 0.0 : *std::max_element(diag.rhat.begin(), diag.rhat.end());
    report.ess_min = diag.ess.empty() ? 0.0 : *std::min_element(diag.ess.begin(), diag.ess.end());
    report.convergence_warning = !(report.rhat_max <= threshold);
}

std::string state_slug(const std::string& name) {
    std::string slug;
    for (char ch : name) {
        const unsigned char c = static_cast<unsigned char>(ch);
        slug.push_back(std::isalnum(c) ? static_cast<char>(std::tolower(c)) : '_');
    }
    return slug;
}

void write_report(const FitReport& report, const nlohmann::json& run_info,
                  const std::string& output_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(output_dir);

    {
        std::ofstream out(output_dir + "/summary.csv");
        if (!out) throw std::runtime_error("cannot open " + output_dir + "/summary.csv");
        out << "state,ifr_percent,population,deaths,deaths_per_million,"
               "infections_thousands,infections_lo95,infections_hi95,"
               "infections_14d_thousands,infections_14d_lo95,infections_14d_hi95,"
               "attack_rate_percent,attack_rate_lo95,attack_rate_hi95\n";
        for (const StateSummaryRow& r : report.rows) {
            out << r.state << ',' << fixed(r.ifr_percent, 2) << ','
                << static_cast<std::int64_t>(std::llround(r.population)) << ',' << r.deaths << ','
                << r.deaths_per_million << ',' << fixed(r.infections_thousands, 1) << ','
                << fixed(r.infections_lo95, 1) << ',' << fixed(r.infections_hi95, 1) << ','
                << fixed(r.infections_14d_thousands, 1) << ',' << fixed(r.infections_14d_lo95, 1)
                << ',' << fixed(r.infections_14d_hi95, 1) << ','
                << fixed(r.attack_rate_percent, 1) << ',' << fixed(r.attack_rate_lo95, 1) << ','
                << fixed(r.attack_rate_hi95, 1) << '\n';
        }
        if (!out) throw std::runtime_error("failed while writing summary.csv");
    }

    std::vector<std::string> seen;
    for (const StateBands& b : report.bands) {
        const std::string slug = state_slug(b.state);
        if (std::find(seen.begin(), seen.end(), slug) != seen.end())
            throw std::runtime_error("two states collapse to the same file name: " + slug);
        seen.push_back(slug);
        write_band_csv(output_dir + "/infections_" + slug + ".csv", b.infections);
        write_band_csv(output_dir + "/deaths_" + slug + ".csv", b.deaths);
        write_band_csv(output_dir + "/rt_" + slug + ".csv", b.rt);
    }

    nlohmann::json manifest;
    manifest["run"] = run_info;
    manifest["diagnostics"] = {
        {"convergence_warning", report.convergence_warning},
        {"rhat_max", report.rhat_max},
        {"ess_min", report.ess_min},
        {"flagged_parameters", report.flagged_parameters},
    };
    nlohmann::json states = nlohmann::json::array();
    for (const StateSummaryRow& r : report.rows) states.push_back(r.state);
    manifest["states"] = states;
    std::ofstream out(output_dir + "/manifest.json");
    if (!out) throw std::runtime_error("cannot open " + output_dir + "/manifest.json");
    out << manifest.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed while writing manifest.json");
}

} // namespace epi
