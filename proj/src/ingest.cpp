#include "epi/ingest.hpp"

#include "epi/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace epi {

namespace {

void warn(Warnings* warnings, std::string message) {
    if (warnings) warnings->push_back(std::move(message));
}

/// Rows of one state in file order, checked strictly increasing by date.
template <typename Value>
struct StateRows {
    std::string state;
    std::vector<std::pair<Date, Value>> rows;
};

template <typename Value, typename ParseRow>
std::vector<StateRows<Value>> group_by_state(const CsvTable& table, std::size_t state_col,
                                             std::size_t date_col, ParseRow&& parse_row) {
    std::vector<StateRows<Value>> out;
    std::map<std::string, std::size_t> index;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string& state = row[state_col];
        const Date date = Date::parse(row[date_col]);
        auto [it, inserted] = index.try_emplace(state, out.size());
        if (inserted) out.push_back({state, {}});
        auto& rows = out[it->second].rows;
        if (!rows.empty() && !(rows.back().first < date))
            throw std::runtime_error("dates for state " + state +
                                     " are not strictly increasing at " + date.to_string());
        rows.emplace_back(date, parse_row(row, r));
    }
    return out;
}

std::ofstream open_for_write(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    return out;
}

} // namespace

std::vector<DeathSeries> load_deaths(const std::string& path, Warnings* warnings) {
    const CsvTable table = read_csv(path, {"state", "date", "deaths"});
    auto grouped = group_by_state<std::int64_t>(
        table, 0, 1, [&](const std::vector<std::string>& row, std::size_t r) {
            const std::int64_t v = parse_int(row[2], path + " row " + std::to_string(r + 2));
            if (v < 0)
                throw std::runtime_error("negative death count for state " + row[0] + " on " +
                                         row[1]);
            return v;
        });
    std::vector<DeathSeries> out;
    for (auto& g : grouped) {
        DeathSeries s;
        s.state = g.state;
        s.start = g.rows.front().first;
        const int n = g.rows.back().first - s.start + 1;
        s.deaths.assign(n, 0);
        for (const auto& [date, v] : g.rows) s.deaths[date - s.start] = v;
        const int filled = n - static_cast<int>(g.rows.size());
        if (filled > 0)
            warn(warnings, "deaths: state " + s.state + ": zero-filled " +
                               std::to_string(filled) + " missing day(s)");
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<MobilitySeries> load_mobility(const std::string& path, Warnings* warnings) {
    const CsvTable table = read_csv(path, {"state", "date", "k1", "k2", "k3", "k4"});
    auto grouped = group_by_state<std::array<double, 4>>(
        table, 0, 1, [&](const std::vector<std::string>& row, std::size_t r) {
            const std::string context = path + " row " + std::to_string(r + 2);
            return std::array<double, 4>{
                parse_double(row[2], context), parse_double(row[3], context),
                parse_double(row[4], context), parse_double(row[5], context)};
        });
    std::vector<MobilitySeries> out;
    for (auto& g : grouped) {
        MobilitySeries s;
        s.state = g.state;
        s.start = g.rows.front().first;
        const int n = g.rows.back().first - s.start + 1;
        std::vector<bool> present(n, false);
        for (auto& ind : s.indicators) ind.assign(n, 0.0);
        for (const auto& [date, values] : g.rows) {
            const int t = date - s.start;
            present[t] = true;
            for (int k = 0; k < 4; ++k) s.indicators[k][t] = values[k];
        }
        int filled = 0;
        for (int t = 1; t < n; ++t) {
            if (present[t]) continue;
            int next = t;
            while (!present[next]) ++next; // last day is present by construction
            const int prev = t - 1;
            for (int k = 0; k < 4; ++k) {
                const double lo = s.indicators[k][prev], hi = s.indicators[k][next];
                for (int j = t; j < next; ++j)
                    s.indicators[k][j] =
                        lo + (hi - lo) * static_cast<double>(j - prev) /
                                 static_cast<double>(next - prev);
            }
            filled += next - t;
            t = next;
        }
        if (filled > 0)
            warn(warnings, "mobility: state " + s.state + ": interpolated " +
                               std::to_string(filled) + " missing day(s)");
        out.push_back(std::move(s));
    }
    return out;
}

std::map<std::string, double> load_population(const std::string& path) {
    const CsvTable table = read_csv(path, {"state", "population"});
    std::map<std::string, double> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const double n = parse_double(row[1], path + " row " + std::to_string(r + 2));
        if (!(n > 0.0))
            throw std::runtime_error("population for state " + row[0] + " must be positive");
        if (!out.emplace(row[0], n).second)
            throw std::runtime_error("duplicate population row for state " + row[0]);
    }
    return out;
}

std::map<std::string, double> load_ifr(const std::string& path) {
    const CsvTable table = read_csv(path, {"state", "ifr_percent"});
    std::map<std::string, double> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const double pct = parse_double(row[1], path + " row " + std::to_string(r + 2));
        if (!(pct > 0.0) || !(pct < 10.0))
            throw std::runtime_error("IFR for state " + row[0] +
                                     " must lie in (0, 10) percent, got " + row[1]);
        if (!out.emplace(row[0], pct / 100.0).second)
            throw std::runtime_error("duplicate IFR row for state " + row[0]);
    }
    return out;
}

ReportingTriangle load_triangle(const std::string& path, int max_delay) {
    const CsvTable table = read_csv(path, {"death_date", "report_date", "count"});
    if (table.rows.empty()) throw std::runtime_error(path + ": empty reporting triangle");
    ReportingTriangle triangle;
    triangle.max_delay = max_delay;
    Date last_report;
    bool any = false;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const Date death = Date::parse(row[0]);
        const Date report = Date::parse(row[1]);
        const std::int64_t count = parse_int(row[2], path + " row " + std::to_string(r + 2));
        triangle.add(death, report - death, count);
        last_report = any ? std::max(last_report, report) : report;
        any = true;
    }
    triangle.last_report_date = last_report;
    return triangle;
}

DelayProfile load_delay_profile(const std::string& path) {
    const CsvTable table = read_csv(path, {"delay_days", "eta", "cumulative"});
    if (table.rows.empty()) throw std::runtime_error(path + ": empty delay profile");
    DelayProfile profile;
    double run = 0.0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string context = path + " row " + std::to_string(r + 2);
        if (parse_int(row[0], context) != static_cast<std::int64_t>(r))
            throw std::runtime_error(context + ": delay_days must run 0,1,2,...");
        const double eta = parse_double(row[1], context);
        if (eta < 0.0) throw std::runtime_error(context + ": negative proportion");
        run += eta;
        if (std::abs(run - parse_double(row[2], context)) > 1e-6)
            throw std::runtime_error(context + ": cumulative column inconsistent with eta");
        profile.eta.push_back(eta);
    }
    if (std::abs(run - 1.0) > 1e-6)
        throw std::runtime_error(path + ": delay proportions must sum to 1");
    return profile;
}

void save_deaths(const std::string& path, const std::vector<DeathSeries>& series) {
    auto out = open_for_write(path);
    out << "state,date,deaths\n";
    for (const auto& s : series)
        for (std::size_t t = 0; t < s.deaths.size(); ++t)
            out << s.state << ',' << (s.start + static_cast<int>(t)).to_string() << ','
                << s.deaths[t] << '\n';
}

void save_mobility(const std::string& path, const std::vector<MobilitySeries>& series) {
    auto out = open_for_write(path);
    out << "state,date,k1,k2,k3,k4\n";
    for (const auto& s : series)
        for (int t = 0; t < s.n_days(); ++t) {
            out << s.state << ',' << (s.start + t).to_string();
            for (int k = 0; k < 4; ++k) out << ',' << format_double(s.indicators[k][t], 17);
            out << '\n';
        }
}

void save_population(const std::string& path, const std::map<std::string, double>& population) {
    auto out = open_for_write(path);
    out << "state,population\n";
    for (const auto& [state, n] : population) out << state << ',' << format_double(n, 17) << '\n';
}

void save_ifr(const std::string& path, const std::map<std::string, double>& ifr_fraction) {
    auto out = open_for_write(path);
    out << "state,ifr_percent\n";
    for (const auto& [state, f] : ifr_fraction)
        out << state << ',' << format_double(f * 100.0, 17) << '\n';
}

void save_delay_profile(const std::string& path, const DelayProfile& profile) {
    auto out = open_for_write(path);
    out << "delay_days,eta,cumulative\n";
    const std::vector<double> cum = profile.cumulative();
    for (std::size_t d = 0; d < profile.eta.size(); ++d)
        out << d << ',' << format_double(profile.eta[d], 17) << ','
            << format_double(cum[d], 17) << '\n';
}

MobilityMatrix smooth_mobility(const std::array<std::vector<double>, 4>& raw, Date start,
                               Date dummy_start) {
    const std::size_t n = raw[0].size();
    if (n == 0) throw std::invalid_argument("smooth_mobility: empty series");
    for (const auto& series : raw)
        if (series.size() != n)
            throw std::invalid_argument("smooth_mobility: indicator lengths differ");
    MobilityMatrix out;
    for (int k = 0; k < 4; ++k) {
        out.indicators[k].resize(n);
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t lo = t >= 6 ? t - 6 : 0;
            double sum = 0.0;
            for (std::size_t j = lo; j <= t; ++j) sum += raw[k][j];
            out.indicators[k][t] = sum / static_cast<double>(t - lo + 1);
        }
        out.dummies[k].resize(n);
        for (std::size_t t = 0; t < n; ++t)
            out.dummies[k][t] = (start + static_cast<int>(t) >= dummy_start) ? 1.0 : 0.0;
    }
    return out;
}

std::optional<EpidemicWindow> epidemic_window(std::span<const std::int64_t> deaths) {
    std::int64_t cumulative = 0;
    for (std::size_t i = 0; i < deaths.size(); ++i) {
        cumulative += deaths[i];
        if (cumulative >= 10) {
            const int fit_start = static_cast<int>(i) + 1;
            if (fit_start >= static_cast<int>(deaths.size())) return std::nullopt;
            return EpidemicWindow{std::max(0, fit_start - 30), fit_start};
        }
    }
    return std::nullopt;
}

double interpolate_ifr(const IfrInterpolationTable& table, int level, double age_weight) {
    if (table.levels < 2) throw std::invalid_argument("interpolation needs at least 2 levels");
    if (!(table.anchor_least_marginalized > 0.0) || !(table.anchor_most_marginalized > 0.0))
        throw std::invalid_argument("IFR anchors must be positive");
    if (level < 1 || level > table.levels)
        throw std::invalid_argument("unknown marginalization level " + std::to_string(level));
    if (!(age_weight > 0.0)) throw std::invalid_argument("age weight must be positive");
    const double frac = static_cast<double>(level - 1) / static_cast<double>(table.levels - 1);
    const double base = table.anchor_least_marginalized +
                        frac * (table.anchor_most_marginalized - table.anchor_least_marginalized);
    return base * age_weight;
}

Dataset assemble_dataset(const std::string& deaths_path, const std::string& mobility_path,
                         const std::string& population_path, const std::string& ifr_path,
                         Date dummy_start) {
    Dataset out;
    const auto deaths = load_deaths(deaths_path, &out.warnings);
    const auto mobility = load_mobility(mobility_path, &out.warnings);
    const auto population = load_population(population_path);
    const auto ifr = load_ifr(ifr_path);

    std::map<std::string, const MobilitySeries*> mobility_by_state;
    for (const auto& m : mobility) mobility_by_state.emplace(m.state, &m);

    for (const auto& d : deaths) {
        const auto pop_it = population.find(d.state);
        if (pop_it == population.end())
            throw std::runtime_error("no population entry for state " + d.state);
        const auto ifr_it = ifr.find(d.state);
        if (ifr_it == ifr.end()) throw std::runtime_error("no IFR entry for state " + d.state);
        const auto mob_it = mobility_by_state.find(d.state);
        if (mob_it == mobility_by_state.end())
            throw std::runtime_error("no mobility data for state " + d.state);

        const MobilitySeries& m = *mob_it->second;
        const int n = static_cast<int>(d.deaths.size());
        const Date d_end = d.start + (n - 1);
        const Date m_end = m.start + (m.n_days() - 1);
        if (m.start > d.start || m_end < d_end)
            throw std::runtime_error("mobility for state " + d.state + " covers " +
                                     m.start.to_string() + ".." + m_end.to_string() +
                                     " but deaths span " + d.start.to_string() + ".." +
                                     d_end.to_string());

        const auto window = epidemic_window(d.deaths);
        if (!window) {
            out.excluded.push_back(d.state +
                                   ": never accumulates 10 deaths early enough to fit");
            continue;
        }

        StateData st;
        st.name = d.state;
        st.population = pop_it->second;
        st.start = d.start;
        st.deaths = d.deaths;
        const int offset = d.start - m.start;
        for (int k = 0; k < 4; ++k)
            st.mobility_raw[k].assign(m.indicators[k].begin() + offset,
                                      m.indicators[k].begin() + offset + n);
        st.mobility = smooth_mobility(st.mobility_raw, st.start, dummy_start);
        st.ifr = ifr_it->second;
        st.window_start = window->window_start;
        st.fit_start = window->fit_start;
        out.states.push_back(std::move(st));
    }
    return out;
}

} // namespace epi
