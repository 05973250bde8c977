#include "epi/csv.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>

namespace epi {

std::size_t CsvTable::column(const std::string& name) const
{
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    throw std::runtime_error("missing CSV column '" + name + "'");
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    // strip surrounding whitespace and a trailing CR from CRLF files
    for (auto& f : out) {
        const auto b = f.find_first_not_of(" \t\r");
        const auto e = f.find_last_not_of(" \t\r");
        f = (b == std::string::npos) ? std::string{} : f.substr(b, e - b + 1);
    }
    return out;
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open file: " + path);
    }
    CsvTable table;
    std::string line;
    bool first = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") {
            continue;
        }
        auto fields = split_csv_line(line);
        if (first) {
            table.header = std::move(fields);
            first = false;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected " + std::to_string(table.header.size()) +
                                     " fields, got " + std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (first) {
        throw std::runtime_error(path + ": empty file");
    }
    return table;
}

CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected)
{
    CsvTable table = read_csv(path);
    if (table.header != expected) {
        std::string want;
        for (const auto& h : expected) {
            want += want.empty() ? h : "," + h;
        }
        throw std::runtime_error(path + ": header must be exactly '" + want + "'");
    }
    return table;
}

double parse_double(const std::string& field, const std::string& context)
{
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size() || errno == ERANGE) {
        throw std::runtime_error(context + ": not a number: '" + field + "'");
    }
    return v;
}

std::int64_t parse_int(const std::string& field, const std::string& context)
{
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(field.c_str(), &end, 10);
    if (field.empty() || end != field.c_str() + field.size() || errno == ERANGE) {
        throw std::runtime_error(context + ": not an integer: '" + field + "'");
    }
    return v;
}

std::string format_double(double x, int precision)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
    return buf;
}

} // namespace epi
