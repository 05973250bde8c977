#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace epi {

/// Minimal CSV support for the fixed schemas this project reads and writes.
/// No quoting or embedded separators; all bundled and emitted files are plain.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index for a header name; throws if absent.
    std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

/// Requires the file's header to equal `expected` exactly (order and spelling).
CsvTable read_csv(const std::string& path, const std::vector<std::string>& expected);

std::vector<std::string> split_csv_line(const std::string& line);

double parse_double(const std::string& field, const std::string& context);
std::int64_t parse_int(const std::string& field, const std::string& context);

/// Fixed-format floating-point rendering so report files are byte-stable.
std::string format_double(double x, int precision = 10);

} // namespace epi
