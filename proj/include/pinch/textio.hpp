#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace pinch {

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

// Fixed-point with the given fractional digits (trace timestamps).
std::string format_fixed(double v, int digits);

// Strict double parse; throws std::runtime_error on trailing garbage.
double parse_double(const std::string& s);

std::vector<std::string> split_csv(const std::string& line);

// Plot-data table: one header line, comma-separated numeric rows.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

void write_table(const std::filesystem::path& path, const Table& table);
Table read_table(const std::filesystem::path& path);

}  // namespace pinch
