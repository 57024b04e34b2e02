#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lmt::csv {

// A delimited text table held as strings. The delimiter (comma or tab) is
// sniffed from the header row. Fields are not quoted; embedded delimiters are
// not supported by any schema in this project.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row
  char delimiter = ',';

  std::optional<std::size_t> column(std::string_view name) const;
  std::size_t require_column(std::string_view name, std::string_view table_name) const;
  std::size_t size() const { return rows.size(); }
};

Table read(const std::filesystem::path& path);
Table parse(std::string_view text, std::string_view source_name = "<memory>");

// Writes header plus rows with the given delimiter and a trailing newline.
void write(const std::filesystem::path& path, const Table& table);
std::string to_string(const Table& table);

// Shortest decimal representation that round-trips, "NA" for non-finite.
std::string format_double(double v);

bool is_missing(std::string_view field);
std::optional<double> parse_double(std::string_view field);
std::optional<std::int64_t> parse_int(std::string_view field);
std::optional<bool> parse_bool(std::string_view field);

std::string trim(std::string_view s);

}  // namespace lmt::csv
