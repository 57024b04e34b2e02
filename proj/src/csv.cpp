#include "lmt/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lmt/common.hpp"

namespace lmt::csv {

namespace {

std::vector<std::string> split(std::string_view line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\r' || s[b] == '\n' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\r' || s[e - 1] == '\n' || s[e - 1] == '\t')) --e;
  return std::string(s.substr(b, e - b));
}

std::optional<std::size_t> Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  return std::nullopt;
}

std::size_t Table::require_column(std::string_view name, std::string_view table_name) const {
  auto c = column(name);
  if (!c)
    throw ValidationError(std::string(table_name) + ": missing required column '" +
                          std::string(name) + "'");
  return *c;
}

Table parse(std::string_view text, std::string_view source_name) {
  Table t;
  std::size_t pos = 0, line_no = 0;
  bool have_header = false;
  // strip UTF-8 BOM
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF)
    pos = 3;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++line_no;
    pos = (nl == std::string_view::npos) ? text.size() + 1 : nl + 1;
    if (trim(line).empty()) continue;
    if (!have_header) {
      t.delimiter = line.find('\t') != std::string_view::npos ? '\t' : ',';
      t.header = split(line, t.delimiter);
      have_header = true;
      continue;
    }
    t.rows.push_back(split(line, t.delimiter));
    t.line_numbers.push_back(line_no);
  }
  if (!have_header)
    throw ValidationError(std::string(source_name) + ": header row required");
  return t;
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string to_string(const Table& table) {
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out.push_back(table.delimiter);
      out += row[i];
    }
    out.push_back('\n');
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  return out;
}

void write(const std::filesystem::path& path, const Table& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << to_string(table);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool is_missing(std::string_view f) {
  return f.empty() || f == "NA" || f == "na" || f == "NaN" || f == "nan" || f == ".";
}

std::optional<double> parse_double(std::string_view f) {
  if (is_missing(f)) return std::nullopt;
  double v = 0;
  auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc() || res.ptr != f.data() + f.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view f) {
  if (is_missing(f)) return std::nullopt;
  std::int64_t v = 0;
  auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc() || res.ptr != f.data() + f.size()) return std::nullopt;
  return v;
}

std::optional<bool> parse_bool(std::string_view f) {
  if (f == "1" || f == "true" || f == "TRUE" || f == "True" || f == "yes") return true;
  if (f == "0" || f == "false" || f == "FALSE" || f == "False" || f == "no") return false;
  return std::nullopt;
}

}  // namespace lmt::csv
