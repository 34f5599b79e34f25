#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace sqkd::cli {

using Cell = std::variant<std::string, double, long long, bool>;

/// 12 significant digits, locale independent.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

/// RFC 4180 quoting: fields containing a comma, quote or line break are
/// wrapped in quotes with embedded quotes doubled.
inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string to_text(const Cell& c) {
  if (const auto* s = std::get_if<std::string>(&c)) return csv_escape(*s);
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<bool>(c) ? "true" : "false";
}

class CsvTable {
 public:
  CsvTable() = default;
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_meta(const std::string& key, const std::string& value) { meta_.emplace_back(key, value); }
  void add_row(std::vector<Cell> row) { rows_.push_back(std::move(row)); }
  std::size_t rows() const { return rows_.size(); }
  const std::vector<Cell>& row(std::size_t i) const { return rows_.at(i); }
  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
      if (header_[i] == name) return i;
    throw std::out_of_range("no column '" + name + "'");
  }
  const std::vector<std::string>& header() const { return header_; }

  /// Metadata lines start with '#', then the header row, then data rows (CRLF-free).
  void write(std::ostream& os) const {
    for (const auto& [k, v] : meta_) os << "# " << k << ": " << v << '\n';
    for (std::size_t i = 0; i < header_.size(); ++i) os << (i ? "," : "") << csv_escape(header_[i]);
    os << '\n';
    for (const auto& row : rows_) {
      for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << to_text(row[i]);
      os << '\n';
    }
  }

 private:
  std::vector<std::string> header_;
  std::vector<std::pair<std::string, std::string>> meta_;
  std::vector<std::vector<Cell>> rows_;
};

}  // namespace sqkd::cli
