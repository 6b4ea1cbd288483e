#pragma once

// Self-describing tabular datasets.
//
// CSV layout:
//   # tdsim-dataset 1
//   # config: {...one-line JSON...}
//   col_a,col_b,...
//   <rows>
//   # footer: {...}            (only when the footer is non-empty)
//
// JSON layout: {"config": {...}, "columns": [...], "rows": [[...]], "footer": {...}}.
// Numbers are written in shortest round-trip form; NaN is "nan" in CSV and
// null in JSON.

#include "json.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

namespace tdsim::io {

using json = nlohmann::json;
using Cell = std::variant<double, std::string>;

inline constexpr std::string_view kMagic = "# tdsim-dataset 1";

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Format { csv, json };

struct Dataset {
  json config = json::object();
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  json footer = json::object();

  bool operator==(const Dataset& other) const;
};

/// Shortest decimal string that parses back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  if (s == "nan") {
    out = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  if (s == "inf" || s == "-inf") {
    out = s[0] == '-' ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    return true;
  }
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

namespace detail {

inline bool same_cell(const Cell& a, const Cell& b) {
  if (a.index() != b.index()) return false;
  if (const double* x = std::get_if<double>(&a)) {
    const double y = std::get<double>(b);
    return (std::isnan(*x) && std::isnan(y)) || *x == y;
  }
  return std::get<std::string>(a) == std::get<std::string>(b);
}

inline std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline json cell_to_json(const Cell& c) {
  if (const double* v = std::get_if<double>(&c)) {
    if (std::isfinite(*v)) return *v;
    return nullptr;
  }
  return std::get<std::string>(c);
}

inline Cell cell_from_json(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw FormatError("unsupported cell type in JSON dataset");
}

}  // namespace detail

inline bool Dataset::operator==(const Dataset& other) const {
  if (config != other.config || columns != other.columns || footer != other.footer) return false;
  if (rows.size() != other.rows.size()) return false;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != other.rows[r].size()) return false;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (!detail::same_cell(rows[r][c], other.rows[r][c])) return false;
    }
  }
  return true;
}

inline void write_csv(std::ostream& os, const Dataset& d) {
  os << kMagic << '\n';
  os << "# config: " << d.config.dump() << '\n';
  for (std::size_t c = 0; c < d.columns.size(); ++c) os << (c ? "," : "") << d.columns[c];
  os << '\n';
  for (const auto& row : d.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) os << ',';
      if (const double* v = std::get_if<double>(&row[c])) {
        os << format_double(*v);
      } else {
        const std::string& s = std::get<std::string>(row[c]);
        if (s.find_first_of(",\n") != std::string::npos) throw FormatError("CSV cell contains a separator: " + s);
        os << s;
      }
    }
    os << '\n';
  }
  if (!d.footer.empty()) os << "# footer: " << d.footer.dump() << '\n';
}

inline void write_json(std::ostream& os, const Dataset& d) {
  json rows = json::array();
  for (const auto& row : d.rows) {
    json r = json::array();
    for (const auto& c : row) r.push_back(detail::cell_to_json(c));
    rows.push_back(std::move(r));
  }
  json doc = {{"config", d.config}, {"columns", d.columns}, {"rows", std::move(rows)}, {"footer", d.footer}};
  os << doc.dump(1) << '\n';
}

inline void write(std::ostream& os, const Dataset& d, Format f) {
  if (f == Format::csv) {
    write_csv(os, d);
  } else {
    write_json(os, d);
  }
}

inline Dataset read_csv(std::istream& is) {
  Dataset d;
  std::string line;
  if (!std::getline(is, line) || line != kMagic) throw FormatError("missing dataset header");
  constexpr std::string_view config_tag = "# config: ";
  if (!std::getline(is, line) || line.rfind(config_tag, 0) != 0) throw FormatError("missing config line");
  d.config = json::parse(line.substr(config_tag.size()));
  if (!std::getline(is, line)) throw FormatError("missing column header");
  d.columns = detail::split(line, ',');
  constexpr std::string_view footer_tag = "# footer: ";
  while (std::getline(is, line)) {
    if (line.rfind(footer_tag, 0) == 0) {
      d.footer = json::parse(line.substr(footer_tag.size()));
      continue;
    }
    if (line.empty()) continue;
    std::vector<Cell> row;
    for (std::string& field : detail::split(line, ',')) {
      double v;
      if (parse_double(field, v)) {
        row.emplace_back(v);
      } else {
        row.emplace_back(std::move(field));
      }
    }
    if (row.size() != d.columns.size()) throw FormatError("row width does not match header");
    d.rows.push_back(std::move(row));
  }
  return d;
}

inline Dataset read_json(std::istream& is) {
  const json doc = json::parse(is);
  Dataset d;
  d.config = doc.at("config");
  d.columns = doc.at("columns").get<std::vector<std::string>>();
  for (const auto& r : doc.at("rows")) {
    std::vector<Cell> row;
    for (const auto& c : r) row.push_back(detail::cell_from_json(c));
    d.rows.push_back(std::move(row));
  }
  if (doc.contains("footer")) d.footer = doc.at("footer");
  return d;
}

/// Detects the format from the first non-blank character.
inline Dataset read(std::istream& is) {
  const int c = (is >> std::ws).peek();
  if (c == '{') return read_json(is);
  return read_csv(is);
}

}  // namespace tdsim::io
