#include "csv.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "config.hpp"

namespace iontrap::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

int CsvData::find(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<double> CsvData::column(const std::string& name) const {
  const int c = find(name);
  if (c < 0) throw ConfigError("data file has no column '" + name + "'");
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[static_cast<std::size_t>(c)]);
  return out;
}

CsvData parse_csv(const std::string& text, const std::string& source) {
  CsvData d;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto cells = split(t);
    if (!header) {
      d.columns = std::move(cells);
      header = true;
      continue;
    }
    if (cells.size() != d.columns.size()) {
      throw ConfigError(source + " line " + std::to_string(line_no) + ": expected " +
                        std::to_string(d.columns.size()) + " columns");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto r = std::from_chars(c.data(), c.data() + c.size(), v);
      if (c.empty() || r.ec != std::errc() || r.ptr != c.data() + c.size() || !std::isfinite(v)) {
        throw ConfigError(source + " line " + std::to_string(line_no) + ": malformed number '" + c +
                          "'");
      }
      row.push_back(v);
    }
    d.rows.push_back(std::move(row));
  }
  if (!header) throw ConfigError(source + ": missing header row");
  return d;
}

}  // namespace iontrap::cli
