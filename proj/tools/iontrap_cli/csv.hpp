#pragma once

#include <string>
#include <vector>

namespace iontrap::cli {

/// Numeric delimited table: '#' comments, one header row, comma separated.
struct CsvData {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  /// Index of `name`, or -1.
  int find(const std::string& name) const;
  std::vector<double> column(const std::string& name) const;
};

/// Throws ConfigError citing `source` and the line of any malformed row.
CsvData parse_csv(const std::string& text, const std::string& source);

}  // namespace iontrap::cli
