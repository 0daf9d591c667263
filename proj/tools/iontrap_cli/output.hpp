#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace iontrap::cli {

/// The pipeline produced nothing to report; maps to exit status 3.
class EmptyResult : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Output directory cannot be created or written.
class OutputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string sha256_hex(const std::string& bytes);

/// Shortest form that round-trips, so tables are byte-stable.
std::string format_number(double v);

/// One curve: an x column and one or more y columns sharing it. Column
/// names carry their unit suffix.
struct Table {
  std::vector<std::string> comments;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row);
  std::string csv() const;
};

/// Everything a run writes, held in memory until commit so that a failed run
/// leaves no partial files behind.
class OutputSet {
 public:
  void add_file(const std::string& name, std::string contents);
  void add_table(const std::string& name, const Table& table);
  const std::map<std::string, std::string>& files() const { return files_; }
  bool empty() const { return files_.empty(); }

  /// Writes every file into `dir` (created if needed) via temporary names and
  /// renames. On failure already-written files are removed.
  void commit(const std::filesystem::path& dir) const;

 private:
  std::map<std::string, std::string> files_;
};

/// Scalar results, rendered both as summary.txt and inside report.json.
class Summary {
 public:
  void add(const std::string& key, double value, const std::string& unit = "");
  void add_text(const std::string& key, const std::string& value);
  void add_flag(const std::string& key, bool value);
  std::string text(const std::string& title) const;
  nlohmann::ordered_json json() const;

 private:
  struct Row {
    std::string key;
    std::string value;
    std::string unit;
    nlohmann::ordered_json json;
  };
  std::vector<Row> rows_;
};

}  // namespace iontrap::cli
