#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "iontrap/species.hpp"

namespace iontrap::cli {

/// Schema violation in a scenario file; maps to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Physical dimension of a config quantity. The key must carry one of the
/// family's unit suffixes, e.g. rf_frequency_MHz or d_um.
enum class Unit {
  length,
  frequency,      // cyclic, returned in Hz
  time,
  rate,           // 1/s
  quanta_rate,    // quanta/s
  voltage,
  energy,         // returned in joules
  temperature,
  magnetic_field,
  capacitance,
  resistance,
  electric_field,
  wavenumber,
  angle,
  drift,          // Hz/s
  curvature_per_volt,  // (rad/s)^2 / V
  linear_density,      // J/m^2
  quartic_density,     // J/m^4
};

/// A YAML mapping whose keys are checked off as they are read. Anything never
/// read is reported by Config::finish as an unknown key.
class Section {
 public:
  const std::string& path() const { return state_->path; }
  int line() const { return state_->node.Mark().line + 1; }

  bool has(const std::string& key) const;
  /// True when `base` appears with any unit suffix of `unit`.
  bool has_quantity(const std::string& base, Unit unit) const;

  Section child(const std::string& key) const;
  std::optional<Section> optional_child(const std::string& key) const;

  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  long long integer(const std::string& key, long long lo, long long hi) const;
  long long integer(const std::string& key, long long lo, long long hi, long long fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::string text(const std::string& key) const;
  std::string text(const std::string& key, const std::string& fallback) const;
  std::vector<double> numbers(const std::string& key) const;
  std::vector<std::vector<double>> matrix(const std::string& key) const;

  /// Value of `base_<suffix>` converted to SI. Exactly one suffix may appear.
  double quantity(const std::string& base, Unit unit) const;
  double quantity(const std::string& base, Unit unit, double fallback_si) const;
  std::optional<double> maybe_quantity(const std::string& base, Unit unit) const;
  std::vector<double> quantities(const std::string& base, Unit unit) const;

  /// Throws ConfigError naming the field, for semantic checks in commands.
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

 private:
  friend class Config;
  struct State {
    YAML::Node node;
    std::string path;
    std::vector<std::string> used;
    std::vector<std::shared_ptr<State>> children;
  };
  explicit Section(std::shared_ptr<State> s) : state_(std::move(s)) {}

  YAML::Node lookup(const std::string& key) const;
  std::string field(const std::string& key) const;
  int key_line(const std::string& key) const;
  std::optional<std::pair<std::string, double>> find_quantity(const std::string& base, Unit unit) const;

  std::shared_ptr<State> state_;
};

class Config {
 public:
  /// Parses `path`; syntax errors become ConfigError with the YAML position.
  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text, const std::filesystem::path& origin);

  Section root() const { return Section(root_); }
  const std::string& text() const { return text_; }
  const std::filesystem::path& path() const { return path_; }

  /// Relative input paths are taken relative to the config file.
  std::filesystem::path resolve(const std::string& p) const;

  /// Reports the first key (in document order) that no command consumed.
  void finish() const;

 private:
  std::shared_ptr<Section::State> root_;
  std::string text_;
  std::filesystem::path path_;
};

/// `ion:` block: either {species: yb171 | yb172} or {mass_amu, charge}.
IonSpecies read_species(const Section& parent);

}  // namespace iontrap::cli
