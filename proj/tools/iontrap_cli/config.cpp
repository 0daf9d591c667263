#include "config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <utility>

#include "iontrap/constants.hpp"

namespace iontrap::cli {

namespace {

struct Suffix {
  const char* name;
  double scale;
};

std::vector<Suffix> suffixes(Unit unit) {
  using namespace iontrap::constants;
  switch (unit) {
    case Unit::length: return {{"m", 1.0}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}};
    case Unit::frequency: return {{"Hz", 1.0}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}};
    case Unit::time: return {{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}};
    case Unit::rate: return {{"per_s", 1.0}};
    case Unit::quanta_rate: return {{"quanta_per_s", 1.0}};
    case Unit::voltage: return {{"V", 1.0}, {"mV", 1e-3}, {"kV", 1e3}};
    case Unit::energy: return {{"J", 1.0}, {"eV", joules_per_ev}, {"meV", 1e-3 * joules_per_ev}};
    case Unit::temperature: return {{"K", 1.0}};
    case Unit::magnetic_field: return {{"T", 1.0}, {"mT", 1e-3}, {"G", 1e-4}};
    case Unit::capacitance: return {{"F", 1.0}, {"nF", 1e-9}, {"pF", 1e-12}};
    case Unit::resistance: return {{"ohm", 1.0}};
    case Unit::electric_field: return {{"V_per_m", 1.0}};
    case Unit::wavenumber: return {{"rad_per_m", 1.0}, {"rad_per_um", 1e6}};
    case Unit::angle: return {{"rad", 1.0}, {"deg", pi / 180.0}};
    case Unit::drift: return {{"Hz_per_s", 1.0}};
    case Unit::curvature_per_volt: return {{"rad2_per_s2_per_V", 1.0}};
    case Unit::linear_density: return {{"J_per_m2", 1.0}};
    case Unit::quartic_density: return {{"J_per_m4", 1.0}};
  }
  return {};
}

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

double as_number(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) {
    throw ConfigError("line " + std::to_string(n.Mark().line + 1) + ", field '" + field +
                      "': expected a number");
  }
  const std::string s = n.Scalar();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (...) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw ConfigError("line " + std::to_string(n.Mark().line + 1) + ", field '" + field +
                      "': expected a finite number, got '" + s + "'");
  }
  return v;
}

}  // namespace

YAML::Node Section::lookup(const std::string& key) const {
  if (std::find(state_->used.begin(), state_->used.end(), key) == state_->used.end()) {
    state_->used.push_back(key);
  }
  const YAML::Node& n = state_->node;
  return n[key];
}

std::string Section::field(const std::string& key) const { return join_path(state_->path, key); }

int Section::key_line(const std::string& key) const {
  for (auto it = state_->node.begin(); it != state_->node.end(); ++it) {
    if (it->first.Scalar() == key) return it->first.Mark().line + 1;
  }
  // A quantity base name: match its unit-suffixed spelling.
  for (auto it = state_->node.begin(); it != state_->node.end(); ++it) {
    if (it->first.Scalar().rfind(key + "_", 0) == 0) return it->first.Mark().line + 1;
  }
  return line();
}

void Section::fail(const std::string& key, const std::string& message) const {
  throw ConfigError("line " + std::to_string(key_line(key)) + ", field '" + field(key) + "': " +
                    message);
}

bool Section::has(const std::string& key) const {
  const YAML::Node& n = state_->node;
  return static_cast<bool>(n[key]);
}

bool Section::has_quantity(const std::string& base, Unit unit) const {
  for (const auto& s : suffixes(unit)) {
    if (has(base + "_" + s.name)) return true;
  }
  return false;
}

Section Section::child(const std::string& key) const {
  auto c = optional_child(key);
  if (!c) {
    throw ConfigError("line " + std::to_string(line()) + ": missing required section '" +
                      field(key) + "'");
  }
  return *c;
}

std::optional<Section> Section::optional_child(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  const YAML::Node n = lookup(key);
  if (!n.IsMap()) fail(key, "expected a mapping");
  auto s = std::make_shared<State>();
  s->node = n;
  s->path = field(key);
  state_->children.push_back(s);
  return Section(s);
}

double Section::number(const std::string& key) const {
  if (!has(key)) {
    throw ConfigError("line " + std::to_string(line()) + ": missing required field '" +
                      field(key) + "'");
  }
  return as_number(lookup(key), field(key));
}

double Section::number(const std::string& key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

long long Section::integer(const std::string& key, long long lo, long long hi) const {
  const double v = number(key);
  if (v != std::floor(v)) fail(key, "expected an integer");
  if (v < static_cast<double>(lo) || v > static_cast<double>(hi)) {
    fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return static_cast<long long>(v);
}

long long Section::integer(const std::string& key, long long lo, long long hi,
                           long long fallback) const {
  return has(key) ? integer(key, lo, hi) : fallback;
}

bool Section::flag(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const YAML::Node n = lookup(key);
  const std::string s = n.IsScalar() ? n.Scalar() : "";
  if (s == "true" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "no" || s == "off") return false;
  fail(key, "expected true or false");
}

std::string Section::text(const std::string& key) const {
  if (!has(key)) {
    throw ConfigError("line " + std::to_string(line()) + ": missing required field '" +
                      field(key) + "'");
  }
  const YAML::Node n = lookup(key);
  if (!n.IsScalar()) fail(key, "expected a string");
  return n.Scalar();
}

std::string Section::text(const std::string& key, const std::string& fallback) const {
  return has(key) ? text(key) : fallback;
}

std::vector<double> Section::numbers(const std::string& key) const {
  if (!has(key)) {
    throw ConfigError("line " + std::to_string(line()) + ": missing required field '" +
                      field(key) + "'");
  }
  const YAML::Node n = lookup(key);
  if (!n.IsSequence()) fail(key, "expected a list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    out.push_back(as_number(n[i], field(key) + "[" + std::to_string(i) + "]"));
  }
  return out;
}

std::vector<std::vector<double>> Section::matrix(const std::string& key) const {
  if (!has(key)) {
    throw ConfigError("line " + std::to_string(line()) + ": missing required field '" +
                      field(key) + "'");
  }
  const YAML::Node n = lookup(key);
  if (!n.IsSequence()) fail(key, "expected a list of rows");
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (!n[i].IsSequence()) fail(key, "row " + std::to_string(i) + " is not a list");
    std::vector<double> row;
    for (std::size_t j = 0; j < n[i].size(); ++j) {
      row.push_back(as_number(n[i][j], field(key) + "[" + std::to_string(i) + "][" +
                                           std::to_string(j) + "]"));
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::optional<std::pair<std::string, double>> Section::find_quantity(const std::string& base,
                                                                     Unit unit) const {
  std::optional<std::pair<std::string, double>> found;
  for (const auto& s : suffixes(unit)) {
    const std::string key = base + "_" + s.name;
    if (!has(key)) continue;
    if (found) fail(key, "conflicts with '" + field(found->first) + "'; give one unit only");
    found.emplace(key, s.scale);
  }
  return found;
}

double Section::quantity(const std::string& base, Unit unit) const {
  const auto q = maybe_quantity(base, unit);
  if (!q) {
    throw ConfigError("line " + std::to_string(line()) + ": missing required field '" +
                      field(base) + "_<unit>' (e.g. " + base + "_" + suffixes(unit).front().name +
                      ")");
  }
  return *q;
}

double Section::quantity(const std::string& base, Unit unit, double fallback_si) const {
  return maybe_quantity(base, unit).value_or(fallback_si);
}

std::optional<double> Section::maybe_quantity(const std::string& base, Unit unit) const {
  if (has(base)) {
    fail(base, "physical quantities need a unit suffix, e.g. '" + base + "_" +
                   suffixes(unit).front().name + "'");
  }
  const auto q = find_quantity(base, unit);
  if (!q) return std::nullopt;
  return as_number(lookup(q->first), field(q->first)) * q->second;
}

std::vector<double> Section::quantities(const std::string& base, Unit unit) const {
  if (has(base)) {
    fail(base, "physical quantities need a unit suffix, e.g. '" + base + "_" +
                   suffixes(unit).front().name + "'");
  }
  const auto q = find_quantity(base, unit);
  if (!q) {
    throw ConfigError("line " + std::to_string(line()) + ": missing required field '" +
                      field(base) + "_<unit>'");
  }
  std::vector<double> v = numbers(q->first);
  for (double& x : v) x *= q->second;
  return v;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

Config Config::parse(const std::string& text, const std::filesystem::path& origin) {
  Config c;
  c.text_ = text;
  c.path_ = origin;
  c.root_ = std::make_shared<Section::State>();
  try {
    c.root_->node = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("line " + std::to_string(e.mark.line + 1) + ", column " +
                      std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  if (!c.root_->node.IsMap()) throw ConfigError("line 1: config must be a mapping of keys");
  return c;
}

std::filesystem::path Config::resolve(const std::string& p) const {
  const std::filesystem::path q(p);
  if (q.is_absolute()) return q;
  return path_.parent_path() / q;
}

void Config::finish() const {
  // Report the earliest unknown key in the document across all sections.
  std::vector<const Section::State*> stack{root_.get()};
  int best_line = 0;
  std::string best;
  while (!stack.empty()) {
    const auto* s = stack.back();
    stack.pop_back();
    for (auto it = s->node.begin(); it != s->node.end(); ++it) {
      const std::string key = it->first.Scalar();
      if (std::find(s->used.begin(), s->used.end(), key) != s->used.end()) continue;
      const int line = it->first.Mark().line + 1;
      if (best.empty() || line < best_line) {
        best_line = line;
        best = "line " + std::to_string(line) + ": unknown key '" + join_path(s->path, key) + "'";
      }
    }
    for (const auto& c : s->children) stack.push_back(c.get());
  }
  if (!best.empty()) throw ConfigError(best);
}

IonSpecies read_species(const Section& parent) {
  const auto ion = parent.optional_child("ion");
  if (!ion) return species::ytterbium_171();
  if (ion->has("species")) {
    const std::string name = ion->text("species");
    if (name == "yb171") return species::ytterbium_171();
    if (name == "yb172") return species::ytterbium_172();
    ion->fail("species", "unknown species '" + name + "' (known: yb171, yb172)");
  }
  const double mass = ion->number("mass_amu");
  const auto charge = ion->integer("charge", -10, 10, 1);
  if (!(mass > 0.0)) ion->fail("mass_amu", "must be positive");
  if (charge == 0) ion->fail("charge", "must be non-zero");
  return IonSpecies::from_amu(mass, static_cast<int>(charge));
}

}  // namespace iontrap::cli
