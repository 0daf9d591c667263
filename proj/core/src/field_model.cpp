#include "iontrap/field_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace iontrap::trap {

namespace {

Vec3 ideal_rf_field(const IdealQuadrupole& m, const Vec3& r) {
  const double g = m.trap.kappa * m.trap.v_rf / (m.trap.d * m.trap.d);
  return {-g * r.x(), g * r.y(), 0.0};
}

Vec3 ideal_twist_field(const IdealQuadrupole& m, const Vec3& r) {
  if (!m.include_static) return Vec3::Zero();
  const double g = m.trap.kappa * m.trap.v_twist / (m.trap.d * m.trap.d);
  return {-g * r.x(), g * r.y(), 0.0};
}

}  // namespace

// ---------------------------------------------------------------------------
// GridMap

GridMap::GridMap(std::vector<std::vector<double>> axes, std::vector<Vec3> rf_field,
                 std::vector<double> static_potential, Order order)
    : axes_(std::move(axes)),
      rf_field_(std::move(rf_field)),
      static_potential_(std::move(static_potential)),
      order_(order) {
  detail::require(axes_.size() == 2 || axes_.size() == 3, "field map must be 2D or 3D");
  std::size_t count = 1;
  for (const auto& a : axes_) {
    detail::require(a.size() >= 2, "every field-map axis needs at least two nodes");
    for (std::size_t i = 1; i < a.size(); ++i) {
      detail::require(a[i] > a[i - 1], "field-map axes must be strictly increasing");
    }
    count *= a.size();
  }
  detail::require(rf_field_.size() == count && static_potential_.size() == count,
                  "field-map node arrays do not match the axis sizes");
  strides_.assign(axes_.size(), 1);
  for (std::size_t i = axes_.size() - 1; i-- > 0;) {
    strides_[i] = strides_[i + 1] * axes_[i + 1].size();
  }
}

bool GridMap::contains(const Vec3& r) const {
  for (std::size_t i = 0; i < axes_.size(); ++i) {
    const double x = r[static_cast<Eigen::Index>(i)];
    if (!(x >= axes_[i].front() && x <= axes_[i].back())) return false;
  }
  return true;
}

GridMap::Stencil GridMap::stencil(std::size_t axis, double x) const {
  const auto& a = axes_[axis];
  const std::size_t n = a.size();
  std::size_t cell =
      static_cast<std::size_t>(std::upper_bound(a.begin(), a.end(), x) - a.begin());
  cell = cell == 0 ? 0 : cell - 1;
  cell = std::min(cell, n - 2);

  Stencil s;
  if (order_ == Order::linear || n < 4) {
    const double h = a[cell + 1] - a[cell];
    const double t = (x - a[cell]) / h;
    s.size = 2;
    s.index = {cell, cell + 1, 0, 0};
    s.weight = {1.0 - t, t, 0.0, 0.0};
    s.dweight = {-1.0 / h, 1.0 / h, 0.0, 0.0};
    return s;
  }

  const std::size_t start = std::min(cell == 0 ? 0 : cell - 1, n - 4);
  s.size = 4;
  for (int k = 0; k < 4; ++k) s.index[k] = start + static_cast<std::size_t>(k);
  for (int k = 0; k < 4; ++k) {
    const double xk = a[s.index[k]];
    double denom = 1.0;
    double num = 1.0;
    for (int j = 0; j < 4; ++j) {
      if (j == k) continue;
      denom *= xk - a[s.index[j]];
      num *= x - a[s.index[j]];
    }
    double dnum = 0.0;
    for (int m = 0; m < 4; ++m) {
      if (m == k) continue;
      double p = 1.0;
      for (int j = 0; j < 4; ++j) {
        if (j == k || j == m) continue;
        p *= x - a[s.index[j]];
      }
      dnum += p;
    }
    s.weight[k] = num / denom;
    s.dweight[k] = dnum / denom;
  }
  return s;
}

template <typename F>
void GridMap::accumulate(const Vec3& r, F&& f) const {
  if (!contains(r)) throw InvalidInput("position outside the field-map domain");
  const Stencil sx = stencil(0, r.x());
  const Stencil sy = stencil(1, r.y());
  if (axes_.size() == 2) {
    for (int i = 0; i < sx.size; ++i) {
      for (int j = 0; j < sy.size; ++j) {
        const std::size_t flat = sx.index[i] * strides_[0] + sy.index[j] * strides_[1];
        f(flat, sx.weight[i] * sy.weight[j],
          Vec3{sx.dweight[i] * sy.weight[j], sx.weight[i] * sy.dweight[j], 0.0});
      }
    }
    return;
  }
  const Stencil sz = stencil(2, r.z());
  for (int i = 0; i < sx.size; ++i) {
    for (int j = 0; j < sy.size; ++j) {
      for (int k = 0; k < sz.size; ++k) {
        const std::size_t flat =
            sx.index[i] * strides_[0] + sy.index[j] * strides_[1] + sz.index[k] * strides_[2];
        const double wx = sx.weight[i], wy = sy.weight[j], wz = sz.weight[k];
        f(flat, wx * wy * wz,
          Vec3{sx.dweight[i] * wy * wz, wx * sy.dweight[j] * wz, wx * wy * sz.dweight[k]});
      }
    }
  }
}

Vec3 GridMap::rf_field(const Vec3& r) const {
  Vec3 e = Vec3::Zero();
  accumulate(r, [&](std::size_t flat, double w, const Vec3&) { e += w * rf_field_[flat]; });
  return e;
}

double GridMap::static_potential(const Vec3& r) const {
  double phi = 0.0;
  accumulate(r, [&](std::size_t flat, double w, const Vec3&) { phi += w * static_potential_[flat]; });
  return phi;
}

Vec3 GridMap::static_field(const Vec3& r) const {
  Vec3 grad = Vec3::Zero();
  accumulate(r, [&](std::size_t flat, double, const Vec3& dw) {
    grad += dw * static_potential_[flat];
  });
  return -grad;
}

GridMap GridMap::sample(const IdealQuadrupole& model, std::vector<std::vector<double>> axes,
                        Order order) {
  std::size_t count = 1;
  for (const auto& a : axes) count *= a.size();
  std::vector<Vec3> rf(count);
  std::vector<double> phi(count);

  const double gt = model.trap.kappa * model.trap.v_twist / (model.trap.d * model.trap.d);
  const bool three_d = axes.size() == 3;
  std::size_t flat = 0;
  const std::size_t nz = three_d ? axes[2].size() : 1;
  for (double x : axes[0]) {
    for (double y : axes[1]) {
      for (std::size_t k = 0; k < nz; ++k) {
        const Vec3 r{x, y, three_d ? axes[2][k] : 0.0};
        rf[flat] = ideal_rf_field(model, r);
        phi[flat] = model.include_static ? 0.5 * gt * (x * x - y * y) : 0.0;
        ++flat;
      }
    }
  }
  return GridMap(std::move(axes), std::move(rf), std::move(phi), order);
}

// ---------------------------------------------------------------------------
// FieldModel

FieldModel FieldModel::ideal_quadrupole(const TrapConfig& trap, double wall_radius,
                                        bool include_static) {
  trap.validate();
  detail::require(std::isfinite(wall_radius) && wall_radius > 0.0,
                  "hard-wall radius must be positive");
  return FieldModel(IdealQuadrupole{trap, wall_radius, include_static}, trap.omega_rf);
}

FieldModel FieldModel::grid(GridMap map, double omega_rf) {
  detail::require(std::isfinite(omega_rf) && omega_rf > 0.0, "RF drive frequency must be positive");
  return FieldModel(std::move(map), omega_rf);
}

bool FieldModel::inside(const Vec3& r) const {
  if (const auto* q = ideal()) return std::hypot(r.x(), r.y()) < q->wall_radius;
  return grid_map()->contains(r);
}

Vec3 FieldModel::rf_field(const Vec3& r) const {
  if (const auto* q = ideal()) return ideal_rf_field(*q, r);
  return grid_map()->rf_field(r);
}

Vec3 FieldModel::static_field(const Vec3& r) const {
  if (const auto* q = ideal()) return ideal_twist_field(*q, r);
  return grid_map()->static_field(r);
}

Vec3 FieldModel::static_acceleration(const Vec3& r, const IonSpecies& ion) const {
  Vec3 acc = (ion.charge / ion.mass) * static_field(r);
  if (const auto* q = ideal(); q && q->include_static) {
    const double wz2 = q->trap.axial_curvature_per_volt * q->trap.v_endcap;
    acc += wz2 * Vec3{0.5 * r.x(), 0.5 * r.y(), -r.z()};
  }
  return acc;
}

Vec3 FieldModel::rf_field_sq_gradient(const Vec3& r) const {
  if (const auto* q = ideal()) {
    const double g = q->trap.kappa * q->trap.v_rf / (q->trap.d * q->trap.d);
    return {2.0 * g * g * r.x(), 2.0 * g * g * r.y(), 0.0};
  }
  const GridMap& map = *grid_map();
  // Central differences on the interpolant; one-sided at the domain edge.
  Vec3 grad = Vec3::Zero();
  for (std::size_t i = 0; i < map.dims(); ++i) {
    const auto& a = map.axis(i);
    const double h = 1e-4 * (a.back() - a.front()) / static_cast<double>(a.size() - 1);
    Vec3 lo = r, hi = r;
    const auto idx = static_cast<Eigen::Index>(i);
    lo[idx] = std::max(r[idx] - h, a.front());
    hi[idx] = std::min(r[idx] + h, a.back());
    grad[idx] = (map.rf_field(hi).squaredNorm() - map.rf_field(lo).squaredNorm()) /
                (hi[idx] - lo[idx]);
  }
  return grad;
}

double pseudopotential_energy(const FieldModel& field, const Vec3& position,
                              const IonSpecies& ion) {
  ion.validate();
  if (!field.inside(position)) throw InvalidInput("position outside the field domain");
  const double w = field.omega_rf();
  return ion.charge * ion.charge * field.rf_field(position).squaredNorm() /
         (4.0 * ion.mass * w * w);
}

// ---------------------------------------------------------------------------
// Field-map I/O

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw InvalidInput("field map line " + std::to_string(line_no) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

GridMap read_field_map(std::istream& in, GridMap::Order order) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    header = split(t);
    break;
  }
  if (header.empty()) throw InvalidInput("field map: missing header row");

  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!column.emplace(header[i], i).second) {
      throw InvalidInput("field map: duplicate column '" + header[i] + "'");
    }
  }
  const bool three_d = column.count("z[m]") > 0;
  std::vector<std::string> required = {"x[m]", "y[m]", "Ex[V/m]", "Ey[V/m]", "phi[V]"};
  if (three_d) {
    required.push_back("z[m]");
    required.push_back("Ez[V/m]");
  }
  for (const auto& name : required) {
    if (!column.count(name)) throw InvalidInput("field map: missing column '" + name + "'");
  }
  if (column.size() != required.size()) {
    for (const auto& [name, idx] : column) {
      if (std::find(required.begin(), required.end(), name) == required.end()) {
        throw InvalidInput("field map: unknown column '" + name + "'");
      }
    }
  }

  const std::size_t dims = three_d ? 3 : 2;
  const char* axis_names[] = {"x[m]", "y[m]", "z[m]"};
  const char* field_names[] = {"Ex[V/m]", "Ey[V/m]", "Ez[V/m]"};

  std::vector<std::array<double, 3>> coords;
  std::vector<std::size_t> row_lines;
  std::vector<Vec3> rf;
  std::vector<double> phi;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = split(t);
    if (cells.size() != header.size()) {
      throw InvalidInput("field map line " + std::to_string(line_no) + ": expected " +
                         std::to_string(header.size()) + " columns");
    }
    std::array<double, 3> c{0.0, 0.0, 0.0};
    Vec3 e = Vec3::Zero();
    for (std::size_t d = 0; d < dims; ++d) {
      c[d] = parse_double(cells[column.at(axis_names[d])], line_no);
      e[static_cast<Eigen::Index>(d)] = parse_double(cells[column.at(field_names[d])], line_no);
    }
    coords.push_back(c);
    row_lines.push_back(line_no);
    rf.push_back(e);
    phi.push_back(parse_double(cells[column.at("phi[V]")], line_no));
  }
  if (coords.empty()) throw InvalidInput("field map: no data rows");

  std::vector<std::vector<double>> axes(dims);
  for (std::size_t d = 0; d < dims; ++d) {
    for (const auto& c : coords) axes[d].push_back(c[d]);
    std::sort(axes[d].begin(), axes[d].end());
    axes[d].erase(std::unique(axes[d].begin(), axes[d].end()), axes[d].end());
    if (axes[d].size() < 2) {
      throw InvalidInput(std::string("field map: axis ") + axis_names[d] + " has fewer than 2 nodes");
    }
  }
  std::size_t expected = 1;
  for (const auto& a : axes) expected *= a.size();
  if (coords.size() != expected) {
    throw InvalidInput("field map incomplete: " + std::to_string(coords.size()) + " rows for a " +
                       std::to_string(expected) + "-node grid");
  }

  // Row-major, first axis slowest.
  std::vector<std::size_t> sizes;
  for (const auto& a : axes) sizes.push_back(a.size());
  for (std::size_t row = 0; row < coords.size(); ++row) {
    std::size_t rem = row;
    for (std::size_t d = dims; d-- > 0;) {
      const std::size_t idx = rem % sizes[d];
      rem /= sizes[d];
      if (coords[row][d] != axes[d][idx]) {
        throw InvalidInput("field map line " + std::to_string(row_lines[row]) +
                           ": node out of row-major order or duplicated");
      }
    }
  }
  return GridMap(std::move(axes), std::move(rf), std::move(phi), order);
}

GridMap read_field_map_file(const std::string& path, GridMap::Order order) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open field map '" + path + "'");
  return read_field_map(in, order);
}

void write_field_map(std::ostream& out, const GridMap& map) {
  const bool three_d = map.dims() == 3;
  out << (three_d ? "x[m],y[m],z[m],Ex[V/m],Ey[V/m],Ez[V/m],phi[V]\n"
                  : "x[m],y[m],Ex[V/m],Ey[V/m],phi[V]\n");
  out << std::setprecision(17);
  const std::size_t nz = three_d ? map.axis(2).size() : 1;
  std::size_t flat = 0;
  for (double x : map.axis(0)) {
    for (double y : map.axis(1)) {
      for (std::size_t k = 0; k < nz; ++k) {
        const Vec3& e = map.node_rf_field(flat);
        out << x << ',' << y << ',';
        if (three_d) out << map.axis(2)[k] << ',';
        out << e.x() << ',' << e.y() << ',';
        if (three_d) out << e.z() << ',';
        out << map.node_static_potential(flat) << '\n';
        ++flat;
      }
    }
  }
}

}  // namespace iontrap::trap
