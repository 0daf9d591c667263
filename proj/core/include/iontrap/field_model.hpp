#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "iontrap/species.hpp"
#include "iontrap/trap_model.hpp"

namespace iontrap::trap {

using Vec3 = Eigen::Vector3d;

/// Analytic quadrupole with a cylindrical hard wall of radius `wall_radius`
/// about the trap axis. Static fields come from the twist and endcap terms of
/// the TrapConfig unless `include_static` is cleared.
struct IdealQuadrupole {
  TrapConfig trap;
  double wall_radius = 0.0;  // m
  bool include_static = true;
};

/// Rectilinear grid of RF field amplitude vectors (V/m at the nominal drive)
/// and static potential (V). Axes are strictly increasing; nodes are stored
/// row-major with the first axis slowest. In 2D the grid spans the radial
/// (x, y) plane and the z coordinate of a query is ignored.
class GridMap {
 public:
  enum class Order { linear = 1, cubic = 3 };

  GridMap(std::vector<std::vector<double>> axes, std::vector<Vec3> rf_field,
          std::vector<double> static_potential, Order order = Order::cubic);

  std::size_t dims() const { return axes_.size(); }
  const std::vector<double>& axis(std::size_t i) const { return axes_.at(i); }
  std::size_t node_count() const { return rf_field_.size(); }
  Order order() const { return order_; }
  void set_order(Order order) { order_ = order; }

  bool contains(const Vec3& r) const;
  Vec3 rf_field(const Vec3& r) const;
  double static_potential(const Vec3& r) const;
  /// -grad(static potential), from the analytic derivative of the interpolant.
  Vec3 static_field(const Vec3& r) const;

  const Vec3& node_rf_field(std::size_t flat_index) const { return rf_field_[flat_index]; }
  double node_static_potential(std::size_t flat_index) const { return static_potential_[flat_index]; }

  /// Sample an ideal quadrupole onto a grid (used to validate interpolation).
  static GridMap sample(const IdealQuadrupole& model, std::vector<std::vector<double>> axes,
                        Order order = Order::cubic);

 private:
  struct Stencil {
    std::array<std::size_t, 4> index{};
    std::array<double, 4> weight{};
    std::array<double, 4> dweight{};
    int size = 0;
  };
  Stencil stencil(std::size_t axis, double x) const;
  template <typename F>
  void accumulate(const Vec3& r, F&& f) const;

  std::vector<std::vector<double>> axes_;
  std::vector<std::size_t> strides_;
  std::vector<Vec3> rf_field_;
  std::vector<double> static_potential_;
  Order order_;
};

/// Evaluable trap field: either analytic or grid-mapped, plus the RF drive
/// frequency the RF amplitudes refer to.
class FieldModel {
 public:
  static FieldModel ideal_quadrupole(const TrapConfig& trap, double wall_radius,
                                     bool include_static = true);
  static FieldModel grid(GridMap map, double omega_rf);

  double omega_rf() const { return omega_rf_; }
  bool is_ideal() const { return std::holds_alternative<IdealQuadrupole>(geometry_); }
  const IdealQuadrupole* ideal() const { return std::get_if<IdealQuadrupole>(&geometry_); }
  const GridMap* grid_map() const { return std::get_if<GridMap>(&geometry_); }

  /// Domain test: inside the hard wall, or inside the grid bounding box.
  bool inside(const Vec3& r) const;
  /// RF field amplitude E_RF(r); the instantaneous field is E_RF cos(Omega t).
  Vec3 rf_field(const Vec3& r) const;
  /// Static electric field. For the analytic model this is the twist term
  /// only; the endcap curvature is specified as a frequency and enters through
  /// static_acceleration.
  Vec3 static_field(const Vec3& r) const;
  /// Acceleration of `ion` due to all static fields.
  Vec3 static_acceleration(const Vec3& r, const IonSpecies& ion) const;
  /// Gradient of |E_RF|^2 (V^2/m^3).
  Vec3 rf_field_sq_gradient(const Vec3& r) const;

 private:
  using Geometry = std::variant<IdealQuadrupole, GridMap>;
  FieldModel(Geometry g, double omega_rf) : geometry_(std::move(g)), omega_rf_(omega_rf) {}

  Geometry geometry_;
  double omega_rf_;
};

/// Pseudopotential U = q^2 |E_RF|^2 / (4 m Omega^2), joules.
/// Throws InvalidInput outside the field domain.
double pseudopotential_energy(const FieldModel& field, const Vec3& position,
                              const IonSpecies& ion);

/// Delimited field-map file.
///
///   # comments allowed
///   x[m],y[m],Ex[V/m],Ey[V/m],phi[V]
///   ...one node per row, first axis slowest...
///
/// A z[m] / Ez[V/m] column pair makes the map three-dimensional. The loader
/// checks the header, that each axis is strictly increasing, that nodes follow
/// row-major order and that every node is present exactly once.
GridMap read_field_map(std::istream& in, GridMap::Order order = GridMap::Order::cubic);
GridMap read_field_map_file(const std::string& path, GridMap::Order order = GridMap::Order::cubic);
void write_field_map(std::ostream& out, const GridMap& map);

}  // namespace iontrap::trap
