#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "iontrap/field_model.hpp"
#include "iontrap/rng.hpp"
#include "iontrap/trajectory.hpp"

namespace {

using namespace iontrap;
using namespace iontrap::trap;
using iontrap::testing::blade_trap;
using iontrap::testing::yb171;

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return v;
}

IdealQuadrupole twisted_model() {
  IdealQuadrupole m;
  m.trap = blade_trap();
  m.trap.v_twist = 0.7;
  m.wall_radius = m.trap.d;
  return m;
}

TEST(GridMap, CubicInterpolationIsExactForQuadrupoles) {
  const IdealQuadrupole m = twisted_model();
  const double r = 100e-6;
  const GridMap g = GridMap::sample(m, {linspace(-r, r, 9), linspace(-r, r, 11)});
  const FieldModel ideal = FieldModel::ideal_quadrupole(m.trap, m.wall_radius);
  Rng rng(3);
  for (int k = 0; k < 500; ++k) {
    const Vec3 p{r * (2 * rng.uniform() - 1), r * (2 * rng.uniform() - 1), 0.0};
    EXPECT_LT((g.rf_field(p) - ideal.rf_field(p)).norm(), 1e-7 * ideal.rf_field(Vec3{r, 0, 0}).norm());
    EXPECT_LT((g.static_field(p) - ideal.static_field(p)).norm(),
              1e-7 * ideal.static_field(Vec3{r, 0, 0}).norm());
  }
}

TEST(GridMap, LinearInterpolationErrorShrinksQuadratically) {
  const IdealQuadrupole m = twisted_model();
  const double r = 100e-6;
  const double g2 = 0.5 * m.trap.kappa * m.trap.v_twist / (m.trap.d * m.trap.d);
  double prev = 0.0;
  for (int n : {6, 11, 21, 41}) {
    const GridMap g =
        GridMap::sample(m, {linspace(-r, r, n), linspace(-r, r, n)}, GridMap::Order::linear);
    Rng rng(4);
    double err = 0.0;
    for (int k = 0; k < 400; ++k) {
      const Vec3 p{r * (2 * rng.uniform() - 1), r * (2 * rng.uniform() - 1), 0.0};
      const double exact = g2 * (p.x() * p.x() - p.y() * p.y());
      err = std::max(err, std::abs(g.static_potential(p) - exact));
    }
    // Halving the spacing should cut the worst-case error about fourfold.
    if (prev > 0.0) EXPECT_LT(err, 0.35 * prev) << n;
    prev = err;
  }
}

TEST(GridMap, ThreeDimensionalSampleMatchesTwoDimensional) {
  const IdealQuadrupole m = twisted_model();
  const double r = 60e-6;
  const GridMap g2 = GridMap::sample(m, {linspace(-r, r, 7), linspace(-r, r, 7)});
  const GridMap g3 = GridMap::sample(m, {linspace(-r, r, 7), linspace(-r, r, 7), linspace(-r, r, 5)});
  const Vec3 p{11e-6, 23e-6, 5e-6};
  EXPECT_LT((g2.rf_field(p) - g3.rf_field(p)).norm(), 1e-6);
  EXPECT_FALSE(g3.contains(Vec3{0, 0, 2 * r}));
  EXPECT_TRUE(g2.contains(Vec3{0, 0, 2 * r}));
}

TEST(FieldMapIo, RoundTripPreservesNodes) {
  const IdealQuadrupole m = twisted_model();
  const GridMap g = GridMap::sample(m, {linspace(-5e-5, 5e-5, 5), linspace(-4e-5, 4e-5, 4)});
  std::stringstream ss;
  write_field_map(ss, g);
  const GridMap back = read_field_map(ss);
  ASSERT_EQ(back.node_count(), g.node_count());
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    EXPECT_EQ(back.node_rf_field(i), g.node_rf_field(i));
    EXPECT_EQ(back.node_static_potential(i), g.node_static_potential(i));
  }
}

TEST(FieldMapIo, RejectsMalformedMaps) {
  auto load = [](const std::string& text) {
    std::istringstream in(text);
    return read_field_map(in);
  };
  const std::string header = "x[m],y[m],Ex[V/m],Ey[V/m],phi[V]\n";
  EXPECT_THROW(load(""), InvalidInput);
  EXPECT_THROW(load("x[m],y[m],Ex[V/m]\n0,0,0\n"), InvalidInput);
  EXPECT_THROW(load(header + "0,0,0,0,0\n0,1,0,0,0\n1,0,0,0,0\n"), InvalidInput);  // incomplete
  EXPECT_THROW(load(header + "0,0,0,0,0\n1,0,0,0,0\n0,1,0,0,0\n1,1,0,0,0\n"),
               InvalidInput);  // column-major
  EXPECT_THROW(load(header + "0,0,0,0,0\n0,1,0,0,x\n1,0,0,0,0\n1,1,0,0,0\n"), InvalidInput);
  EXPECT_THROW(load("x[m],y[m],Ex[V/m],Ey[V/m],phi[V],extra\n0,0,0,0,0,0\n"), InvalidInput);
  EXPECT_NO_THROW(load("# comment\n" + header + "0,0,0,0,0\n0,1,0,0,0\n1,0,0,0,0\n1,1,0,0,0\n"));
}

TEST(Pseudopotential, WallValueMatchesClosedForm) {
  const TrapConfig t = blade_trap(71.0);
  const IonSpecies ion = yb171();
  const FieldModel f = FieldModel::ideal_quadrupole(t, t.d);
  const double e_wall = t.kappa * t.v_rf / t.d;
  const double u = ion.charge * ion.charge * e_wall * e_wall / (4 * ion.mass * t.omega_rf * t.omega_rf);
  // The wall itself is outside the open domain; the potential is quadratic in r.
  EXPECT_NEAR(pseudopotential_energy(f, Vec3{0, 0.5 * t.d, 0}, ion) / (0.25 * u), 1.0, 1e-12);
  // Equivalent form q e kappa V / 8 at the wall.
  const double q = mathieu_parameters(t, ion).q;
  EXPECT_NEAR(u / (q * t.kappa * t.v_rf * constants::elementary_charge / 8.0), 1.0, 1e-12);
  EXPECT_THROW(pseudopotential_energy(f, Vec3{t.d, 0, 0}, ion), InvalidInput);
}

TEST(Pseudopotential, SecularOmegaFromFieldMatchesMathieu) {
  const TrapConfig t = blade_trap();
  const IonSpecies ion = yb171();
  const FieldModel f = FieldModel::ideal_quadrupole(t, t.d);
  EXPECT_NEAR(pseudopotential_secular_omega(f, ion) / secular_frequencies(t, ion).omega_lf, 1.0,
              1e-6);
  const GridMap g = GridMap::sample(*f.ideal(), {linspace(-t.d, t.d, 21), linspace(-t.d, t.d, 21)});
  const FieldModel fg = FieldModel::grid(g, t.omega_rf);
  EXPECT_NEAR(pseudopotential_secular_omega(fg, ion) / secular_frequencies(t, ion).omega_lf, 1.0,
              1e-5);
}

TEST(DepthScan, DeterministicAcrossThreadCounts) {
  const TrapConfig t = blade_trap(71.0);
  const FieldModel f = FieldModel::ideal_quadrupole(t, t.d);
  DepthScanOptions opt;
  opt.shots = 6;
  opt.cycles = 3;
  opt.seed = 99;
  const std::vector<double> grid{0.2 * constants::joules_per_ev, 0.36 * constants::joules_per_ev,
                                 0.5 * constants::joules_per_ev};
  const DepthScan a = trap_depth_monte_carlo(f, yb171(), grid, opt);
  opt.threads = 4;
  const DepthScan b = trap_depth_monte_carlo(f, yb171(), grid, opt);
  EXPECT_EQ(a.escapes, b.escapes);
  EXPECT_EQ(a.escapes.front(), 0u);
  EXPECT_EQ(a.escapes.back(), opt.shots);
  ASSERT_TRUE(a.lower_bound && a.upper_bound);
  EXPECT_LT(*a.lower_bound, *a.upper_bound);
  opt.seed = 100;
  // Different seed still leaves the unambiguous ends unchanged.
  const DepthScan c = trap_depth_monte_carlo(f, yb171(), grid, opt);
  EXPECT_EQ(c.escapes.front(), 0u);
  EXPECT_EQ(c.escapes.back(), opt.shots);
}

TEST(DepthScan, GridMapAgreesWithIdealAtTheEnds) {
  // The grid domain is the square |x|,|y| <= d, whose inscribed circle is
  // the ideal hard wall, so straight-line launches reach it identically.
  const TrapConfig t = blade_trap(71.0);
  const FieldModel ideal = FieldModel::ideal_quadrupole(t, t.d);
  const double d = t.d;
  const GridMap g = GridMap::sample(*ideal.ideal(), {linspace(-d, d, 9), linspace(-d, d, 9)});
  const FieldModel grid = FieldModel::grid(g, t.omega_rf);
  DepthScanOptions opt;
  opt.shots = 4;
  opt.cycles = 2;
  const std::vector<double> energies{0.1 * constants::joules_per_ev, 0.8 * constants::joules_per_ev};
  const DepthScan s = trap_depth_monte_carlo(grid, yb171(), energies, opt);
  EXPECT_EQ(s.escapes.front(), 0u);
  EXPECT_EQ(s.escapes.back(), opt.shots);
}

TEST(DepthScan, ValidatesArguments) {
  const TrapConfig t = blade_trap(71.0);
  const FieldModel f = FieldModel::ideal_quadrupole(t, t.d);
  EXPECT_THROW(trap_depth_monte_carlo(f, yb171(), {}), InvalidInput);
  EXPECT_THROW(trap_depth_monte_carlo(f, yb171(), {2e-20, 1e-20}), InvalidInput);
  DepthScanOptions opt;
  opt.shots = 0;
  EXPECT_THROW(trap_depth_monte_carlo(f, yb171(), {1e-20}, opt), InvalidInput);
}

}  // namespace
