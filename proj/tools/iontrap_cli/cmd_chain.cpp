#include <sstream>

#include "commands.hpp"
#include "iontrap/ion_chain.hpp"

namespace iontrap::cli {

namespace {

using constants::two_pi;

void emit_modes(Context& ctx, const std::string& name, const chain::ModeSet& modes,
                const std::string& family) {
  Table t{{family + " normal modes"}, {"mode", "frequency_kHz"}, {}};
  for (Eigen::Index m = 0; m < modes.frequencies.size(); ++m) {
    t.add({static_cast<double>(m), modes.frequencies(m) / two_pi / 1e3});
  }
  ctx.out.add_table(name, t);
}

}  // namespace

void chain_equispace(Context& ctx) {
  const IonSpecies ion = read_species(ctx.root);
  const Section cs = ctx.root.child("chain");
  const int n = static_cast<int>(cs.integer("ions", 1, 200));
  const double omega_r = two_pi * cs.quantity("radial_frequency", Unit::frequency, 3.0e6);
  if (!(omega_r > 0.0)) cs.fail("radial_frequency", "must be positive");

  chain::ChainSolution sol;
  int central = n;
  if (const auto ps = ctx.root.optional_child("potential")) {
    // Fixed potential: solve only.
    chain::AxialPotential pot;
    if (ps->has_quantity("axial_frequency", Unit::frequency)) {
      pot = chain::AxialPotential::harmonic(two_pi * ps->quantity("axial_frequency", Unit::frequency),
                                            ion);
    } else {
      pot.alpha2 = ps->quantity("alpha2", Unit::linear_density);
    }
    pot.alpha4 = ps->quantity("alpha4", Unit::quartic_density, 0.0);
    central = static_cast<int>(cs.integer("central_ions", 1, n, n));
    sol = chain::solve_chain(n, pot, omega_r, ion);
    ctx.summary.add("alpha2", pot.alpha2, "J/m^2");
    ctx.summary.add("alpha4", pot.alpha4, "J/m^4");
  } else {
    central = static_cast<int>(cs.integer("central_ions", 2, n));
    const double target = cs.quantity("target_spacing", Unit::length);
    if (!(target > 0.0)) cs.fail("target_spacing", "must be positive");
    chain::EquispaceOptions opt;
    opt.omega_radial = omega_r;
    opt.harmonic_only = cs.flag("harmonic_only", false);
    opt.starts = static_cast<int>(cs.integer("starts", 1, 1000, 8));
    opt.seed = ctx.seed;
    const auto res = chain::optimize_equispaced(n, central, target, ion, opt);
    sol = res.chain;
    ctx.summary.add("alpha2", res.potential.alpha2, "J/m^2");
    ctx.summary.add("alpha4", res.potential.alpha4, "J/m^4");
    ctx.summary.add("target_spacing", target * 1e6, "um");
  }

  if (central >= 2) {
    ctx.summary.add("central_ions", central);
    ctx.summary.add("mean_central_spacing", chain::mean_central_spacing(sol.positions, central) * 1e6,
                    "um");
    ctx.summary.add("spacing_variability", chain::spacing_variability(sol.positions, central));
  }
  ctx.summary.add("lowest_axial_mode", sol.axial.frequencies(0) / two_pi / 1e3, "kHz");
  ctx.summary.add("lowest_transverse_mode", sol.transverse.frequencies(0) / two_pi / 1e6, "MHz");

  Table pos{{}, {"ion", "z_um"}, {}};
  for (int i = 0; i < n; ++i) pos.add({static_cast<double>(i), sol.positions(i) * 1e6});
  ctx.out.add_table("positions.csv", pos);

  if (n >= 2) {
    Table sp{{}, {"pair", "spacing_um"}, {}};
    for (int i = 0; i + 1 < n; ++i) {
      sp.add({static_cast<double>(i), (sol.positions(i + 1) - sol.positions(i)) * 1e6});
    }
    ctx.out.add_table("spacings.csv", sp);
  }
  emit_modes(ctx, "axial_modes.csv", sol.axial, "axial");
  emit_modes(ctx, "transverse_modes.csv", sol.transverse, "transverse");

  std::ostringstream full;
  chain::write_chain(full, sol);
  ctx.out.add_file("chain.txt", full.str());

  if (const auto ls = ctx.root.optional_child("lamb_dicke")) {
    const double dk = ls->quantity("delta_k", Unit::wavenumber);
    if (dk < 0.0) ls->fail("delta_k", "must be >= 0");
    const auto eta = chain::lamb_dicke(sol.axial, dk, ion);
    Table t{{"axial modes, eta(ion, mode)"}, {"ion", "mode", "eta"}, {}};
    for (Eigen::Index i = 0; i < eta.eta.rows(); ++i) {
      for (Eigen::Index m = 0; m < eta.eta.cols(); ++m) {
        t.add({static_cast<double>(i), static_cast<double>(m), eta.eta(i, m)});
      }
    }
    ctx.out.add_table("lamb_dicke_axial.csv", t);
  }
}

}  // namespace iontrap::cli
