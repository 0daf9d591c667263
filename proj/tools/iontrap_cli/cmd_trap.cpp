#include <cmath>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "iontrap/trajectory.hpp"
#include "iontrap/trap_model.hpp"

namespace iontrap::cli {

namespace {

using constants::two_pi;

trap::TrapConfig read_trap(const Section& s) {
  trap::TrapConfig t;
  t.d = s.quantity("d", Unit::length);
  t.kappa = s.number("kappa");
  t.omega_rf = two_pi * s.quantity("rf_frequency", Unit::frequency);
  t.v_rf = s.quantity("v_rf", Unit::voltage);
  t.v_twist = s.quantity("v_twist", Unit::voltage, 0.0);
  t.v_endcap = s.quantity("v_endcap", Unit::voltage, 0.0);
  const auto per_volt = s.maybe_quantity("axial_curvature_per_volt", Unit::curvature_per_volt);
  const auto axial = s.maybe_quantity("axial_frequency", Unit::frequency);
  if (per_volt && axial) {
    s.fail("axial_frequency", "give either an axial frequency or a curvature per volt, not both");
  }
  if (per_volt) t.axial_curvature_per_volt = *per_volt;
  if (axial) {
    if (!(t.v_endcap > 0.0)) s.fail("axial_frequency", "needs a positive v_endcap to calibrate against");
    const double w = two_pi * *axial;
    t.axial_curvature_per_volt = w * w / t.v_endcap;
  }
  if (!(t.d > 0.0)) s.fail("d", "must be positive");
  if (!(t.kappa > 0.0 && t.kappa <= 1.0)) s.fail("kappa", "must lie in (0, 1]");
  if (!(t.omega_rf > 0.0)) s.fail("rf_frequency", "must be positive");
  if (t.v_rf < 0.0) s.fail("v_rf", "must be non-negative");
  return t;
}

double& sweep_target(trap::TrapConfig& t, const std::string& name) {
  if (name == "v_rf") return t.v_rf;
  if (name == "v_twist") return t.v_twist;
  return t.v_endcap;
}

}  // namespace

void trap_stability(Context& ctx) {
  const IonSpecies ion = read_species(ctx.root);
  const Section ts = ctx.root.child("trap");
  const trap::TrapConfig cfg = read_trap(ts);

  const auto m = trap::mathieu_parameters(cfg, ion);
  ctx.summary.add("q", m.q);
  ctx.summary.add("a_x", m.a_x);
  ctx.summary.add("a_y", m.a_y);
  ctx.summary.add_flag("stable", m.stable);
  if (m.stable) {
    const auto f = trap::secular_frequencies(cfg, ion);
    ctx.summary.add("f_hf", f.omega_hf / two_pi / 1e6, "MHz");
    ctx.summary.add("f_lf", f.omega_lf / two_pi / 1e6, "MHz");
    ctx.summary.add("f_axial", f.omega_axial / two_pi / 1e6, "MHz");
  }

  if (const auto ds = ctx.root.optional_child("dissipation")) {
    trap::DissipationParams p;
    p.r_series = ds->quantity("r_series", Unit::resistance);
    p.c_trap = ds->quantity("c_trap", Unit::capacitance);
    if (p.r_series < 0.0) ds->fail("r_series_ohm", "must be >= 0");
    if (p.c_trap < 0.0) ds->fail("c_trap", "must be >= 0");
    ctx.summary.add("rf_power", trap::rf_power_dissipation(p, cfg.omega_rf, cfg.v_rf), "W");
  }

  if (const auto fs = ctx.root.optional_child("rf_fit")) {
    const auto hf = fs->quantities("measured_hf", Unit::frequency);
    const auto lf = fs->quantities("measured_lf", Unit::frequency);
    if (hf.size() != lf.size() || hf.empty()) {
      fs->fail("measured_lf", "needs one LF value per HF value");
    }
    std::vector<trap::RadialMeasurement> meas;
    for (std::size_t i = 0; i < hf.size(); ++i) meas.push_back({two_pi * hf[i], two_pi * lf[i]});
    const auto fit = trap::fit_rf_voltage(cfg, ion, meas);
    ctx.summary.add("fitted_v_rf", fit.v_rf, "V");
    ctx.summary.add("fit_rms_residual", fit.rms_residual / two_pi, "Hz");
  }

  if (const auto sw = ctx.root.optional_child("sweep")) {
    const std::string param = sw->text("parameter");
    if (param != "v_rf" && param != "v_twist" && param != "v_endcap") {
      sw->fail("parameter", "must be one of v_rf, v_twist, v_endcap");
    }
    const double lo = sw->quantity("min", Unit::voltage);
    const double hi = sw->quantity("max", Unit::voltage);
    const auto points = sw->integer("points", 2, 100000);
    if (!(hi > lo)) sw->fail("max_V", "must exceed the sweep minimum");

    Table mathieu{{"sweep of " + param}, {param + "_V", "q", "a_x", "a_y", "stable"}, {}};
    Table secular{{"stable points only"}, {param + "_V", "f_hf_MHz", "f_lf_MHz"}, {}};
    for (long long i = 0; i < points; ++i) {
      trap::TrapConfig t = cfg;
      const double v = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
      sweep_target(t, param) = v;
      if (param == "v_rf" && v < 0.0) continue;
      const auto mp = trap::mathieu_parameters(t, ion);
      mathieu.add({v, mp.q, mp.a_x, mp.a_y, mp.stable ? 1.0 : 0.0});
      if (mp.stable && t.axial_curvature_per_volt * t.v_endcap >= 0.0) {
        const auto f = trap::secular_frequencies(t, ion);
        secular.add({v, f.omega_hf / two_pi / 1e6, f.omega_lf / two_pi / 1e6});
      }
    }
    if (secular.rows.empty()) throw EmptyResult("no stable operating point in the " + param + " sweep");
    ctx.out.add_table("mathieu_vs_" + param + ".csv", mathieu);
    ctx.out.add_table("secular_vs_" + param + ".csv", secular);
  }
}

void trap_depth(Context& ctx) {
  const IonSpecies ion = read_species(ctx.root);
  const Section fs = ctx.root.child("field");
  const std::string model = fs.text("model", "ideal");

  std::optional<trap::FieldModel> field;
  std::optional<double> analytic_depth;
  if (model == "ideal") {
    const trap::TrapConfig cfg = read_trap(ctx.root.child("trap"));
    const double wall = fs.quantity("wall_radius", Unit::length, cfg.d);
    if (!(wall > 0.0)) fs.fail("wall_radius", "must be positive");
    const bool include_static = fs.flag("include_static", true);
    field = trap::FieldModel::ideal_quadrupole(cfg, wall, include_static);
    // U(R) = q^2 |E(R)|^2 / (4 m Omega^2) with |E| = kappa V R / d^2.
    const double e = cfg.kappa * cfg.v_rf * wall / (cfg.d * cfg.d);
    analytic_depth = ion.charge * ion.charge * e * e / (4.0 * ion.mass * cfg.omega_rf * cfg.omega_rf);
  } else if (model == "grid") {
    const std::string order = fs.text("interpolation", "cubic");
    if (order != "cubic" && order != "linear") fs.fail("interpolation", "must be cubic or linear");
    const double omega = two_pi * fs.quantity("rf_frequency", Unit::frequency);
    if (!(omega > 0.0)) fs.fail("rf_frequency", "must be positive");
    std::istringstream in(ctx.read_input(fs, "map_file"));
    field = trap::FieldModel::grid(
        trap::read_field_map(in, order == "cubic" ? trap::GridMap::Order::cubic
                                                  : trap::GridMap::Order::linear),
        omega);
  } else {
    fs.fail("model", "must be ideal or grid");
  }

  const Section sc = ctx.root.child("scan");
  const double e_min = sc.quantity("energy_min", Unit::energy);
  const double e_max = sc.quantity("energy_max", Unit::energy);
  if (!(e_min > 0.0)) sc.fail("energy_min", "must be positive");
  if (!(e_max >= e_min)) sc.fail("energy_max", "must be at least energy_min");
  const std::string spacing = sc.text("spacing", "geometric");
  std::vector<double> grid;
  if (spacing == "geometric") {
    const double step = sc.number("step_fraction", 0.02);
    if (!(step > 0.0 && step < 10.0)) sc.fail("step_fraction", "must lie in (0, 10)");
    for (double e = e_min; e <= e_max * (1.0 + 1e-12); e *= 1.0 + step) {
      grid.push_back(e);
      if (grid.size() > 100000) sc.fail("step_fraction", "produces more than 1e5 energies");
    }
  } else if (spacing == "linear") {
    const auto n = sc.integer("points", 1, 100000);
    for (long long i = 0; i < n; ++i) {
      grid.push_back(n == 1 ? e_min : e_min + (e_max - e_min) * i / static_cast<double>(n - 1));
    }
  } else {
    sc.fail("spacing", "must be geometric or linear");
  }

  trap::DepthScanOptions opt;
  opt.shots = static_cast<std::size_t>(sc.integer("shots", 1, 100000000, 100));
  opt.cycles = static_cast<std::size_t>(sc.integer("cycles", 1, 1000000, 50));
  opt.threads = static_cast<unsigned>(sc.integer("threads", 1, 1024, 1));
  opt.random_rf_phase = sc.flag("random_rf_phase", true);
  const auto steps = sc.integer("steps_per_rf_period", trap::kMinStepsPerRfPeriod, 1000000,
                                trap::kDefaultStepsPerRfPeriod);
  opt.dt = two_pi / field->omega_rf() / static_cast<double>(steps);
  opt.seed = ctx.seed;
  if (const auto w = sc.maybe_quantity("secular_frequency", Unit::frequency)) {
    if (!(*w > 0.0)) sc.fail("secular_frequency", "must be positive");
    opt.secular_omega = two_pi * *w;
  }

  const auto scan = trap::trap_depth_monte_carlo(*field, ion, grid, opt);

  Table t{{"escape within " + std::to_string(opt.cycles) + " secular cycles, " +
           std::to_string(opt.shots) + " shots per energy"},
          {"energy_eV", "escape_probability", "sigma"},
          {}};
  for (std::size_t i = 0; i < scan.energies.size(); ++i) {
    t.add({scan.energies[i] / constants::joules_per_ev, scan.probabilities[i], scan.sigmas[i]});
  }
  ctx.out.add_table("escape_probability.csv", t);

  ctx.summary.add("secular_frequency", scan.secular_omega / two_pi / 1e6, "MHz");
  ctx.summary.add("duration", scan.duration, "s");
  ctx.summary.add("energies", static_cast<double>(grid.size()));
  ctx.summary.add("shots", static_cast<double>(opt.shots));
  if (scan.lower_bound) {
    ctx.summary.add("depth_lower", *scan.lower_bound / constants::joules_per_ev, "eV");
  } else {
    ctx.summary.add_text("depth_lower", "none (escapes at the lowest energy)");
  }
  if (scan.upper_bound) {
    ctx.summary.add("depth_upper", *scan.upper_bound / constants::joules_per_ev, "eV");
  } else {
    ctx.summary.add_text("depth_upper", "none (no energy with all shots escaping)");
  }
  if (analytic_depth) {
    ctx.summary.add("pseudopotential_depth_at_wall", *analytic_depth / constants::joules_per_ev,
                    "eV");
  }
}

}  // namespace iontrap::cli
