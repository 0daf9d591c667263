#include <cmath>
#include <cstdio>

#include <Eigen/Dense>

#include "commands.hpp"
#include "iontrap/analysis.hpp"
#include "iontrap/quantum.hpp"

namespace iontrap::cli {

namespace {

using constants::pi;
using constants::two_pi;

std::string indexed(const std::string& stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return stem + "_" + buf + ".csv";
}

/// Least-squares amplitude of the cos/sin(2 phi) component of a parity scan.
double parity_amplitude(const std::vector<double>& phases, const std::vector<double>& parity) {
  Eigen::MatrixXd a(static_cast<Eigen::Index>(phases.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(phases.size()));
  for (std::size_t i = 0; i < phases.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = 1.0;
    a(r, 1) = std::cos(2.0 * phases[i]);
    a(r, 2) = std::sin(2.0 * phases[i]);
    y(r) = parity[i];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(y);
  return std::hypot(c(1), c(2));
}

}  // namespace

void ramsey_t2(Context& ctx) {
  const Section ns = ctx.root.child("noise");
  const auto rates = ns.quantities("heating_rates", Unit::quanta_rate);
  if (rates.empty()) ns.fail("heating_rates_quanta_per_s", "needs at least one rate");
  for (double r : rates) {
    if (!(r >= 0.0)) ns.fail("heating_rates_quanta_per_s", "rates must be >= 0");
  }
  const double gamma_p = ns.quantity("dephasing_rate", Unit::rate, 0.0);
  if (gamma_p < 0.0) ns.fail("dephasing_rate_per_s", "must be >= 0");
  double nbar_bath = 0.0;
  if (ns.has("nbar_bath")) {
    nbar_bath = ns.number("nbar_bath");
    if (!(nbar_bath > 0.0)) ns.fail("nbar_bath", "must be positive");
  } else {
    const double f = ns.quantity("mode_frequency", Unit::frequency, 3.0e6);
    const double temp = ns.quantity("temperature", Unit::temperature, 300.0);
    if (!(f > 0.0)) ns.fail("mode_frequency", "must be positive");
    if (!(temp > 0.0)) ns.fail("temperature_K", "must be positive");
    nbar_bath = quantum::thermal_occupation(two_pi * f, temp);
  }

  const auto seq = ctx.root.optional_child("sequence");
  quantum::RamseyOptions opt;
  bool echo = false;
  long long points = 41;
  double span = 2.5;
  std::optional<double> wait_max;
  std::string fit_model = "exponential";
  if (seq) {
    echo = seq->flag("echo", false);
    opt.detuning = two_pi * seq->quantity("detuning", Unit::frequency, 0.0);
    opt.cutoff = static_cast<std::size_t>(seq->integer("cutoff", 2, 400, 30));
    opt.dt = seq->quantity("time_step", Unit::time, 0.0);
    if (opt.dt < 0.0) seq->fail("time_step", "must be >= 0");
    points = seq->integer("wait_points", 3, 100000, 41);
    wait_max = seq->maybe_quantity("wait_max", Unit::time);
    if (wait_max && !(*wait_max > 0.0)) seq->fail("wait_max", "must be positive");
    span = seq->number("wait_span_t2", 2.5);
    if (!(span > 0.0)) seq->fail("wait_span_t2", "must be positive");
    fit_model = seq->text("fit_model", "exponential");
    if (fit_model != "exponential" && fit_model != "gaussian") {
      seq->fail("fit_model", "must be exponential or gaussian");
    }
  }

  ctx.summary.add("nbar_bath", nbar_bath);
  ctx.summary.add_flag("echo", echo);
  Table t2_table{{"1/e times of the simulated contrast and the rate-equation estimate"},
                 {"heating_rate_quanta_per_s", "t2_rate_estimate_ms", "t2_numeric_ms", "t2_fit_ms"},
                 {}};
  for (std::size_t i = 0; i < rates.size(); ++i) {
    const double rate = rates[i];
    if (rate == 0.0 && gamma_p == 0.0 && !wait_max) {
      ns.fail("heating_rates_quanta_per_s",
              "a zero rate with no dephasing needs sequence.wait_max");
    }
    const auto noise = quantum::NoiseModel::from_heating_rate(rate, nbar_bath, gamma_p);
    const double t2_rate = (rate == 0.0 && gamma_p == 0.0) ? INFINITY
                                                           : quantum::t2_from_rates(rate, gamma_p);
    const double tmax = wait_max ? *wait_max : span * t2_rate;
    std::vector<double> waits;
    for (long long k = 0; k < points; ++k) waits.push_back(tmax * k / static_cast<double>(points - 1));
    const auto curve = quantum::ramsey_contrast_curve(noise, waits, echo, opt);

    Table c{{"heating_rate_quanta_per_s=" + format_number(rate),
             "dephasing_rate_per_s=" + format_number(gamma_p)},
            {"wait_s", "contrast"},
            {}};
    for (std::size_t k = 0; k < waits.size(); ++k) c.add({waits[k], curve[k]});
    ctx.out.add_table(indexed("contrast_curve", i), c);

    const double t_num = analysis::level_crossing_time(waits, curve, curve.front() * std::exp(-1.0));
    std::vector<analysis::DecayPoint> pts;
    for (std::size_t k = 0; k < waits.size(); ++k) pts.push_back({waits[k], curve[k], 0.0});
    const auto fit = analysis::fit_contrast_decay(
        pts, fit_model == "gaussian" ? analysis::DecayModel::gaussian
                                     : analysis::DecayModel::exponential);
    t2_table.add({rate, t2_rate * 1e3, t_num * 1e3, fit.t2 * 1e3});

    const std::string tag = "[" + format_number(rate) + " quanta/s]";
    ctx.summary.add("t2_rate_estimate " + tag, t2_rate * 1e3, "ms");
    ctx.summary.add("t2_numeric " + tag, t_num * 1e3, "ms");
    ctx.summary.add("t2_fit " + tag, fit.t2 * 1e3, "ms");
  }
  ctx.out.add_table("t2_vs_heating_rate.csv", t2_table);

  if (const auto fr = ctx.root.optional_child("fringe")) {
    const double wait = fr->quantity("wait", Unit::time);
    if (wait < 0.0) fr->fail("wait", "must be >= 0");
    const auto n = fr->integer("points", 3, 100000, 64);
    std::vector<double> phases;
    for (long long k = 0; k < n; ++k) phases.push_back(two_pi * k / static_cast<double>(n));
    const auto noise = quantum::NoiseModel::from_heating_rate(rates.front(), nbar_bath, gamma_p);
    const auto r = quantum::simulate_motional_ramsey(noise, wait, echo, phases, opt);
    Table f{{"wait_s=" + format_number(wait)}, {"phase_rad", "p_excited"}, {}};
    for (std::size_t k = 0; k < phases.size(); ++k) f.add({phases[k], r.fringe[k]});
    ctx.out.add_table("fringe.csv", f);
    ctx.summary.add("fringe_contrast", r.contrast);
    ctx.summary.add("fringe_phase", r.fringe_phase, "rad");
    ctx.summary.add_flag("fringe_cutoff_saturated", r.saturated);
  }
}

void ms_gate(Context& ctx) {
  const Section gs = ctx.root.child("gate");
  quantum::MsParams p;
  p.eta_omega = two_pi * gs.quantity("eta_omega", Unit::frequency);
  p.delta = two_pi * gs.quantity("detuning", Unit::frequency);
  p.carrier_omega = two_pi * gs.quantity("carrier_rabi", Unit::frequency, 0.0);
  p.nbar = gs.number("nbar", 0.0);
  p.n_ions = static_cast<int>(gs.integer("ions", 2, 2, 2));
  if (p.eta_omega < 0.0) gs.fail("eta_omega", "must be >= 0");
  if (p.nbar < 0.0) gs.fail("nbar", "must be >= 0");
  quantum::MsOptions opt;
  opt.cutoff = static_cast<std::size_t>(gs.integer("cutoff", 2, 400, 30));
  opt.steps_per_loop = static_cast<std::size_t>(gs.integer("steps_per_loop", 10, 10000000, 2000));

  double duration = 0.0;
  long long points = 201;
  long long parity_points = 64;
  const auto sc = ctx.root.optional_child("scan");
  if (sc) {
    points = sc->integer("points", 2, 1000000, 201);
    if (const auto d = sc->maybe_quantity("duration", Unit::time)) {
      if (!(*d > 0.0)) sc->fail("duration", "must be positive");
      duration = *d;
    }
    parity_points = sc->integer("parity_points", 4, 100000, 64);
  }
  if (duration == 0.0) {
    if (p.delta == 0.0) gs.fail("detuning", "a zero detuning needs scan.duration");
    duration = two_pi / std::abs(p.delta);
  }

  std::vector<double> times;
  for (long long k = 0; k < points; ++k) times.push_back(duration * k / static_cast<double>(points - 1));
  const auto r = quantum::molmer_sorensen_evolve(p, times, opt);

  const std::pair<const char*, const std::vector<double>*> curves[] = {
      {"p_up_up", &r.p_up_up}, {"p_odd", &r.p_odd}, {"p_down_down", &r.p_down_down}};
  for (const auto& [name, v] : curves) {
    Table t{{}, {"time_us", std::string(name)}, {}};
    for (std::size_t k = 0; k < times.size(); ++k) t.add({times[k] * 1e6, (*v)[k]});
    ctx.out.add_table(std::string(name) + ".csv", t);
  }

  std::vector<double> phases;
  for (long long k = 0; k < parity_points; ++k) phases.push_back(pi * k / static_cast<double>(parity_points));
  const auto parity = quantum::parity_scan(r.final_spins, phases);
  Table pt{{"parity after the gate, global pi/2 analysis pulse"}, {"phase_rad", "parity"}, {}};
  for (std::size_t k = 0; k < phases.size(); ++k) pt.add({phases[k], parity[k]});
  ctx.out.add_table("parity.csv", pt);

  ctx.summary.add("duration", duration * 1e6, "us");
  ctx.summary.add("p_up_up_final", r.p_up_up.back());
  ctx.summary.add("p_odd_final", r.p_odd.back());
  ctx.summary.add("p_down_down_final", r.p_down_down.back());
  ctx.summary.add("parity_amplitude", parity_amplitude(phases, parity));
  ctx.summary.add("norm_drift", r.purity_drift);
  ctx.summary.add("top_fock_population", r.top_population);
  ctx.summary.add_text("regime", p.dispersive() ? "dispersive" : "resonant");
  if (std::abs(p.delta) > p.eta_omega) {
    ctx.summary.add("ising_j", quantum::dispersive_ising_j(p.eta_omega, p.delta) / two_pi / 1e3,
                    "kHz (angular/2pi)");
  }
}

}  // namespace iontrap::cli
