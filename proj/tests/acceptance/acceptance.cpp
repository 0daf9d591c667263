// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here and never adapted to results.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "iontrap/analysis.hpp"
#include "iontrap/field_model.hpp"
#include "iontrap/ion_chain.hpp"
#include "iontrap/quantum.hpp"
#include "iontrap/rng.hpp"
#include "iontrap/species.hpp"
#include "iontrap/trajectory.hpp"
#include "iontrap/trap_model.hpp"

namespace {

using namespace iontrap;
using constants::pi;
using constants::two_pi;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

trap::TrapConfig blade(double v_rf) {
  trap::TrapConfig t;
  t.d = 250e-6;
  t.kappa = 0.83;
  t.omega_rf = two_pi * 23.24e6;
  t.v_rf = v_rf;
  return t;
}

// 1. Mathieu q at the nominal drive, and per-call cost.
Outcome mathieu_check() {
  const auto ion = species::ytterbium_171();
  const auto t = blade(483.0);
  const auto t0 = Clock::now();
  const auto m = trap::mathieu_parameters(t, ion);
  const double first_call = seconds_since(t0);
  const bool pass = std::abs(m.q - 0.34) <= 0.02 && m.stable && first_call < 1e-3;
  return {pass, fmt("q = %.4f (target 0.34 +/- 0.02), runtime %.2e s (< 1e-3)", m.q, first_call)};
}

// 2. Rate formula at two operating points.
Outcome rate_formula() {
  const double a = quantum::t2_from_rates(1.6, two_pi * 2.3);
  const double b = quantum::t2_from_rates(50.0, 0.0);
  const bool pass = std::abs(a - 95.9e-3) <= 0.1e-3 && std::abs(b - 10.0e-3) <= 0.1e-3;
  return {pass, fmt("T2(1.6 q/s, 2pi*2.3 Hz) = %.3f ms, T2(50 q/s, 0) = %.3f ms", a * 1e3, b * 1e3)};
}

// Numeric 1/e Ramsey time under pure heating.
double numeric_t2(double rate, double nbar_bath) {
  const auto noise = quantum::NoiseModel::from_heating_rate(rate, nbar_bath);
  const double est = quantum::t2_from_rates(rate, 0.0);
  std::vector<double> waits;
  for (int k = 0; k <= 200; ++k) waits.push_back(3.0 * est * k / 200.0);
  quantum::RamseyOptions opt;
  opt.cutoff = 30;
  const auto c = quantum::ramsey_contrast_curve(noise, waits, false, opt);
  return analysis::level_crossing_time(waits, c, c.front() / std::exp(1.0));
}

// 3. Numeric T2 against the rate estimate across heating rates.
Outcome ramsey_sweep() {
  const auto t0 = Clock::now();
  const double nbar_bath = quantum::thermal_occupation(two_pi * 3e6, 300.0);
  bool pass = true, monotone = true;
  std::string d;
  double prev = 1e300;
  for (double rate : {1.0, 3.0, 10.0, 30.0, 100.0}) {
    const double t2 = numeric_t2(rate, nbar_bath);
    const double t2_rate = quantum::t2_from_rates(rate, 0.0);
    const double ratio = t2 / t2_rate;
    pass = pass && ratio >= 1.0 && ratio <= 2.2;
    monotone = monotone && t2 < prev;
    prev = t2;
    d += fmt("%g:%.3f ", rate, ratio);
  }
  const double elapsed = seconds_since(t0);
  pass = pass && monotone && elapsed < 300.0;
  return {pass, fmt("T2 numeric / T2 rate formula by rate {%s}, monotone %s, %.1f s (< 300)", d.c_str(),
                    monotone ? "yes" : "no", elapsed)};
}

// 4. Spin echo removes a static detuning; without echo the phase advances.
Outcome echo_property() {
  quantum::RamseyOptions opt;
  opt.cutoff = 4;
  opt.detuning = two_pi * 50.0;
  const quantum::NoiseModel quiet{};
  std::vector<double> phases;
  for (int k = 0; k < 16; ++k) phases.push_back(two_pi * k / 16);
  const double t_wait = 20e-3;
  const auto echo = quantum::simulate_motional_ramsey(quiet, t_wait, true, phases, opt);
  // Track the echo-off fringe phase in 1 ms steps so the total is unwrapped.
  const double ref = quantum::simulate_motional_ramsey(quiet, 0.0, false, phases, opt).fringe_phase;
  double prev = ref, total = 0.0;
  for (int k = 1; k <= 20; ++k) {
    const double ph =
        quantum::simulate_motional_ramsey(quiet, t_wait * k / 20.0, false, phases, opt).fringe_phase;
    total += std::remainder(ph - prev, two_pi);
    prev = ph;
  }
  const double expect = two_pi * 50.0 * t_wait;
  const bool pass = std::abs(echo.contrast - 1.0) <= 1e-6 &&
                    std::abs(std::abs(total) - expect) <= 1e-6;
  return {pass, fmt("echo contrast %.9f, echo-off phase shift %.9f rad (expected %.9f)",
                    echo.contrast, std::abs(total), expect)};
}

// 5. Gate closure, parity contrast and a ten-times finer integration.
Outcome ms_closure() {
  quantum::MsParams p;
  p.eta_omega = two_pi * 5.47e3;
  p.delta = two_pi * 10.94e3;
  const double t_gate = two_pi / p.delta;
  std::vector<double> times;
  for (int k = 0; k <= 50; ++k) times.push_back(t_gate * k / 50.0);
  const auto r = quantum::molmer_sorensen_evolve(p, times);
  quantum::MsOptions fine;
  fine.steps_per_loop = 10 * quantum::MsOptions{}.steps_per_loop;
  const auto o = quantum::molmer_sorensen_evolve(p, times, fine);
  double dev = 0.0;
  for (std::size_t k = 0; k < times.size(); ++k) {
    dev = std::max({dev, std::abs(r.p_up_up[k] - o.p_up_up[k]), std::abs(r.p_odd[k] - o.p_odd[k]),
                    std::abs(r.p_down_down[k] - o.p_down_down[k])});
  }
  std::vector<double> phases;
  for (int k = 0; k < 64; ++k) phases.push_back(pi * k / 64);
  const auto par = quantum::parity_scan(r.final_spins, phases);
  const auto [lo, hi] = std::minmax_element(par.begin(), par.end());
  const double amp = 0.5 * (*hi - *lo);
  const double uu = r.p_up_up.back(), dd = r.p_down_down.back();
  const bool pass = std::abs(uu - 0.5) <= 1e-3 && std::abs(dd - 0.5) <= 1e-3 && amp >= 0.999 &&
                    dev <= 1e-6;
  return {pass, fmt("P_uu %.6f, P_dd %.6f, parity amplitude %.6f, fine-step deviation %.2e", uu, dd,
                    amp, dev)};
}

// 6. Two-ion closed forms and the 19-ion equispacing optimizer.
Outcome chain_oracle() {
  const auto ion = species::ytterbium_171();
  const double wz = two_pi * 0.5e6;
  const auto pot = chain::AxialPotential::harmonic(wz, ion);
  const double ke2 = constants::coulomb_constant * ion.charge * ion.charge;
  const double l = std::cbrt(ke2 / (ion.mass * wz * wz));
  const auto s = chain::solve_chain(2, pot, two_pi * 3e6, ion);
  const double e_space = std::abs((s.positions[1] - s.positions[0]) / (std::cbrt(2.0) * l) - 1.0);
  const double e_w1 = std::abs(s.axial.frequencies[0] / wz - 1.0);
  const double e_w2 = std::abs(s.axial.frequencies[1] / (std::sqrt(3.0) * wz) - 1.0);
  const auto eq = chain::optimize_equispaced(19, 13, 4.2e-6, ion);
  const bool pass = e_space <= 1e-9 && e_w1 <= 1e-9 && e_w2 <= 1e-9 && eq.variability <= 0.07 &&
                    std::abs(eq.mean_spacing / 4.2e-6 - 1.0) <= 1e-6;
  return {pass, fmt("N=2 spacing err %.1e, mode errs %.1e/%.1e; N=19 variability %.4f at %.4f um",
                    e_space, e_w1, e_w2, eq.variability, eq.mean_spacing * 1e6)};
}

// 7. Monte Carlo escape scan brackets the pseudopotential depth. A weak
// drive (q ~ 0.01) keeps the RF micromotion contribution to the launch
// energy below the 2% grid step.
Outcome depth_oracle() {
  const auto ion = species::ytterbium_171();
  const auto t = blade(14.2);
  const auto field = trap::FieldModel::ideal_quadrupole(t, t.d);
  const double e_wall = t.kappa * t.v_rf / t.d;
  const double u = ion.charge * ion.charge * e_wall * e_wall / (4.0 * ion.mass * t.omega_rf * t.omega_rf);
  std::vector<double> grid;
  for (int k = -2; k <= 2; ++k) grid.push_back(u * std::pow(1.02, k));
  trap::DepthScanOptions opt;
  opt.shots = 100;
  opt.cycles = 50;
  opt.seed = 2026;
  opt.threads = 1;
  const auto a = trap::trap_depth_monte_carlo(field, ion, grid, opt);
  opt.threads = 4;
  const auto b = trap::trap_depth_monte_carlo(field, ion, grid, opt);
  const bool same = a.escapes == b.escapes;
  const double step = 1.02;
  const bool bracket = a.lower_bound && a.upper_bound && *a.lower_bound <= u * (1 + 1e-12) &&
                       *a.upper_bound >= u * (1 - 1e-12) &&
                       *a.lower_bound >= u / step * (1 - 1e-12) &&
                       *a.upper_bound <= u * step * (1 + 1e-12);
  std::string counts;
  for (auto e : a.escapes) counts += std::to_string(e) + " ";
  return {bracket && same,
          fmt("q %.4f, U %.4e eV, escapes per grid point {%s}, lower %.4e, upper %.4e eV, "
              "threads 1 vs 4 identical %s",
              trap::mathieu_parameters(t, ion).q, u / constants::joules_per_ev, counts.c_str(),
              a.lower_bound ? *a.lower_bound / constants::joules_per_ev : -1.0,
              a.upper_bound ? *a.upper_bound / constants::joules_per_ev : -1.0,
              same ? "yes" : "no")};
}

// 8. Heat the ground state with the Lindblad reservoir to a target nbar,
// drive both sidebands with the full Laguerre coupling, and invert the
// red/blue ratio.
Outcome thermometry_round_trip() {
  bool pass = true;
  std::string d;
  const double omega = two_pi * 100e3, eta = 0.05;
  for (double target : {0.06, 0.5, 2.0}) {
    const quantum::Layout layout{1, 60};
    // Reservoir at 2 nbar for ln 2 / gamma_a gives exactly nbar from vacuum.
    const quantum::NoiseModel noise{1.0, 2.0 * target, 0.0};
    const auto r = quantum::lindblad_evolve(quantum::fock_state(layout, 0), layout, noise,
                                            std::nullopt, std::log(2.0));
    const auto pops = quantum::fock_populations(r.rho, layout);
    const double pulse = pi / quantum::fock_rabi_rate(omega, eta, 0, quantum::Transition::blue_sideband);
    const double red = quantum::sideband_rabi(omega, eta, pops, quantum::Transition::red_sideband, {pulse})[0];
    const double blue = quantum::sideband_rabi(omega, eta, pops, quantum::Transition::blue_sideband, {pulse})[0];
    const double nbar = analysis::nbar_from_sideband_ratio(red / blue).nbar;
    const bool ok = target < 0.1 ? std::abs(nbar - target) <= 0.01
                                 : std::abs(nbar / target - 1.0) <= 0.05;
    pass = pass && ok;
    d += fmt("%g->%.4f ", target, nbar);
  }
  return {pass, "nbar in->out {" + d + "}"};
}

// Beta quantile by trapezoid CDF and linear inversion.
double beta_quantile_oracle(double a, double b, double p) {
  const int n = 400000;
  const double lnorm = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
  auto pdf = [&](double x) {
    if (x <= 0.0) return a == 1.0 ? std::exp(lnorm) : 0.0;
    if (x >= 1.0) return b == 1.0 ? std::exp(lnorm) : 0.0;
    return std::exp(lnorm + (a - 1) * std::log(x) + (b - 1) * std::log1p(-x));
  };
  std::vector<double> cdf(n + 1, 0.0);
  double prev = pdf(0.0);
  for (int i = 1; i <= n; ++i) {
    const double cur = pdf(static_cast<double>(i) / n);
    cdf[i] = cdf[i - 1] + 0.5 * (prev + cur) / n;
    prev = cur;
  }
  int i = 0;
  while (i < n && cdf[i + 1] / cdf[n] < p) ++i;
  const double f0 = cdf[i] / cdf[n], f1 = cdf[i + 1] / cdf[n];
  return (i + (p - f0) / (f1 - f0)) / n;
}

// 9. Allan drift law, Beta interval endpoints, MLE interval coverage.
Outcome statistics_suite() {
  const double c = 0.11, period = 0.5;
  std::vector<double> y(512);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = c * period * static_cast<double>(i);
  const auto adev = analysis::allan_deviation(y, period, {0.5, 2.0, 8.0, 32.0, 128.0});
  double adev_err = 0.0;
  for (std::size_t k = 0; k < adev.taus.size(); ++k) {
    adev_err = std::max(adev_err, std::abs(adev.deviation[k] / (c * adev.taus[k] / std::sqrt(2.0)) - 1.0));
  }

  double beta_err = 0.0;
  for (auto [k, n] : {std::pair<int, int>{7, 40}, {1, 10}, {199, 200}, {0, 25}, {25, 25}}) {
    const auto iv = analysis::beta_interval(k, n, 0.683);
    const double a = k + 1.0, b = n - k + 1.0;
    double lo = 0.0, hi = 1.0;
    if (k == n) {
      lo = beta_quantile_oracle(a, b, 1.0 - 0.683);
    } else if (k == 0) {
      hi = beta_quantile_oracle(a, b, 0.683);
    } else {
      lo = beta_quantile_oracle(a, b, 0.5 - 0.683 / 2);
      hi = beta_quantile_oracle(a, b, 0.5 + 0.683 / 2);
    }
    beta_err = std::max({beta_err, std::abs(iv.lower - lo), std::abs(iv.upper - hi)});
  }

  analysis::SpamMatrix spam;
  spam.m << 0.9865, 0.0070, 0.0, 0.0135, 0.9840, 0.0475, 0.0, 0.0090, 0.9525;
  const double truth = 0.95;
  int covered = 0;
  const int trials = 100;
  for (int trial = 0; trial < trials; ++trial) {
    std::vector<analysis::PhasePoint> data;
    for (int k = 0; k < 20; ++k) {
      analysis::PhasePoint p;
      p.phase = pi * k / 20.0;
      const double par = truth * std::cos(2.0 * p.phase + 0.3);
      const Eigen::Vector3d obs =
          spam.m * Eigen::Vector3d(0.25 * (1 + par), 0.5 * (1 - par), 0.25 * (1 + par));
      Rng rng = Rng::stream(static_cast<std::uint64_t>(trial), static_cast<std::uint64_t>(k));
      std::discrete_distribution<int> draw({obs[0], obs[1], obs[2]});
      for (int s = 0; s < 200; ++s) ++p.counts[static_cast<std::size_t>(draw(rng))];
      data.push_back(p);
    }
    analysis::MleOptions mo;
    mo.seed = static_cast<std::uint64_t>(trial);
    const auto fit = analysis::mle_parity_fit(data, spam, true, mo);
    covered += fit.lower <= truth && truth <= fit.upper;
  }
  const bool pass = adev_err <= 0.01 && beta_err <= 1e-6 && covered >= 68;
  return {pass, fmt("Allan drift rel err %.1e, Beta endpoint err %.1e, MLE coverage %d/%d (>= 68)",
                    adev_err, beta_err, covered, trials)};
}

// 10. Micromotion: zero modulation, forward-inverse round trip, E_RF formula.
Outcome micromotion_pipeline() {
  const auto ion = species::ytterbium_171();
  analysis::ObeConfig base;
  const double c0 = analysis::obe_modulation_contrast(base).contrast;
  const auto cal = analysis::calibrate_micromotion(base, 21, 0.5);
  double worst = 0.0, field_err = 0.0;
  for (double beta : {0.02, 0.037, 0.063, 0.11, 0.17, 0.23, 0.3}) {
    analysis::ObeConfig c = base;
    c.beta = beta;
    const double contrast = analysis::obe_modulation_contrast(c).contrast;
    const auto est = analysis::beta_from_contrast(contrast, cal, ion);
    worst = std::max(worst, std::abs(est.beta / beta - 1.0));
    const double direct = est.beta * ion.mass * base.omega_rf * base.omega_rf /
                          (base.wavevector * constants::elementary_charge);
    field_err = std::max(field_err, std::abs(est.e_rf / direct - 1.0));
  }
  const bool pass = c0 < 1e-6 && worst < 0.01 && field_err < 1e-12;
  return {pass, fmt("beta=0 contrast %.1e, worst round-trip rel err %.2e on [0.02, 0.3], "
                    "E_RF rel err %.1e",
                    c0, worst, field_err)};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, mathieu_check},   {2, rate_formula},           {3, ramsey_sweep},
      {4, echo_property},   {5, ms_closure},             {6, chain_oracle},
      {7, depth_oracle},    {8, thermometry_round_trip}, {9, statistics_suite},
      {10, micromotion_pipeline},
  };
  int failures = 0;
  for (const auto& [id, run] : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
