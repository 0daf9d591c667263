#include <cmath>
#include <cstdio>
#include <sstream>

#include <boost/random/normal_distribution.hpp>

#include "commands.hpp"
#include "csv.hpp"
#include "iontrap/analysis.hpp"
#include "iontrap/rng.hpp"

namespace iontrap::cli {

namespace {

using constants::pi;
using constants::two_pi;

std::string indexed(const std::string& stem, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return stem + "_" + buf + ".csv";
}

analysis::SpamMatrix read_spam(const Section& s) {
  const auto rows = s.matrix("matrix");
  if (rows.size() != 3) s.fail("matrix", "must have three rows (detected categories)");
  analysis::SpamMatrix m;
  for (int i = 0; i < 3; ++i) {
    if (rows[i].size() != 3) s.fail("matrix", "every row needs three entries (prepared states)");
    for (int j = 0; j < 3; ++j) m.m(i, j) = rows[i][j];
  }
  for (int j = 0; j < 3; ++j) {
    const double c = m.m.col(j).sum();
    if (std::abs(c - 1.0) > 1e-6 || m.m.col(j).minCoeff() < 0.0) {
      s.fail("matrix", "column " + std::to_string(j) + " must be a probability vector");
    }
    m.m.col(j) /= c;
  }
  m.lower = m.m;
  m.upper = m.m;
  return m;
}

analysis::Histogram read_histogram(const std::string& text, const std::string& source) {
  const CsvData d = parse_csv(text, source);
  if (d.find("photons") < 0 || d.find("shots") < 0) {
    throw ConfigError(source + ": expected columns 'photons,shots'");
  }
  analysis::Histogram h;
  const auto photons = d.column("photons");
  const auto shots = d.column("shots");
  for (std::size_t i = 0; i < photons.size(); ++i) {
    if (photons[i] < 0 || photons[i] != std::floor(photons[i]) || photons[i] > 1e6 || shots[i] < 0 ||
        shots[i] != std::floor(shots[i])) {
      throw ConfigError(source + ": photon numbers and shot counts must be non-negative integers");
    }
    const auto c = static_cast<std::size_t>(photons[i]);
    if (h.size() <= c) h.resize(c + 1, 0);
    h[c] += static_cast<std::uint64_t>(shots[i]);
  }
  return h;
}

/// Draws classified shots for the parity model pushed through the SPAM matrix.
std::vector<analysis::PhasePoint> synthesize_parity(const Section& s, const analysis::SpamMatrix& spam,
                                                    std::uint64_t seed) {
  const double contrast = s.number("contrast");
  const double phase0 = s.quantity("phase", Unit::angle, 0.0);
  const double offset = s.number("offset", 0.0);
  const auto phases = s.integer("phases", 1, 100000, 20);
  const auto shots = s.integer("shots", 0, 100000000, 200);
  if (!(std::abs(offset) + std::abs(contrast) <= 1.0)) {
    s.fail("contrast", "|offset| + |contrast| must not exceed 1");
  }
  std::vector<analysis::PhasePoint> out;
  for (long long k = 0; k < phases; ++k) {
    analysis::PhasePoint pt;
    pt.phase = pi * static_cast<double>(k) / static_cast<double>(phases);
    const double parity = offset + contrast * std::cos(2.0 * pt.phase + phase0);
    const Eigen::Vector3d truth(0.25 * (1.0 + parity), 0.5 * (1.0 - parity), 0.25 * (1.0 + parity));
    const Eigen::Vector3d det = spam.m * truth;
    Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(k));
    for (long long n = 0; n < shots; ++n) {
      const double u = rng.uniform();
      const int cat = u < det(0) ? 0 : (u < det(0) + det(1) ? 1 : 2);
      ++pt.counts[static_cast<std::size_t>(cat)];
    }
    out.push_back(pt);
  }
  return out;
}

void add_fit(Context& ctx, const std::string& stem, const analysis::MleParityResult& f) {
  ctx.summary.add(stem + "_contrast", f.contrast);
  ctx.summary.add(stem + "_lower", f.lower);
  ctx.summary.add(stem + "_upper", f.upper);
  ctx.summary.add(stem + "_sigma", f.sigma);
  ctx.summary.add(stem + "_phase", f.phase, "rad");
  ctx.summary.add(stem + "_offset", f.offset);
  Table t{{"maximum-likelihood parity model, offset + C cos(2 phi + phase)"},
          {"phase_rad", "parity"},
          {}};
  for (int k = 0; k <= 200; ++k) {
    const double ph = pi * k / 200.0;
    t.add({ph, f.offset + f.contrast * std::cos(2.0 * ph + f.phase)});
  }
  ctx.out.add_table("fit_" + stem + ".csv", t);
}

}  // namespace

void parity_fit(Context& ctx) {
  analysis::SpamMatrix spam;
  std::optional<analysis::ThresholdResult> thresholds;
  const auto ss = ctx.root.optional_child("spam");
  const auto hs = ctx.root.optional_child("histograms");
  if (ss && hs) hs->fail("dark_file", "give either spam.matrix or histograms, not both");
  if (ss) spam = read_spam(*ss);
  if (hs) {
    std::array<analysis::Histogram, 3> h{
        read_histogram(ctx.read_input(*hs, "dark_file"), hs->text("dark_file")),
        read_histogram(ctx.read_input(*hs, "one_bright_file"), hs->text("one_bright_file")),
        read_histogram(ctx.read_input(*hs, "bright_file"), hs->text("bright_file"))};
    analysis::ThresholdOptions to;
    to.dirichlet_samples = static_cast<std::size_t>(hs->integer("dirichlet_samples", 1, 10000000, 10000));
    to.credible_level = hs->number("credible_level", 0.683);
    if (!(to.credible_level > 0.0 && to.credible_level < 1.0)) {
      hs->fail("credible_level", "must lie in (0, 1)");
    }
    to.seed = ctx.seed;
    thresholds = analysis::optimize_thresholds(h, to);
    spam = thresholds->spam;
    ctx.summary.add("threshold_t1", thresholds->t1, "counts");
    ctx.summary.add("threshold_t2", thresholds->t2, "counts");
    ctx.summary.add("fidelity_product", thresholds->fidelity_product);
  }

  std::vector<analysis::PhasePoint> data;
  const auto ds = ctx.root.optional_child("data");
  const auto syn = ctx.root.optional_child("synthetic");
  if (ds && syn) syn->fail("contrast", "give either data or synthetic, not both");
  if (!ds && !syn) throw ConfigError("line 1: parity-fit needs a 'data' or a 'synthetic' section");
  if (ds) {
    std::uint32_t t1 = 0;
    std::uint32_t t2 = 0;
    if (ds->has("t1") || !thresholds) {
      t1 = static_cast<std::uint32_t>(ds->integer("t1", 0, 1 << 30));
      t2 = static_cast<std::uint32_t>(ds->integer("t2", 1, 1 << 30));
      if (t1 >= t2) ds->fail("t2", "must exceed t1");
    } else {
      t1 = thresholds->t1;
      t2 = thresholds->t2;
    }
    std::istringstream in(ctx.read_input(*ds, "counts_file"));
    data = analysis::read_count_record(in, t1, t2).classify();
  } else {
    data = synthesize_parity(*syn, spam, ctx.seed);
  }
  std::uint64_t total = 0;
  for (const auto& p : data) total += p.counts[0] + p.counts[1] + p.counts[2];
  if (data.empty() || total == 0) throw EmptyResult("count record contains no shots");

  analysis::MleOptions mo;
  if (const auto fs = ctx.root.optional_child("fit")) {
    mo.restarts = static_cast<int>(fs->integer("restarts", 1, 1000, 8));
    mo.interval_level = fs->number("interval_level", 0.683);
    if (!(mo.interval_level > 0.0 && mo.interval_level < 1.0)) {
      fs->fail("interval_level", "must lie in (0, 1)");
    }
  }
  mo.seed = ctx.seed;

  Table pt{{"empirical parity with 68.3% Beta credible intervals"},
           {"phase_rad", "parity", "lo", "hi"},
           {}};
  for (const auto& p : data) {
    const std::uint64_t n = p.counts[0] + p.counts[1] + p.counts[2];
    if (n == 0) continue;
    const auto iv = analysis::beta_interval(p.counts[0] + p.counts[2], n);
    pt.add({p.phase, analysis::empirical_parity(p), 2.0 * iv.lower - 1.0, 2.0 * iv.upper - 1.0});
  }
  ctx.out.add_table("parity.csv", pt);

  const auto corrected = analysis::mle_parity_fit(data, spam, true, mo);
  const auto raw = analysis::mle_parity_fit(data, spam, false, mo);
  add_fit(ctx, "corrected", corrected);
  add_fit(ctx, "uncorrected", raw);
  for (int i = 0; i < 3; ++i) ctx.summary.add("spam_fidelity_" + std::to_string(i), spam.m(i, i));
  ctx.summary.add("shots", static_cast<double>(total));
}

void micromotion(Context& ctx) {
  const IonSpecies ion = read_species(ctx.root);
  analysis::ObeConfig cfg;
  if (const auto os = ctx.root.optional_child("obe")) {
    cfg.gamma = two_pi * os->quantity("linewidth", Unit::frequency, cfg.gamma / two_pi);
    cfg.detuning = two_pi * os->quantity("detuning", Unit::frequency, -0.5 * cfg.gamma / two_pi);
    cfg.saturation = os->number("saturation", cfg.saturation);
    cfg.b_field = os->quantity("b_field", Unit::magnetic_field, cfg.b_field);
    cfg.omega_rf = two_pi * os->quantity("rf_frequency", Unit::frequency, cfg.omega_rf / two_pi);
    const double lambda = os->quantity("wavelength", Unit::length, two_pi / cfg.wavevector);
    if (!(lambda > 0.0)) os->fail("wavelength", "must be positive");
    cfg.wavevector = two_pi / lambda;
    cfg.g_ground = os->number("g_ground", cfg.g_ground);
    cfg.g_excited = os->number("g_excited", cfg.g_excited);
    if (os->has("polarization")) {
      const auto p = os->numbers("polarization");
      if (p.size() != 3) os->fail("polarization", "needs (pi, sigma+, sigma-) amplitudes");
      cfg.polarization = {p[0], p[1], p[2]};
    }
    cfg.max_periods = static_cast<int>(os->integer("max_periods", 1, 100000000, cfg.max_periods));
    cfg.periodicity_tol = os->number("periodicity_tol", cfg.periodicity_tol);
    if (!(cfg.gamma > 0.0)) os->fail("linewidth", "must be positive");
    if (cfg.saturation < 0.0) os->fail("saturation", "must be >= 0");
  }

  int points = 21;
  double beta_max = 0.5;
  unsigned threads = 1;
  if (const auto cs = ctx.root.optional_child("calibration")) {
    points = static_cast<int>(cs->integer("points", 4, 100000, 21));
    beta_max = cs->number("beta_max", 0.5);
    threads = static_cast<unsigned>(cs->integer("threads", 1, 1024, 1));
    if (!(beta_max > 0.0)) cs->fail("beta_max", "must be positive");
  }
  const auto cal = analysis::calibrate_micromotion(cfg, points, beta_max, threads);
  Table ct{{"detuning_Hz=" + format_number(cfg.detuning / two_pi),
            "saturation=" + format_number(cfg.saturation)},
           {"beta", "contrast"},
           {}};
  for (std::size_t i = 0; i < cal.betas.size(); ++i) ct.add({cal.betas[i], cal.contrasts[i]});
  ctx.out.add_table("calibration.csv", ct);
  ctx.summary.add("calibrated_contrast_max", cal.contrasts.back());
  ctx.summary.add("e_rf_per_unit_beta",
                  analysis::rf_field_from_beta(1.0, cfg.omega_rf, cfg.wavevector, ion), "V/m");

  if (const auto ms = ctx.root.optional_child("measurements")) {
    const auto contrasts = ms->numbers("contrasts");
    if (contrasts.empty()) throw EmptyResult("no measured contrasts to invert");
    Table et{{}, {"contrast", "beta", "e_rf_V_per_m"}, {}};
    for (std::size_t i = 0; i < contrasts.size(); ++i) {
      const auto e = analysis::beta_from_contrast(contrasts[i], cal, ion);
      et.add({contrasts[i], e.beta, e.e_rf});
      ctx.summary.add("beta [" + format_number(contrasts[i]) + "]", e.beta);
      ctx.summary.add("e_rf [" + format_number(contrasts[i]) + "]", e.e_rf, "V/m");
    }
    ctx.out.add_table("estimates.csv", et);
  }

  if (const auto scan = ctx.root.optional_child("detuning_scan")) {
    const double lo = scan->quantity("min", Unit::frequency);
    const double hi = scan->quantity("max", Unit::frequency);
    const auto n = scan->integer("points", 2, 100000, 21);
    const double beta = scan->number("beta", 0.1);
    if (!(hi > lo)) scan->fail("max", "must exceed the scan minimum");
    if (!(beta > 0.0)) scan->fail("beta", "must be positive");
    std::vector<double> sats{cfg.saturation};
    if (scan->has("saturations")) sats = scan->numbers("saturations");
    for (std::size_t s = 0; s < sats.size(); ++s) {
      Table t{{"saturation=" + format_number(sats[s]), "beta=" + format_number(beta)},
              {"detuning_MHz", "contrast"},
              {}};
      for (long long k = 0; k < n; ++k) {
        analysis::ObeConfig c = cfg;
        c.saturation = sats[s];
        c.beta = beta;
        c.detuning = two_pi * (lo + (hi - lo) * k / static_cast<double>(n - 1));
        t.add({c.detuning / two_pi / 1e6, analysis::obe_modulation_contrast(c).contrast});
      }
      ctx.out.add_table(indexed("detuning_scan", s), t);
    }
  }
}

void allan(Context& ctx) {
  std::vector<double> times;
  std::vector<double> freq;  // Hz offsets
  double period = 0.0;

  std::optional<analysis::Lineshape> line;
  if (const auto ls = ctx.root.optional_child("lineshape")) {
    analysis::Lineshape l;
    l.omega_center = 0.0;
    l.rabi = two_pi * ls->quantity("rabi_frequency", Unit::frequency);
    l.pulse_time = ls->quantity("pulse_time", Unit::time);
    if (!(l.rabi > 0.0)) ls->fail("rabi_frequency", "must be positive");
    if (!(l.pulse_time > 0.0)) ls->fail("pulse_time", "must be positive");
    if (l.rabi * l.pulse_time > pi * (1.0 + 1e-12)) ls->fail("pulse_time", "pulse area must not exceed pi");
    line = l;
  }
  // Probability samples become offsets by side-of-fringe inversion.
  auto invert = [&](double p) { return analysis::side_of_fringe_frequency(p, 0.0, *line).offset / two_pi; };

  const auto ds = ctx.root.optional_child("data");
  const auto syn = ctx.root.optional_child("synthetic");
  if (ds && syn) syn->fail("samples", "give either data or synthetic, not both");
  if (!ds && !syn) throw ConfigError("line 1: allan needs a 'data' or a 'synthetic' section");
  if (ds) {
    const std::string name = ds->text("samples_file");
    const CsvData d = parse_csv(ctx.read_input(*ds, "samples_file"), name);
    if (d.rows.empty()) throw EmptyResult(name + " contains no samples");
    times = d.column("t_s");
    if (d.find("frequency_Hz") >= 0) {
      freq = d.column("frequency_Hz");
    } else if (d.find("p_excited") >= 0) {
      if (!line) ds->fail("samples_file", "p_excited samples need a lineshape section");
      for (double p : d.column("p_excited")) freq.push_back(invert(p));
    } else {
      throw ConfigError(name + ": expected a frequency_Hz or a p_excited column");
    }
    if (times.size() < 2) throw EmptyResult(name + " needs at least two samples");
    period = times[1] - times[0];
    for (std::size_t i = 1; i < times.size(); ++i) {
      if (!(std::abs(times[i] - times[i - 1] - period) <= 1e-9 * std::abs(period)) || !(period > 0.0)) {
        throw ConfigError(name + ": sample times must be uniformly spaced and increasing");
      }
    }
  } else {
    const auto n = syn->integer("samples", 3, 100000000);
    period = syn->quantity("period", Unit::time);
    const double drift = syn->quantity("drift", Unit::drift, 0.0);
    const double sigma = syn->quantity("white_noise", Unit::frequency, 0.0);
    const double offset = syn->quantity("offset", Unit::frequency, 0.0);
    if (!(period > 0.0)) syn->fail("period", "must be positive");
    if (sigma < 0.0) syn->fail("white_noise", "must be >= 0");
    Rng rng(ctx.seed);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    for (long long i = 0; i < n; ++i) {
      const double t = period * static_cast<double>(i);
      const double f = offset + drift * t + sigma * normal(rng);
      times.push_back(t);
      if (line) {
        // Forward-simulate the parked probe, then invert as the analysis would.
        const double park = line->half_max_detuning();
        freq.push_back(invert(line->probability(park - two_pi * f)));
      } else {
        freq.push_back(f);
      }
    }
  }

  std::vector<double> taus;
  if (const auto ts = ctx.root.optional_child("taus")) {
    taus = ts->quantities("values", Unit::time);
  } else {
    for (double m = 1.0; 2.0 * m <= static_cast<double>(freq.size()); m *= 2.0) taus.push_back(m * period);
  }
  if (taus.empty()) throw EmptyResult("no averaging time fits in the record");

  Table ft{{}, {"t_s", "frequency_offset_Hz"}, {}};
  for (std::size_t i = 0; i < freq.size(); ++i) ft.add({times[i], freq[i]});
  ctx.out.add_table("frequency.csv", ft);

  const auto a = analysis::allan_deviation(freq, period, taus);
  Table at{{"overlapping Allan deviation, 68.3% chi-square band"},
           {"tau_s", "adev_Hz", "lower_Hz", "upper_Hz"},
           {}};
  for (std::size_t i = 0; i < a.taus.size(); ++i) {
    at.add({a.taus[i], a.deviation[i], a.lower[i], a.upper[i]});
  }
  ctx.out.add_table("allan.csv", at);

  std::vector<analysis::HeatingPoint> line_pts;
  for (std::size_t i = 0; i < freq.size(); ++i) line_pts.push_back({times[i], freq[i], 0.0});
  const auto drift = analysis::heating_rate_fit(line_pts);
  ctx.summary.add("samples", static_cast<double>(freq.size()));
  ctx.summary.add("sample_period", period, "s");
  ctx.summary.add("linear_drift", drift.slope, "Hz/s");
  ctx.summary.add("linear_drift_sigma", drift.slope_sigma, "Hz/s");
  ctx.summary.add("adev_at_shortest_tau", a.deviation.front(), "Hz");
}

void heating_fit(Context& ctx) {
  const IonSpecies ion = read_species(ctx.root);
  const Section ms = ctx.root.child("mode");
  const double omega = two_pi * ms.quantity("frequency", Unit::frequency);
  const double omega_ref = two_pi * ms.quantity("reference_frequency", Unit::frequency, 1.0e6);
  if (!(omega > 0.0)) ms.fail("frequency", "must be positive");
  if (!(omega_ref > 0.0)) ms.fail("reference_frequency", "must be positive");

  std::vector<analysis::HeatingPoint> pts;
  bool high_occupation = false;
  const auto ds = ctx.root.optional_child("data");
  const auto syn = ctx.root.optional_child("synthetic");
  if (ds && syn) syn->fail("heating_rate", "give either data or synthetic, not both");
  if (!ds && !syn) throw ConfigError("line 1: heating-fit needs a 'data' or a 'synthetic' section");
  if (ds) {
    const std::string name = ds->text("points_file");
    const CsvData d = parse_csv(ctx.read_input(*ds, "points_file"), name);
    const auto waits = d.column("wait_s");
    if (d.find("ratio") >= 0) {
      const auto r = d.column("ratio");
      const auto rs = d.find("ratio_sigma") >= 0 ? d.column("ratio_sigma") : std::vector<double>(r.size(), 0.0);
      for (std::size_t i = 0; i < r.size(); ++i) {
        const auto e = analysis::nbar_from_sideband_ratio(r[i], rs[i]);
        high_occupation = high_occupation || e.high_occupation_warning;
        pts.push_back({waits[i], e.nbar, e.sigma});
      }
    } else if (d.find("nbar") >= 0) {
      const auto nb = d.column("nbar");
      const auto sg = d.find("sigma") >= 0 ? d.column("sigma") : std::vector<double>(nb.size(), 0.0);
      for (std::size_t i = 0; i < nb.size(); ++i) pts.push_back({waits[i], nb[i], sg[i]});
    } else {
      throw ConfigError(name + ": expected a ratio or an nbar column");
    }
  } else {
    const auto waits = syn->quantities("wait_times", Unit::time);
    const double rate = syn->quantity("heating_rate", Unit::quanta_rate);
    const double n0 = syn->number("initial_nbar", 0.0);
    const double sigma = syn->number("nbar_sigma", 0.0);
    if (sigma < 0.0) syn->fail("nbar_sigma", "must be >= 0");
    Rng rng(ctx.seed);
    boost::random::normal_distribution<double> normal(0.0, 1.0);
    for (double t : waits) pts.push_back({t, n0 + rate * t + sigma * normal(rng), sigma});
  }
  if (pts.empty()) throw EmptyResult("no heating points to fit");

  const auto fit = analysis::heating_rate_fit(pts);
  Table ht{{}, {"wait_s", "nbar", "sigma"}, {}};
  for (const auto& p : pts) ht.add({p.t, p.nbar, p.sigma});
  ctx.out.add_table("heating.csv", ht);
  Table lt{{"fitted line"}, {"wait_s", "nbar_fit"}, {}};
  double tmin = pts.front().t, tmax = pts.front().t;
  for (const auto& p : pts) {
    tmin = std::min(tmin, p.t);
    tmax = std::max(tmax, p.t);
  }
  for (int k = 0; k <= 50; ++k) {
    const double t = tmin + (tmax - tmin) * k / 50.0;
    lt.add({t, fit.intercept + fit.slope * t});
  }
  ctx.out.add_table("heating_fit_line.csv", lt);

  ctx.summary.add("heating_rate", fit.slope, "quanta/s");
  ctx.summary.add("heating_rate_sigma", fit.slope_sigma, "quanta/s");
  ctx.summary.add("intercept_nbar", fit.intercept);
  ctx.summary.add("chi2", fit.chi2);
  ctx.summary.add("dof", fit.dof);
  ctx.summary.add_flag("high_occupation_warning", high_occupation);
  if (fit.slope >= 0.0) {
    const auto noise = analysis::field_noise_from_heating(fit.slope, omega, ion, omega_ref);
    ctx.summary.add("field_noise_psd", noise.s_e, "V^2/m^2/Hz");
    ctx.summary.add("field_noise_psd_referred", noise.s_e_referred, "V^2/m^2/Hz");
    ctx.summary.add("reference_frequency", omega_ref / two_pi / 1e6, "MHz");
  }
}

}  // namespace iontrap::cli
