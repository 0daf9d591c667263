#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <string>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <Eigen/Dense>

#include "iontrap/analysis.hpp"
#include "iontrap/optimize.hpp"
#include "iontrap/rng.hpp"

namespace iontrap::analysis {

Histogram histogram_from_counts(const std::vector<std::uint32_t>& counts) {
  Histogram h;
  for (std::uint32_t c : counts) {
    if (c >= h.size()) h.resize(static_cast<std::size_t>(c) + 1, 0);
    ++h[c];
  }
  return h;
}

void SpamMatrix::validate() const {
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (int r = 0; r < 3; ++r) {
      detail::require(std::isfinite(m(r, c)) && m(r, c) >= 0.0 && m(r, c) <= 1.0,
                      "SPAM matrix entries must lie in [0, 1]");
      s += m(r, c);
    }
    detail::require(std::abs(s - 1.0) <= 1e-9, "SPAM matrix columns must sum to 1");
  }
}

int classify_counts(std::uint32_t counts, std::uint32_t t1, std::uint32_t t2) {
  if (counts < t1) return 0;
  if (counts < t2) return 1;
  return 2;
}

ThresholdResult optimize_thresholds(const std::array<Histogram, 3>& prepared,
                                    const ThresholdOptions& options) {
  detail::require(options.dirichlet_samples >= 10, "need at least 10 Dirichlet samples");
  detail::require(options.credible_level > 0.0 && options.credible_level < 1.0,
                  "credible level must lie in (0, 1)");
  std::size_t kmax = 0;
  std::array<double, 3> totals{};
  for (int s = 0; s < 3; ++s) {
    for (std::uint64_t v : prepared[static_cast<std::size_t>(s)]) totals[static_cast<std::size_t>(s)] += static_cast<double>(v);
    detail::require(totals[static_cast<std::size_t>(s)] > 0.0, "every prepared-state histogram needs shots");
    kmax = std::max(kmax, prepared[static_cast<std::size_t>(s)].size());
  }

  // below[s][t] = fraction of state-s shots with counts < t, t = 0 .. kmax.
  std::array<std::vector<double>, 3> below;
  for (std::size_t s = 0; s < 3; ++s) {
    below[s].assign(kmax + 1, 0.0);
    for (std::size_t t = 1; t <= kmax; ++t) {
      const double h = t - 1 < prepared[s].size() ? static_cast<double>(prepared[s][t - 1]) : 0.0;
      below[s][t] = below[s][t - 1] + h;
    }
    for (double& v : below[s]) v /= totals[s];
  }

  ThresholdResult best;
  best.fidelity_product = -1.0;
  for (std::size_t t1 = 1; t1 <= kmax; ++t1) {
    for (std::size_t t2 = t1 + 1; t2 <= kmax; ++t2) {
      const double f0 = below[0][t1];
      const double f1 = below[1][t2] - below[1][t1];
      const double f2 = 1.0 - below[2][t2];
      const double prod = f0 * f1 * f2;
      if (prod > best.fidelity_product) {
        best.fidelity_product = prod;
        best.t1 = static_cast<std::uint32_t>(t1);
        best.t2 = static_cast<std::uint32_t>(t2);
      }
    }
  }
  if (!(best.fidelity_product > 0.0)) {
    throw NumericalError("threshold optimization: fidelity product is zero for every threshold pair");
  }

  // Classified counts per prepared column.
  Eigen::Matrix3d counts = Eigen::Matrix3d::Zero();
  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t c = 0; c < prepared[s].size(); ++c) {
      const int cat = classify_counts(static_cast<std::uint32_t>(c), best.t1, best.t2);
      counts(cat, static_cast<Eigen::Index>(s)) += static_cast<double>(prepared[s][c]);
    }
  }
  SpamMatrix& sm = best.spam;
  sm.credible_level = options.credible_level;
  for (int c = 0; c < 3; ++c) {
    const double n = counts.col(c).sum();
    sm.m.col(c) = counts.col(c) / n;
    // Renormalize against rounding so columns sum to 1 exactly enough.
    sm.m.col(c) /= sm.m.col(c).sum();
  }

  const std::size_t ns = options.dirichlet_samples;
  const double tail = 0.5 * (1.0 - options.credible_level);
  for (int c = 0; c < 3; ++c) {
    Rng rng = Rng::stream(options.seed, static_cast<std::uint64_t>(c));
    std::array<boost::random::gamma_distribution<double>, 3> gam = {
        boost::random::gamma_distribution<double>(counts(0, c) + 1.0),
        boost::random::gamma_distribution<double>(counts(1, c) + 1.0),
        boost::random::gamma_distribution<double>(counts(2, c) + 1.0)};
    std::array<std::vector<double>, 3> draws;
    for (auto& d : draws) d.reserve(ns);
    for (std::size_t k = 0; k < ns; ++k) {
      std::array<double, 3> g{};
      for (int r = 0; r < 3; ++r) g[static_cast<std::size_t>(r)] = gam[static_cast<std::size_t>(r)](rng);
      const double sum = g[0] + g[1] + g[2];
      for (int r = 0; r < 3; ++r) draws[static_cast<std::size_t>(r)].push_back(g[static_cast<std::size_t>(r)] / sum);
    }
    for (int r = 0; r < 3; ++r) {
      auto& d = draws[static_cast<std::size_t>(r)];
      std::sort(d.begin(), d.end());
      const auto lo = static_cast<std::size_t>(std::floor(tail * static_cast<double>(ns - 1)));
      const auto hi = static_cast<std::size_t>(std::ceil((1.0 - tail) * static_cast<double>(ns - 1)));
      sm.lower(r, c) = d[lo];
      sm.upper(r, c) = d[hi];
    }
  }
  return best;
}

std::vector<PhasePoint> CountRecord::classify() const {
  detail::require(t1 < t2, "thresholds must satisfy t1 < t2");
  detail::require(phases.size() == shots.size(), "count record phases and shot lists differ in length");
  std::vector<PhasePoint> out;
  out.reserve(phases.size());
  for (std::size_t k = 0; k < phases.size(); ++k) {
    PhasePoint p;
    p.phase = phases[k];
    for (std::uint32_t c : shots[k]) ++p.counts[static_cast<std::size_t>(classify_counts(c, t1, t2))];
    out.push_back(p);
  }
  return out;
}

CountRecord read_count_record(std::istream& in, std::uint32_t t1, std::uint32_t t2) {
  detail::require(t1 < t2, "thresholds must satisfy t1 < t2");
  CountRecord rec;
  rec.t1 = t1;
  rec.t2 = t2;
  std::map<double, std::size_t> index;
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    if (!header) {
      if (line.substr(first) != "phase_rad,counts") {
        throw InvalidInput("count record line " + std::to_string(line_no) +
                           ": expected header 'phase_rad,counts'");
      }
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw InvalidInput("count record line " + std::to_string(line_no) + ": expected two columns");
    }
    double phase = 0.0;
    std::uint32_t counts = 0;
    const char* b = line.data();
    const auto r1 = std::from_chars(b + first, b + comma, phase);
    const auto r2 = std::from_chars(b + comma + 1, b + line.size(), counts);
    if (r1.ec != std::errc() || r1.ptr != b + comma || r2.ec != std::errc() ||
        r2.ptr != b + line.size() || !std::isfinite(phase)) {
      throw InvalidInput("count record line " + std::to_string(line_no) + ": malformed row");
    }
    auto [it, inserted] = index.emplace(phase, rec.phases.size());
    if (inserted) {
      rec.phases.push_back(phase);
      rec.shots.emplace_back();
    }
    rec.shots[it->second].push_back(counts);
  }
  if (!header) throw InvalidInput("count record: missing header");
  return rec;
}

double empirical_parity(const PhasePoint& p) {
  const double n = static_cast<double>(p.counts[0] + p.counts[1] + p.counts[2]);
  detail::require(n > 0.0, "phase point has no shots");
  return (static_cast<double>(p.counts[0] + p.counts[2]) - static_cast<double>(p.counts[1])) / n;
}

namespace {

struct ParityModel {
  const std::vector<PhasePoint>& data;
  Eigen::Vector3d alpha;  // p'_j = alpha_j + beta_j Pi
  Eigen::Vector3d beta;

  ParityModel(const std::vector<PhasePoint>& d, const Eigen::Matrix3d& m) : data(d) {
    for (int j = 0; j < 3; ++j) {
      alpha[j] = 0.25 * (m(j, 0) + m(j, 2)) + 0.5 * m(j, 1);
      beta[j] = 0.25 * (m(j, 0) + m(j, 2)) - 0.5 * m(j, 1);
    }
  }

  double nll(const Eigen::VectorXd& x) const {
    const double c = x[0], ph = x[1], b = x[2];
    if (c < 0.0 || std::abs(b) + c > 1.0) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (const auto& pt : data) {
      const double pi = b + c * std::cos(2.0 * pt.phase + ph);
      for (int j = 0; j < 3; ++j) {
        const auto n = pt.counts[static_cast<std::size_t>(j)];
        if (n == 0) continue;
        const double p = alpha[j] + beta[j] * pi;
        if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
        s -= static_cast<double>(n) * std::log(p);
      }
    }
    return s;
  }

  Eigen::Matrix3d hessian(const Eigen::Vector3d& x) const {
    const double c = x[0], ph = x[1], b = x[2];
    Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
    for (const auto& pt : data) {
      const double psi = 2.0 * pt.phase + ph;
      const double cs = std::cos(psi), sn = std::sin(psi);
      const double pi = b + c * cs;
      const Eigen::Vector3d g(cs, -c * sn, 1.0);
      Eigen::Matrix3d g2 = Eigen::Matrix3d::Zero();
      g2(0, 1) = g2(1, 0) = -sn;
      g2(1, 1) = -c * cs;
      for (int j = 0; j < 3; ++j) {
        const auto n = static_cast<double>(pt.counts[static_cast<std::size_t>(j)]);
        if (n == 0.0) continue;
        const double p = alpha[j] + beta[j] * pi;
        h += n * (beta[j] * beta[j] / (p * p)) * (g * g.transpose()) - n * (beta[j] / p) * g2;
      }
    }
    return h;
  }
};

double wrap_phase(double p) {
  p = std::remainder(p, 2.0 * constants::pi);
  return p <= -constants::pi ? p + 2.0 * constants::pi : p;
}

// Profile-likelihood interval for the contrast: the set of C whose profile
// NLL (phase and offset re-minimized) lies within Delta of the optimum,
// clipped to the physical range [0, 1].
Interval profile_interval(const ParityModel& model, const Eigen::Vector3d& best, double best_val,
                          double level) {
  const boost::math::normal_distribution<double> z;
  const double zq = boost::math::quantile(z, 0.5 * (1.0 + level));
  const double delta = 0.5 * zq * zq;
  optimize::NelderMeadOptions nm;
  nm.max_evaluations = 2000;
  nm.x_tol = 1e-11;
  nm.f_abs_tol = 1e-12;

  auto profile = [&](double c) {
    const double room = 1.0 - c;
    auto f = [&](const Eigen::VectorXd& y) {
      return model.nll(Eigen::Vector3d(c, y[0], y[1]));
    };
    Eigen::VectorXd y0(2);
    y0 << best[1], std::clamp(best[2], -0.5 * room, 0.5 * room);
    const Eigen::Vector2d step(0.05, std::max(1e-12, std::min(0.05, 0.25 * room)));
    return optimize::nelder_mead(f, y0, step, nm).value - best_val - delta;
  };
  auto solve = [&](double inside, double outside) {
    // inside: profile below threshold; outside: above.
    for (int it = 0; it < 60 && std::abs(outside - inside) > 1e-9; ++it) {
      const double mid = 0.5 * (inside + outside);
      (profile(mid) <= 0.0 ? inside : outside) = mid;
    }
    return 0.5 * (inside + outside);
  };

  const double c_hat = best[0];
  const double c_top = 1.0 - 1e-9;
  Interval iv{0.0, 1.0};
  if (c_hat < c_top && profile(c_top) > 0.0) iv.upper = solve(c_hat, c_top);
  if (c_hat > 0.0 && profile(0.0) > 0.0) iv.lower = solve(c_hat, 0.0);
  return iv;
}

}  // namespace

MleParityResult mle_parity_fit(const std::vector<PhasePoint>& data, const SpamMatrix& spam,
                               bool correct, const MleOptions& options) {
  detail::require(data.size() >= 3, "parity fit needs at least three phases");
  detail::require(options.restarts >= 1, "parity fit needs at least one start");
  for (const auto& p : data) {
    detail::require(std::isfinite(p.phase), "phases must be finite");
    detail::require(p.counts[0] + p.counts[1] + p.counts[2] > 0, "every phase needs shots");
  }
  if (correct) spam.validate();
  const ParityModel model(data, correct ? spam.m : Eigen::Matrix3d::Identity());

  // Linear least-squares seed on the empirical parity.
  Eigen::MatrixXd a(static_cast<Eigen::Index>(data.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t k = 0; k < data.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    a(i, 0) = 1.0;
    a(i, 1) = std::cos(2.0 * data[k].phase);
    a(i, 2) = std::sin(2.0 * data[k].phase);
    y[i] = empirical_parity(data[k]);
  }
  const Eigen::Vector3d ls = a.colPivHouseholderQr().solve(y);
  double b0 = std::clamp(ls[0], -0.5, 0.5);
  double c0 = std::hypot(ls[1], ls[2]);
  const double ph0 = std::atan2(-ls[2], ls[1]);
  c0 = std::clamp(c0, 0.05, 0.98 * (1.0 - std::abs(b0)));

  Rng rng(options.seed);
  optimize::NelderMeadOptions nm;
  nm.max_evaluations = 3000;
  nm.x_tol = 1e-10;
  nm.f_abs_tol = 1e-12;
  auto objective = [&](const Eigen::VectorXd& x) { return model.nll(x); };

  Eigen::VectorXd best;
  double best_val = std::numeric_limits<double>::infinity();
  for (int r = 0; r < options.restarts; ++r) {
    Eigen::VectorXd x0(3);
    if (r == 0) {
      x0 << c0, ph0, b0;
    } else {
      const double b = b0 * (0.5 + rng.uniform());
      const double cmax = 0.98 * (1.0 - std::abs(b));
      x0 << cmax * (0.3 + 0.7 * rng.uniform()), ph0 + constants::pi * (rng.uniform() - 0.5), b;
    }
    if (!std::isfinite(model.nll(x0))) {
      x0[0] *= 0.5;
      x0[2] *= 0.5;
    }
    const auto res = optimize::nelder_mead(objective, x0, Eigen::Vector3d(0.05, 0.2, 0.05), nm);
    if (res.value < best_val) {
      best_val = res.value;
      best = res.x;
    }
  }
  if (!std::isfinite(best_val)) throw NumericalError("parity fit failed to find a finite likelihood");
  // Polish from the best point with a fresh small simplex.
  {
    const auto res = optimize::nelder_mead(objective, best, Eigen::Vector3d(1e-3, 1e-2, 1e-3), nm);
    if (res.value <= best_val) {
      best_val = res.value;
      best = res.x;
    }
  }

  MleParityResult out;
  out.contrast = best[0];
  out.phase = wrap_phase(best[1]);
  out.offset = best[2];
  out.nll = best_val;

  const Eigen::Matrix3d h = model.hessian(Eigen::Vector3d(best[0], best[1], best[2]));
  const Eigen::LDLT<Eigen::Matrix3d> ldlt(h);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || !(std::abs(h.determinant()) > 0.0)) {
    throw NumericalError("parity fit: singular or indefinite Hessian at the optimum");
  }
  const Eigen::Matrix3d cov = h.inverse();
  if (!(cov(0, 0) > 0.0) || !std::isfinite(cov(0, 0))) {
    throw NumericalError("parity fit: non-positive contrast variance");
  }
  out.sigma = std::sqrt(cov(0, 0));
  const Interval iv = profile_interval(model, Eigen::Vector3d(best[0], best[1], best[2]), best_val,
                                       options.interval_level);
  out.lower = iv.lower;
  out.upper = iv.upper;
  return out;
}

}  // namespace iontrap::analysis
