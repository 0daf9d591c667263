#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/tools/roots.hpp>
#include <Eigen/LU>
#include <unsupported/Eigen/NonLinearOptimization>

#include "iontrap/analysis.hpp"

namespace iontrap::analysis {

NbarEstimate nbar_from_sideband_ratio(double r, double sigma_r) {
  detail::require(std::isfinite(r) && r >= 0.0 && r < 1.0, "sideband ratio must lie in [0, 1)");
  detail::require(std::isfinite(sigma_r) && sigma_r >= 0.0, "ratio uncertainty must be >= 0");
  NbarEstimate e;
  const double q = 1.0 - r;
  e.nbar = r / q;
  e.sigma = sigma_r / (q * q);
  e.high_occupation_warning = e.nbar > kThermometryWarnNbar;
  return e;
}

LineFit heating_rate_fit(const std::vector<HeatingPoint>& points) {
  detail::require(points.size() >= 2, "heating-rate fit needs at least two points");
  const bool weighted = points.front().sigma > 0.0;
  for (const auto& p : points) {
    detail::require(std::isfinite(p.t) && std::isfinite(p.nbar) && std::isfinite(p.sigma),
                    "heating points must be finite");
    detail::require(weighted ? p.sigma > 0.0 : p.sigma == 0.0,
                    "give a positive sigma for every point or for none");
  }
  double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& p : points) {
    const double w = weighted ? 1.0 / (p.sigma * p.sigma) : 1.0;
    s += w;
    sx += w * p.t;
    sy += w * p.nbar;
    sxx += w * p.t * p.t;
    sxy += w * p.t * p.nbar;
  }
  const double delta = s * sxx - sx * sx;
  if (!(delta > 1e-14 * s * sxx) || sxx == 0.0) {
    throw InvalidInput("heating-rate fit: wait times are degenerate");
  }
  LineFit f;
  f.slope = (s * sxy - sx * sy) / delta;
  f.intercept = (sxx * sy - sx * sxy) / delta;
  f.dof = static_cast<int>(points.size()) - 2;
  for (const auto& p : points) {
    const double w = weighted ? 1.0 / (p.sigma * p.sigma) : 1.0;
    const double res = p.nbar - f.intercept - f.slope * p.t;
    f.chi2 += w * res * res;
  }
  const double scale = weighted ? 1.0 : (f.dof > 0 ? f.chi2 / f.dof : 0.0);
  f.slope_sigma = std::sqrt(scale * s / delta);
  f.intercept_sigma = std::sqrt(scale * sxx / delta);
  return f;
}

FieldNoise field_noise_from_heating(double nbar_dot, double omega, const IonSpecies& ion,
                                    double omega_ref) {
  ion.validate();
  detail::require(std::isfinite(nbar_dot) && nbar_dot >= 0.0, "heating rate must be >= 0");
  detail::require(std::isfinite(omega) && omega > 0.0, "mode frequency must be positive");
  detail::require(std::isfinite(omega_ref) && omega_ref > 0.0, "reference frequency must be positive");
  FieldNoise n;
  n.s_e = 4.0 * ion.mass * constants::hbar * omega * nbar_dot / (ion.charge * ion.charge);
  n.omega_ref = omega_ref;
  n.s_e_referred = n.s_e * omega / omega_ref;
  return n;
}

AllanResult allan_deviation(const std::vector<double>& y, double period,
                            const std::vector<double>& taus) {
  detail::require(y.size() >= 3, "Allan deviation needs at least three samples");
  detail::require(std::isfinite(period) && period > 0.0, "sample period must be positive");
  for (double v : y) detail::require(std::isfinite(v), "samples must be finite");
  const std::size_t n = y.size();
  const double record = static_cast<double>(n) * period;

  // Prefix sums make each tau O(N).
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + (y[i] - y[0]);

  AllanResult out;
  for (double tau : taus) {
    detail::require(std::isfinite(tau) && tau > 0.0, "tau must be positive");
    const double ratio = tau / period;
    const double mr = std::round(ratio);
    if (mr < 1.0 || std::abs(ratio - mr) > 1e-9 * ratio) {
      throw InvalidInput("tau " + std::to_string(tau) + " s is not a multiple of the sample period");
    }
    if (tau > 0.5 * record * (1.0 + 1e-12)) {
      throw InvalidInput("tau " + std::to_string(tau) + " s exceeds half the record length");
    }
    const auto m = static_cast<std::size_t>(mr);
    if (2 * m > n) throw InvalidInput("tau exceeds half the record length");
    const std::size_t terms = n - 2 * m + 1;
    double acc = 0.0;
    for (std::size_t j = 0; j < terms; ++j) {
      // sum_{i=j}^{j+m-1} (y_{i+m} - y_i)
      const double d = (cum[j + 2 * m] - cum[j + m]) - (cum[j + m] - cum[j]);
      acc += d * d;
    }
    const double dm = static_cast<double>(m);
    const double avar = acc / (2.0 * dm * dm * static_cast<double>(terms));
    const double dev = std::sqrt(avar);

    const double dn = static_cast<double>(n);
    double edf = (3.0 * (dn - 1.0) / (2.0 * dm) - 2.0 * (dn - 2.0) / dn) * 4.0 * dm * dm /
                 (4.0 * dm * dm + 5.0);
    edf = std::max(edf, 1.0);
    const boost::math::chi_squared chi(edf);
    const double lo_q = boost::math::quantile(chi, 0.5 + 0.683 / 2.0);
    const double hi_q = boost::math::quantile(chi, 0.5 - 0.683 / 2.0);

    out.taus.push_back(tau);
    out.deviation.push_back(dev);
    out.lower.push_back(dev * std::sqrt(edf / lo_q));
    out.upper.push_back(dev * std::sqrt(edf / hi_q));
    out.edf.push_back(edf);
  }
  return out;
}

// ---------------------------------------------------------------------------

void Lineshape::validate() const {
  detail::require(std::isfinite(omega_center), "line center must be finite");
  detail::require(std::isfinite(rabi) && rabi > 0.0, "Rabi rate must be positive");
  detail::require(std::isfinite(pulse_time) && pulse_time > 0.0, "pulse time must be positive");
  detail::require(rabi * pulse_time <= constants::pi * (1.0 + 1e-12),
                  "side-of-fringe inversion needs a pulse area of at most pi");
}

double Lineshape::probability(double d) const {
  const double w2 = rabi * rabi + d * d;
  const double s = std::sin(0.5 * std::sqrt(w2) * pulse_time);
  return rabi * rabi / w2 * s * s;
}

double Lineshape::slope(double d) const {
  const double w2 = rabi * rabi + d * d;
  const double w = std::sqrt(w2);
  const double s = std::sin(0.5 * w * pulse_time);
  return rabi * rabi * d / w2 * (-2.0 * s * s / w2 + pulse_time * std::sin(w * pulse_time) / (2.0 * w));
}

double Lineshape::first_zero_detuning() const {
  const double w = constants::two_pi / pulse_time;
  return std::sqrt(w * w - rabi * rabi);
}

namespace {

double invert_flank(const Lineshape& line, double p) {
  const double hi = line.first_zero_detuning();
  auto f = [&](double d) { return line.probability(d) - p; };
  if (f(0.0) <= 0.0) return 0.0;
  boost::math::tools::eps_tolerance<double> tol(50);
  std::uintmax_t it = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, 0.0, hi, f(0.0), f(hi), tol, it);
  return 0.5 * (a + b);
}

}  // namespace

double Lineshape::half_max_detuning() const {
  validate();
  return invert_flank(*this, 0.5 * probability(0.0));
}

FringeEstimate side_of_fringe_frequency(double p, double sigma_p, const Lineshape& line) {
  line.validate();
  detail::require(std::isfinite(sigma_p) && sigma_p >= 0.0, "probability uncertainty must be >= 0");
  const double peak = line.probability(0.0);
  if (!(std::isfinite(p) && p > 0.0 && p <= peak)) {
    throw InvalidInput("excitation probability " + std::to_string(p) +
                       " lies outside the invertible flank (0, " + std::to_string(peak) + "]");
  }
  const double park = line.half_max_detuning();
  const double d = invert_flank(line, p);
  FringeEstimate e;
  // Probe at omega_center + park sees detuning d from the true resonance.
  e.offset = park - d;
  e.omega = line.omega_center + e.offset;
  const double s = std::abs(line.slope(d));
  e.sigma = s > 0.0 ? sigma_p / s : std::numeric_limits<double>::infinity();
  return e;
}

// ---------------------------------------------------------------------------

namespace {

struct DecayFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  const std::vector<DecayPoint>* pts;
  DecayModel model;
  bool weighted;

  int inputs() const { return 2; }
  int values() const { return static_cast<int>(pts->size()); }

  double weight(const DecayPoint& p) const { return weighted ? 1.0 / p.sigma : 1.0; }

  // x = (c0, log T2)
  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& fvec) const {
    const double t2 = std::exp(x[1]);
    for (std::size_t i = 0; i < pts->size(); ++i) {
      const auto& p = (*pts)[i];
      const double u = p.t / t2;
      const double e = model == DecayModel::exponential ? std::exp(-u) : std::exp(-u * u);
      fvec[static_cast<Eigen::Index>(i)] = (x[0] * e - p.contrast) * weight(p);
    }
    return 0;
  }

  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& jac) const {
    const double t2 = std::exp(x[1]);
    for (std::size_t i = 0; i < pts->size(); ++i) {
      const auto& p = (*pts)[i];
      const double u = p.t / t2;
      const auto r = static_cast<Eigen::Index>(i);
      if (model == DecayModel::exponential) {
        const double e = std::exp(-u);
        jac(r, 0) = e * weight(p);
        jac(r, 1) = x[0] * e * u * weight(p);
      } else {
        const double e = std::exp(-u * u);
        jac(r, 0) = e * weight(p);
        jac(r, 1) = x[0] * e * 2.0 * u * u * weight(p);
      }
    }
    return 0;
  }
};

}  // namespace

DecayFit fit_contrast_decay(const std::vector<DecayPoint>& points, DecayModel model) {
  detail::require(points.size() >= 3, "contrast-decay fit needs at least three points");
  const bool weighted = points.front().sigma > 0.0;
  for (const auto& p : points) {
    detail::require(std::isfinite(p.t) && p.t >= 0.0 && std::isfinite(p.contrast),
                    "decay points must be finite with t >= 0");
    detail::require(weighted ? p.sigma > 0.0 : p.sigma == 0.0,
                    "give a positive sigma for every point or for none");
  }

  // Seed: log-linear regression on the positive contrasts.
  double c0 = 0.0;
  double t_seed = 0.0;
  {
    double s = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& p : points) {
      if (p.contrast <= 0.0) continue;
      const double x = model == DecayModel::exponential ? p.t : p.t * p.t;
      const double y = std::log(p.contrast);
      s += 1;
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double delta = s * sxx - sx * sx;
    if (s >= 2 && delta > 0.0) {
      const double slope = (s * sxy - sx * sy) / delta;
      c0 = std::exp((sxx * sy - sx * sxy) / delta);
      if (slope < 0.0) {
        t_seed = model == DecayModel::exponential ? -1.0 / slope : std::sqrt(-1.0 / slope);
      }
    }
  }
  double tmax = 0.0;
  for (const auto& p : points) tmax = std::max(tmax, p.t);
  if (!(c0 > 0.0)) {
    for (const auto& p : points) c0 = std::max(c0, p.contrast);
  }
  if (!(t_seed > 0.0) || !std::isfinite(t_seed)) t_seed = tmax > 0.0 ? tmax : 1.0;
  if (!(c0 > 0.0)) throw NumericalError("contrast-decay fit: no positive contrast to fit");

  DecayFunctor functor{&points, model, weighted};
  Eigen::VectorXd x(2);
  x << c0, std::log(t_seed);
  Eigen::LevenbergMarquardt<DecayFunctor> lm(functor);
  lm.parameters.xtol = 1e-14;
  lm.parameters.ftol = 1e-14;
  lm.parameters.maxfev = 2000;
  const auto status = lm.minimize(x);
  using S = Eigen::LevenbergMarquardtSpace::Status;
  if (status == S::ImproperInputParameters || status == S::TooManyFunctionEvaluation ||
      !x.allFinite()) {
    throw NumericalError("contrast-decay fit did not converge");
  }

  DecayFit f;
  f.c0 = x[0];
  f.t2 = std::exp(x[1]);
  f.iterations = static_cast<int>(lm.nfev);
  Eigen::VectorXd r(static_cast<Eigen::Index>(points.size()));
  functor(x, r);
  f.chi2 = r.squaredNorm();
  Eigen::MatrixXd jac(static_cast<Eigen::Index>(points.size()), 2);
  functor.df(x, jac);
  const Eigen::Matrix2d jtj = jac.transpose() * jac;
  const int dof = static_cast<int>(points.size()) - 2;
  const double scale = weighted ? 1.0 : (dof > 0 ? f.chi2 / dof : 0.0);
  if (std::abs(jtj.determinant()) > 0.0) {
    const Eigen::Matrix2d cov = jtj.inverse() * scale;
    f.c0_sigma = std::sqrt(std::max(0.0, cov(0, 0)));
    f.t2_sigma = f.t2 * std::sqrt(std::max(0.0, cov(1, 1)));
  } else {
    throw NumericalError("contrast-decay fit: singular Jacobian");
  }
  return f;
}

double level_crossing_time(const std::vector<double>& times, const std::vector<double>& values,
                           double level) {
  detail::require(times.size() == values.size() && times.size() >= 2,
                  "crossing search needs matching time and value samples");
  for (std::size_t i = 0; i < times.size(); ++i) {
    detail::require(std::isfinite(times[i]) && std::isfinite(values[i]), "samples must be finite");
    if (i > 0) detail::require(times[i] > times[i - 1], "times must be strictly increasing");
  }
  if (values.front() <= level) return times.front();
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (values[i] <= level) {
      const double f = (values[i - 1] - level) / (values[i - 1] - values[i]);
      return times[i - 1] + f * (times[i] - times[i - 1]);
    }
  }
  throw NumericalError("curve never falls to " + std::to_string(level) + " within the sampled range");
}

// ---------------------------------------------------------------------------

Interval beta_interval(std::uint64_t k, std::uint64_t n, double level) {
  detail::require(n >= 1 && k <= n, "beta_interval needs 0 <= k <= n and n >= 1");
  detail::require(std::isfinite(level) && level > 0.0 && level < 1.0,
                  "credible level must lie in (0, 1)");
  const boost::math::beta_distribution<double> dist(static_cast<double>(k) + 1.0,
                                                    static_cast<double>(n - k) + 1.0);
  if (k == n) return {boost::math::quantile(dist, 1.0 - level), 1.0};
  if (k == 0) return {0.0, boost::math::quantile(dist, level)};
  return {boost::math::quantile(dist, 0.5 * (1.0 - level)),
          boost::math::quantile(dist, 0.5 * (1.0 + level))};
}

}  // namespace iontrap::analysis
