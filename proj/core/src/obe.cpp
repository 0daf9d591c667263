#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <thread>

// Boost 1.74's pchip calls isnan unqualified.
namespace boost::math::interpolators {
using std::isnan;
}
#include <boost/math/interpolators/pchip.hpp>
#include <Eigen/Dense>

#include "iontrap/analysis.hpp"

namespace iontrap::analysis {

namespace {

using cplx = std::complex<double>;
using M4 = Eigen::Matrix4cd;

// Basis: 0 g(-1/2), 1 g(+1/2), 2 e(-1/2), 3 e(+1/2).
constexpr int kGm = 0, kGp = 1, kEm = 2, kEp = 3;

// <1/2 m_g; 1 q | 1/2 m_e> for the four allowed pairs.
const double kCgPiMinus = 1.0 / std::sqrt(3.0);    // g- -> e-
const double kCgPiPlus = -1.0 / std::sqrt(3.0);    // g+ -> e+
const double kCgSigmaPlus = std::sqrt(2.0 / 3.0);  // g- -> e+
const double kCgSigmaMinus = -std::sqrt(2.0 / 3.0);  // g+ -> e-

struct Obe {
  double zeeman_g[2];
  double zeeman_e[2];
  double detuning;
  double mod_amp;  // beta * Omega_RF
  double omega_rf;
  M4 coupling;     // time-independent laser coupling
  std::array<M4, 3> jumps;
  M4 decay_anti;  // sum L^+ L / 2

  explicit Obe(const ObeConfig& c) {
    const double mub = constants::bohr_magneton * c.b_field / constants::hbar;
    zeeman_g[0] = -0.5 * c.g_ground * mub;
    zeeman_g[1] = 0.5 * c.g_ground * mub;
    zeeman_e[0] = -0.5 * c.g_excited * mub;
    zeeman_e[1] = 0.5 * c.g_excited * mub;
    detuning = c.detuning;
    mod_amp = c.beta * c.omega_rf;
    omega_rf = c.omega_rf;

    const double norm = std::sqrt(c.polarization[0] * c.polarization[0] +
                                  c.polarization[1] * c.polarization[1] +
                                  c.polarization[2] * c.polarization[2]);
    const double e_pi = c.polarization[0] / norm;
    const double e_sp = c.polarization[1] / norm;
    const double e_sm = c.polarization[2] / norm;
    const double half_rabi = 0.5 * c.gamma * std::sqrt(0.5 * c.saturation);

    coupling = M4::Zero();
    auto link = [&](int g, int e, double w) {
      coupling(e, g) += half_rabi * w;
      coupling(g, e) += half_rabi * w;
    };
    link(kGm, kEm, e_pi * kCgPiMinus);
    link(kGp, kEp, e_pi * kCgPiPlus);
    link(kGm, kEp, e_sp * kCgSigmaPlus);
    link(kGp, kEm, e_sm * kCgSigmaMinus);

    const double sg = std::sqrt(c.gamma);
    for (auto& j : jumps) j = M4::Zero();
    jumps[0](kGm, kEm) = sg * kCgPiMinus;
    jumps[0](kGp, kEp) = sg * kCgPiPlus;
    jumps[1](kGm, kEp) = sg * kCgSigmaPlus;
    jumps[2](kGp, kEm) = sg * kCgSigmaMinus;
    decay_anti = M4::Zero();
    for (const auto& j : jumps) decay_anti += 0.5 * j.adjoint() * j;
  }

  M4 hamiltonian(double t) const {
    M4 h = coupling;
    const double d = detuning + mod_amp * std::cos(omega_rf * t);
    h(kGm, kGm) += zeeman_g[0];
    h(kGp, kGp) += zeeman_g[1];
    h(kEm, kEm) += zeeman_e[0] - d;
    h(kEp, kEp) += zeeman_e[1] - d;
    return h;
  }

  M4 deriv(double t, const M4& rho) const {
    const M4 h = hamiltonian(t);
    M4 out = cplx(0.0, -1.0) * (h * rho - rho * h);
    for (const auto& j : jumps) out += j * rho * j.adjoint();
    out -= decay_anti * rho + rho * decay_anti;
    return out;
  }

  void step(double t, double dt, M4& rho) const {
    const M4 k1 = deriv(t, rho);
    const M4 k2 = deriv(t + 0.5 * dt, rho + 0.5 * dt * k1);
    const M4 k3 = deriv(t + 0.5 * dt, rho + 0.5 * dt * k2);
    const M4 k4 = deriv(t + dt, rho + dt * k3);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
};

}  // namespace

void ObeConfig::validate() const {
  detail::require(std::isfinite(gamma) && gamma > 0.0, "linewidth must be positive");
  detail::require(std::isfinite(detuning), "detuning must be finite");
  detail::require(std::isfinite(saturation) && saturation >= 0.0, "saturation must be >= 0");
  detail::require(std::isfinite(b_field), "magnetic field must be finite");
  detail::require(std::isfinite(omega_rf) && omega_rf > 0.0, "RF frequency must be positive");
  detail::require(std::isfinite(beta) && beta >= 0.0, "modulation index must be >= 0");
  detail::require(std::isfinite(wavevector) && wavevector > 0.0, "wavevector must be positive");
  detail::require(std::isfinite(g_ground) && std::isfinite(g_excited), "g-factors must be finite");
  double n2 = 0.0;
  for (double p : polarization) {
    detail::require(std::isfinite(p), "polarization must be finite");
    n2 += p * p;
  }
  detail::require(n2 > 0.0, "polarization vector must be non-zero");
  detail::require(max_periods >= 1, "iteration budget must be positive");
  detail::require(periodicity_tol > 0.0, "periodicity tolerance must be positive");
}

ObeResult obe_modulation_contrast(const ObeConfig& cfg, int initial) {
  cfg.validate();
  detail::require(initial == 0 || initial == 1, "initial state selector must be 0 or 1");
  const Obe obe(cfg);
  const double period = constants::two_pi / cfg.omega_rf;
  const double rate = cfg.gamma * (1.0 + std::sqrt(0.5 * cfg.saturation)) + std::abs(cfg.detuning) +
                      cfg.beta * cfg.omega_rf + std::abs(obe.zeeman_g[1]) * 2.0;
  const int steps = std::max(200, static_cast<int>(std::ceil(period * rate / 0.05)));
  const double dt = period / steps;

  M4 rho = M4::Zero();
  if (initial == 0) {
    rho(kGm, kGm) = 1.0;
  } else {
    rho(kGm, kGm) = 0.5;
    rho(kGp, kGp) = 0.5;
  }

  ObeResult res;
  bool converged = false;
  for (int p = 0; p < cfg.max_periods; ++p) {
    const M4 start = rho;
    for (int k = 0; k < steps; ++k) obe.step(k * dt, dt, rho);
    res.periods = p + 1;
    if (!rho.allFinite()) throw NumericalError("optical Bloch integration became non-finite");
    if ((rho - start).cwiseAbs().maxCoeff() < cfg.periodicity_tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NumericalError("optical Bloch equations did not reach a periodic steady state within " +
                         std::to_string(cfg.max_periods) + " RF periods");
  }

  double s0 = 0.0, a = 0.0, b = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = k * dt;
    const double s = rho(kEm, kEm).real() + rho(kEp, kEp).real();
    s0 += s;
    a += s * std::cos(cfg.omega_rf * t);
    b += s * std::sin(cfg.omega_rf * t);
    obe.step(t, dt, rho);
  }
  s0 /= steps;
  a *= 2.0 / steps;
  b *= 2.0 / steps;
  if (!(s0 > 0.0)) throw NumericalError("no steady-state fluorescence: excited population is zero");
  res.mean_excited = s0;
  res.contrast = std::hypot(a, b) / s0;
  res.phase = std::atan2(b, a);
  return res;
}

MicromotionCalibration calibrate_micromotion(const ObeConfig& base, int points, double beta_max,
                                             unsigned threads) {
  base.validate();
  detail::require(points >= 4, "calibration needs at least four points");
  detail::require(std::isfinite(beta_max) && beta_max > 0.0, "beta_max must be positive");
  detail::require(threads >= 1, "threads must be positive");
  MicromotionCalibration cal;
  cal.base = base;
  cal.betas.resize(static_cast<std::size_t>(points));
  cal.contrasts.resize(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) cal.betas[static_cast<std::size_t>(i)] = beta_max * i / (points - 1);

  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(points));
  auto work = [&](std::size_t i) {
    try {
      if (cal.betas[i] == 0.0) {
        // No modulation: the Omega_RF component vanishes identically.
        cal.contrasts[i] = 0.0;
        return;
      }
      ObeConfig c = base;
      c.beta = cal.betas[i];
      cal.contrasts[i] = obe_modulation_contrast(c).contrast;
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  const unsigned nt = std::min<unsigned>(threads, static_cast<unsigned>(points));
  if (nt <= 1) {
    for (std::size_t i = 0; i < cal.betas.size(); ++i) work(i);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < nt; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < cal.betas.size(); i += nt) work(i);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  for (std::size_t i = 1; i < cal.contrasts.size(); ++i) {
    if (!(cal.contrasts[i] > cal.contrasts[i - 1])) {
      throw NumericalError("modulation contrast is not monotone in beta near beta = " +
                           std::to_string(cal.betas[i]));
    }
  }
  return cal;
}

double rf_field_from_beta(double beta, double omega_rf, double wavevector, const IonSpecies& ion) {
  ion.validate();
  detail::require(std::isfinite(beta) && beta >= 0.0, "beta must be >= 0");
  detail::require(omega_rf > 0.0 && wavevector > 0.0, "frequency and wavevector must be positive");
  return beta * ion.mass * omega_rf * omega_rf / (wavevector * std::abs(ion.charge));
}

MicromotionEstimate beta_from_contrast(double contrast, const MicromotionCalibration& cal,
                                       const IonSpecies& ion) {
  detail::require(cal.betas.size() >= 4 && cal.betas.size() == cal.contrasts.size(),
                  "calibration table is malformed");
  detail::require(std::isfinite(contrast), "contrast must be finite");
  const double lo = cal.contrasts.front();
  const double hi = cal.contrasts.back();
  if (contrast < lo || contrast > hi) {
    throw InvalidInput("contrast " + std::to_string(contrast) + " outside the calibrated range [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  MicromotionEstimate e;
  if (contrast == lo) {
    e.beta = cal.betas.front();
  } else if (contrast == hi) {
    e.beta = cal.betas.back();
  } else {
    std::vector<double> x = cal.contrasts;
    std::vector<double> y = cal.betas;
    const boost::math::interpolators::pchip<std::vector<double>> interp(std::move(x), std::move(y));
    e.beta = interp(contrast);
  }
  e.e_rf = rf_field_from_beta(e.beta, cal.base.omega_rf, cal.base.wavevector, ion);
  return e;
}

}  // namespace iontrap::analysis
