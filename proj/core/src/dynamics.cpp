#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "iontrap/constants.hpp"
#include "iontrap/quantum.hpp"

namespace iontrap::quantum {

namespace {

Matrix ramsey_initial_state(const Layout& layout) {
  const auto d = static_cast<Eigen::Index>(layout.dim());
  Matrix rho = Matrix::Zero(d, d);
  rho.topLeftCorner(2, 2).setConstant(0.5);
  return rho;
}

std::optional<Matrix> detuning_hamiltonian(const Layout& layout, double detuning) {
  if (detuning == 0.0) return std::nullopt;
  detail::require(std::isfinite(detuning), "detuning must be finite");
  const auto d = static_cast<Eigen::Index>(layout.dim());
  Matrix h = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) h(i, i) = detuning * static_cast<double>(i);
  return h;
}

// Instantaneous population and phase inversion of levels 0 and 1.
void echo_swap(Matrix& rho) {
  rho.row(0).swap(rho.row(1));
  rho.col(0).swap(rho.col(1));
}

struct RamseyEnd {
  Matrix rho;
  bool saturated;
};

RamseyEnd ramsey_evolve(const NoiseModel& noise, double t_wait, bool echo,
                        const RamseyOptions& options) {
  const Layout layout{1, options.cutoff};
  detail::require(options.cutoff >= 2, "Fock cutoff must be at least 2");
  detail::require(std::isfinite(t_wait) && t_wait >= 0.0, "wait time must be >= 0");
  const auto h = detuning_hamiltonian(layout, options.detuning);
  const Matrix rho0 = ramsey_initial_state(layout);
  if (!echo) {
    auto r = lindblad_evolve(rho0, layout, noise, h, t_wait, options.dt);
    return {std::move(r.rho), r.saturated};
  }
  auto first = lindblad_evolve(rho0, layout, noise, h, 0.5 * t_wait, options.dt);
  echo_swap(first.rho);
  auto second = lindblad_evolve(first.rho, layout, noise, h, 0.5 * t_wait, options.dt);
  return {std::move(second.rho), first.saturated || second.saturated};
}

}  // namespace

RamseyResult simulate_motional_ramsey(const NoiseModel& noise, double t_wait, bool echo,
                                      const std::vector<double>& phases,
                                      const RamseyOptions& options) {
  detail::require(phases.size() >= 3, "Ramsey fringe fit needs at least three phases");
  for (double p : phases) detail::require(std::isfinite(p), "phases must be finite");
  const RamseyEnd end = ramsey_evolve(noise, t_wait, echo, options);

  const double pop = 0.5 * (end.rho(0, 0).real() + end.rho(1, 1).real());
  const cplx c01 = end.rho(0, 1);
  RamseyResult res;
  res.phases = phases;
  res.saturated = end.saturated;
  Eigen::MatrixXd design(static_cast<Eigen::Index>(phases.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(phases.size()));
  for (std::size_t k = 0; k < phases.size(); ++k) {
    const double phi = phases[k];
    const double p = pop + (std::exp(cplx(0.0, phi)) * c01).imag();
    res.fringe.push_back(p);
    const auto i = static_cast<Eigen::Index>(k);
    design(i, 0) = 1.0;
    design(i, 1) = std::cos(phi);
    design(i, 2) = std::sin(phi);
    y[i] = p;
  }
  const Eigen::Vector3d coef = design.colPivHouseholderQr().solve(y);
  if (design.colPivHouseholderQr().rank() < 3) {
    throw InvalidInput("Ramsey phases do not determine a sinusoid");
  }
  res.contrast = 2.0 * std::hypot(coef[1], coef[2]);
  res.fringe_phase = std::atan2(coef[1], coef[2]);
  return res;
}

std::vector<double> ramsey_contrast_curve(const NoiseModel& noise, const std::vector<double>& waits,
                                          bool echo, const RamseyOptions& options) {
  std::vector<double> out;
  out.reserve(waits.size());
  if (echo) {
    for (double t : waits) out.push_back(2.0 * std::abs(ramsey_evolve(noise, t, true, options).rho(0, 1)));
    return out;
  }
  const Layout layout{1, options.cutoff};
  detail::require(options.cutoff >= 2, "Fock cutoff must be at least 2");
  const auto snaps = lindblad_snapshots(ramsey_initial_state(layout), layout, noise,
                                        detuning_hamiltonian(layout, options.detuning), waits,
                                        options.dt);
  for (const auto& s : snaps) out.push_back(2.0 * std::abs(s.rho(0, 1)));
  return out;
}

// ---------------------------------------------------------------------------
// Thermal Rabi flopping

namespace {

void check_rabi_inputs(double omega, double eta) {
  detail::require(std::isfinite(omega) && omega >= 0.0, "Rabi frequency must be >= 0");
  detail::require(std::isfinite(eta) && eta >= 0.0 && eta < 1.0, "eta must lie in [0, 1)");
}

// Rabi rates for |n>, n < count, via the three-term Laguerre recurrence.
std::vector<double> rabi_rates(double omega, double eta, std::size_t count, Transition tr,
                               Coupling coupling) {
  std::vector<double> r(count, 0.0);
  if (coupling == Coupling::lamb_dicke) {
    for (std::size_t n = 0; n < count; ++n) {
      const double dn = static_cast<double>(n);
      switch (tr) {
        case Transition::carrier: r[n] = omega; break;
        case Transition::red_sideband: r[n] = omega * eta * std::sqrt(dn); break;
        case Transition::blue_sideband: r[n] = omega * eta * std::sqrt(dn + 1.0); break;
      }
    }
    return r;
  }
  const double x = eta * eta;
  const int alpha = tr == Transition::carrier ? 0 : 1;
  // L_k^alpha(x) for k = 0 .. count.
  std::vector<double> lag(count + 1);
  lag[0] = 1.0;
  if (count >= 1) lag[1] = 1.0 + alpha - x;
  for (std::size_t k = 1; k < count; ++k) {
    const double dk = static_cast<double>(k);
    lag[k + 1] = ((2.0 * dk + 1.0 + alpha - x) * lag[k] - (dk + alpha) * lag[k - 1]) / (dk + 1.0);
  }
  for (std::size_t n = 0; n < count; ++n) {
    const double dn = static_cast<double>(n);
    switch (tr) {
      case Transition::carrier: r[n] = omega * std::abs(lag[n]); break;
      case Transition::blue_sideband:
        r[n] = omega * eta * std::abs(lag[n]) / std::sqrt(dn + 1.0);
        break;
      case Transition::red_sideband:
        r[n] = n == 0 ? 0.0 : omega * eta * std::abs(lag[n - 1]) / std::sqrt(dn);
        break;
    }
  }
  return r;
}

}  // namespace

double fock_rabi_rate(double omega, double eta, std::size_t n, Transition transition,
                      Coupling coupling) {
  check_rabi_inputs(omega, eta);
  return rabi_rates(omega, eta, n + 1, transition, coupling)[n];
}

std::vector<double> sideband_rabi(double omega, double eta, const std::vector<double>& populations,
                                  Transition transition, const std::vector<double>& times,
                                  Coupling coupling) {
  check_rabi_inputs(omega, eta);
  for (double p : populations) detail::require(std::isfinite(p) && p >= 0.0, "populations must be >= 0");
  const auto rates = rabi_rates(omega, eta, populations.size(), transition, coupling);
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    double s = 0.0;
    for (std::size_t n = 0; n < populations.size(); ++n) {
      if (populations[n] == 0.0) continue;
      const double v = std::sin(0.5 * rates[n] * t);
      s += populations[n] * v * v;
    }
    out.push_back(s);
  }
  return out;
}

std::vector<double> thermal_rabi(double omega, double eta, double nbar, Transition transition,
                                 const std::vector<double>& times, Coupling coupling) {
  detail::require(std::isfinite(nbar) && nbar >= 0.0, "nbar must be >= 0");
  std::size_t terms = 1;
  if (nbar > 0.0) {
    // Tail weight beyond N levels is (nbar / (nbar + 1))^N.
    const double ratio = nbar / (nbar + 1.0);
    terms = static_cast<std::size_t>(std::ceil(std::log(1e-8) / std::log(ratio)));
    terms = std::max<std::size_t>(terms, 1);
  }
  return sideband_rabi(omega, eta, thermal_populations(nbar, terms), transition, times, coupling);
}

// ---------------------------------------------------------------------------
// Molmer-Sorensen

void MsParams::validate() const {
  detail::require(n_ions == 2, "the Molmer-Sorensen model supports exactly two ions");
  detail::require(std::isfinite(eta_omega) && eta_omega >= 0.0, "eta_omega must be >= 0");
  detail::require(std::isfinite(delta), "delta must be finite");
  detail::require(std::isfinite(carrier_omega) && carrier_omega >= 0.0, "carrier Rabi rate must be >= 0");
  detail::require(std::isfinite(nbar) && nbar >= 0.0, "nbar must be >= 0");
}

bool MsParams::dispersive() const { return eta_omega <= 0.1 * std::abs(delta); }

namespace {

using SpinFock = Eigen::Matrix<cplx, 4, Eigen::Dynamic>;

struct MsStepper {
  double g;
  double delta;
  Eigen::Index nc;
  std::vector<double> sq;
  SpinFock k1, k2, k3, k4, tmp, work;

  MsStepper(double g_, double d_, Eigen::Index n) : g(g_), delta(d_), nc(n) {
    sq.resize(static_cast<std::size_t>(n + 1));
    for (Eigen::Index k = 0; k <= n; ++k) sq[static_cast<std::size_t>(k)] = std::sqrt(static_cast<double>(k));
  }

  // out = -i H(t) psi
  void deriv(double t, const SpinFock& psi, SpinFock& out) {
    const cplx em = std::exp(cplx(0.0, -delta * t));
    const cplx ep = std::conj(em);
    work.resize(4, nc);
    for (Eigen::Index n = 0; n < nc; ++n) {
      for (int s = 0; s < 4; ++s) {
        cplx v = 0.0;
        if (n + 1 < nc) v += em * sq[static_cast<std::size_t>(n + 1)] * psi(s, n + 1);
        if (n > 0) v += ep * sq[static_cast<std::size_t>(n)] * psi(s, n - 1);
        work(s, n) = v;
      }
    }
    out.resize(4, nc);
    const cplx c(0.0, -g);
    for (Eigen::Index n = 0; n < nc; ++n) {
      for (int s = 0; s < 4; ++s) out(s, n) = c * (work(s ^ 2, n) + work(s ^ 1, n));
    }
  }

  void step(double t, double h, SpinFock& psi) {
    deriv(t, psi, k1);
    tmp = psi + 0.5 * h * k1;
    deriv(t + 0.5 * h, tmp, k2);
    tmp = psi + 0.5 * h * k2;
    deriv(t + 0.5 * h, tmp, k3);
    tmp = psi + h * k3;
    deriv(t + h, tmp, k4);
    psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
};

}  // namespace

MsResult molmer_sorensen_evolve(const MsParams& p, const std::vector<double>& times,
                                const MsOptions& options) {
  p.validate();
  detail::require(options.cutoff >= 2, "Fock cutoff must be at least 2");
  detail::require(options.steps_per_loop >= 10, "steps_per_loop must be at least 10");
  for (std::size_t i = 0; i < times.size(); ++i) {
    detail::require(std::isfinite(times[i]) && times[i] >= 0.0, "times must be >= 0");
    if (i > 0) detail::require(times[i] >= times[i - 1], "times must ascend");
  }
  const auto nc = static_cast<Eigen::Index>(options.cutoff);

  // Thermal components, truncated at tail weight 1e-8 and renormalized.
  std::vector<double> weights;
  {
    const auto all = thermal_populations(p.nbar, options.cutoff);
    double tail = 1.0;
    for (double w : all) {
      weights.push_back(w);
      tail -= w;
      if (tail < 1e-8) break;
    }
    double sum = 0.0;
    for (double w : weights) sum += w;
    for (double& w : weights) w /= sum;
  }

  double period = 0.0;
  if (p.delta != 0.0) period = constants::two_pi / std::abs(p.delta);
  if (p.eta_omega > 0.0) {
    const double t_rabi = constants::two_pi / p.eta_omega;
    period = period > 0.0 ? std::min(period, t_rabi) : t_rabi;
  }
  const double h_max = period > 0.0 ? period / static_cast<double>(options.steps_per_loop) : 0.0;

  MsResult res;
  res.times = times;
  res.p_up_up.assign(times.size(), 0.0);
  res.p_odd.assign(times.size(), 0.0);
  res.p_down_down.assign(times.size(), 0.0);
  const Eigen::Index dim = 4 * nc;
  res.final_state = Matrix::Zero(dim, dim);

  MsStepper stepper(0.5 * p.eta_omega, p.delta, nc);
  for (std::size_t comp = 0; comp < weights.size(); ++comp) {
    const double w = weights[comp];
    SpinFock psi = SpinFock::Zero(4, nc);
    psi(0, static_cast<Eigen::Index>(comp)) = 1.0;
    double now = 0.0;
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double span = times[k] - now;
      if (span > 0.0 && h_max > 0.0) {
        const auto steps = static_cast<std::size_t>(std::ceil(span / h_max - 1e-9));
        const double h = span / static_cast<double>(steps);
        for (std::size_t s = 0; s < steps; ++s) {
          stepper.step(now + static_cast<double>(s) * h, h, psi);
        }
      }
      now = times[k];
      const double norm_drift = std::abs(psi.squaredNorm() - 1.0);
      res.purity_drift = std::max(res.purity_drift, norm_drift);
      if (!(norm_drift <= 1e-8)) {
        throw NumericalError("Molmer-Sorensen step too coarse: norm drift " +
                             std::to_string(norm_drift));
      }
      const Eigen::Vector4d spin_pop = psi.cwiseAbs2().rowwise().sum();
      res.p_down_down[k] += w * spin_pop[0];
      res.p_odd[k] += w * (spin_pop[1] + spin_pop[2]);
      res.p_up_up[k] += w * spin_pop[3];
      res.top_population = std::max(res.top_population, w * psi.col(nc - 1).squaredNorm());
    }
    Vector v(dim);
    for (int s = 0; s < 4; ++s) {
      for (Eigen::Index n = 0; n < nc; ++n) v[s * nc + n] = psi(s, n);
    }
    res.final_state.noalias() += w * (v * v.adjoint());
  }
  res.saturated = res.top_population > kSaturationThreshold;
  if (res.saturated) {
    throw NumericalError("Fock cutoff " + std::to_string(options.cutoff) +
                         " saturated: top-level population " + std::to_string(res.top_population));
  }
  res.final_spins = trace_out_motion(res.final_state, Layout{4, options.cutoff});
  return res;
}

double dispersive_ising_j(double eta_omega, double delta) {
  detail::require(std::isfinite(eta_omega) && eta_omega >= 0.0, "eta_omega must be >= 0");
  detail::require(std::isfinite(delta) && std::abs(delta) > eta_omega,
                  "dispersive estimate needs |delta| > eta_omega");
  return eta_omega * eta_omega / (2.0 * delta);
}

Matrix trace_out_motion(const Matrix& rho, const Layout& layout) {
  const auto ns = static_cast<Eigen::Index>(layout.spin_states);
  const auto nc = static_cast<Eigen::Index>(layout.cutoff);
  detail::require(rho.rows() == ns * nc && rho.cols() == ns * nc,
                  "density matrix does not match layout");
  Matrix out = Matrix::Zero(ns, ns);
  for (Eigen::Index a = 0; a < ns; ++a) {
    for (Eigen::Index b = 0; b < ns; ++b) {
      cplx s = 0.0;
      for (Eigen::Index n = 0; n < nc; ++n) s += rho(a * nc + n, b * nc + n);
      out(a, b) = s;
    }
  }
  return out;
}

std::vector<double> parity_scan(const Matrix& spin_rho, const std::vector<double>& phases) {
  detail::require(spin_rho.rows() == 4 && spin_rho.cols() == 4,
                  "parity scan needs a two-spin (4 x 4) density matrix");
  std::vector<double> out;
  out.reserve(phases.size());
  const double r = 1.0 / std::sqrt(2.0);
  for (double phi : phases) {
    Eigen::Matrix2cd u;
    u << r, cplx(0.0, -r) * std::exp(cplx(0.0, -phi)), cplx(0.0, -r) * std::exp(cplx(0.0, phi)), r;
    Eigen::Matrix4cd uu;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) uu(2 * a + c, 2 * b + d) = u(a, b) * u(c, d);
    const Eigen::Matrix4cd rot = uu * spin_rho * uu.adjoint();
    out.push_back(rot(0, 0).real() + rot(3, 3).real() - rot(1, 1).real() - rot(2, 2).real());
  }
  return out;
}

}  // namespace iontrap::quantum
