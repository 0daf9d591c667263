#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include <Eigen/Eigenvalues>

#include "iontrap/constants.hpp"
#include "iontrap/quantum.hpp"

namespace iontrap::quantum {

Matrix FockSpace::annihilation() const {
  const auto n = static_cast<Eigen::Index>(cutoff);
  Matrix a = Matrix::Zero(n, n);
  for (Eigen::Index k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

Matrix FockSpace::creation() const { return annihilation().adjoint(); }

Matrix FockSpace::number() const {
  const auto n = static_cast<Eigen::Index>(cutoff);
  Matrix m = Matrix::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) m(k, k) = static_cast<double>(k);
  return m;
}

FockSpace build_fock_space(std::size_t cutoff) {
  detail::require(cutoff >= 2, "Fock cutoff must be at least 2");
  return FockSpace{cutoff};
}

void NoiseModel::validate() const {
  detail::require(std::isfinite(gamma_a) && gamma_a >= 0.0, "gamma_a must be >= 0");
  detail::require(std::isfinite(nbar_bath) && nbar_bath >= 0.0, "nbar_bath must be >= 0");
  detail::require(std::isfinite(gamma_p) && gamma_p >= 0.0, "gamma_p must be >= 0");
}

NoiseModel NoiseModel::from_heating_rate(double nbar_dot, double nbar_bath, double gamma_p) {
  detail::require(std::isfinite(nbar_dot) && nbar_dot >= 0.0, "heating rate must be >= 0");
  detail::require(std::isfinite(nbar_bath) && nbar_bath > 0.0, "bath occupation must be > 0");
  NoiseModel m{nbar_dot / nbar_bath, nbar_bath, gamma_p};
  m.validate();
  return m;
}

double thermal_occupation(double omega, double temperature_k) {
  detail::require(omega > 0.0 && temperature_k > 0.0, "frequency and temperature must be > 0");
  return 1.0 / std::expm1(constants::hbar * omega / (constants::boltzmann * temperature_k));
}

void check_density_matrix(const Matrix& rho, double hermitian_tol, double trace_tol,
                          double eig_tol) {
  detail::require(rho.rows() == rho.cols() && rho.rows() > 0, "density matrix must be square");
  detail::require(rho.allFinite(), "density matrix contains non-finite entries");
  detail::require((rho - rho.adjoint()).cwiseAbs().maxCoeff() <= hermitian_tol,
                  "density matrix is not Hermitian");
  detail::require(std::abs(rho.trace() - cplx(1.0, 0.0)) <= trace_tol,
                  "density matrix trace differs from 1");
  const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (rho + rho.adjoint()),
                                                 Eigen::EigenvaluesOnly);
  detail::require(es.eigenvalues().minCoeff() >= -eig_tol, "density matrix is not positive");
}

Matrix fock_state(const Layout& layout, std::size_t n, std::size_t spin) {
  detail::require(n < layout.cutoff && spin < layout.spin_states, "basis state outside layout");
  const auto d = static_cast<Eigen::Index>(layout.dim());
  Matrix rho = Matrix::Zero(d, d);
  const auto i = static_cast<Eigen::Index>(layout.index(spin, n));
  rho(i, i) = 1.0;
  return rho;
}

std::vector<double> thermal_populations(double nbar, std::size_t max_levels) {
  detail::require(std::isfinite(nbar) && nbar >= 0.0, "nbar must be >= 0");
  std::vector<double> p(max_levels, 0.0);
  if (max_levels == 0) return p;
  const double ratio = nbar / (nbar + 1.0);
  double pn = 1.0 / (nbar + 1.0);
  for (std::size_t n = 0; n < max_levels; ++n, pn *= ratio) p[n] = pn;
  return p;
}

Matrix thermal_state(const Layout& layout, double nbar) {
  auto p = thermal_populations(nbar, layout.cutoff);
  double sum = 0.0;
  for (double x : p) sum += x;
  const auto d = static_cast<Eigen::Index>(layout.dim());
  Matrix rho = Matrix::Zero(d, d);
  for (std::size_t n = 0; n < layout.cutoff; ++n) {
    const auto i = static_cast<Eigen::Index>(layout.index(0, n));
    rho(i, i) = p[n] / sum;
  }
  return rho;
}

std::vector<double> fock_populations(const Matrix& rho, const Layout& layout) {
  std::vector<double> p(layout.cutoff, 0.0);
  for (std::size_t s = 0; s < layout.spin_states; ++s) {
    for (std::size_t n = 0; n < layout.cutoff; ++n) {
      const auto i = static_cast<Eigen::Index>(layout.index(s, n));
      p[n] += rho(i, i).real();
    }
  }
  return p;
}

double mean_phonon_number(const Matrix& rho, const Layout& layout) {
  const auto p = fock_populations(rho, layout);
  double m = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) m += static_cast<double>(n) * p[n];
  return m;
}

namespace {

struct Generator {
  const Layout& layout;
  NoiseModel noise;
  bool has_h = false;
  bool diagonal_h = false;
  Eigen::VectorXd h_diag;
  Matrix h;
  std::vector<double> sqrt_n;
  std::vector<double> c_aad;  // eigenvalues of the truncated a a^+

  Generator(const Layout& l, const NoiseModel& nm, const std::optional<Matrix>& ham)
      : layout(l), noise(nm) {
    const std::size_t nc = l.cutoff;
    sqrt_n.resize(nc + 1);
    for (std::size_t k = 0; k <= nc; ++k) sqrt_n[k] = std::sqrt(static_cast<double>(k));
    c_aad.resize(nc);
    for (std::size_t k = 0; k < nc; ++k) c_aad[k] = k + 1 < nc ? static_cast<double>(k + 1) : 0.0;
    if (ham) {
      has_h = true;
      h = *ham;
      Matrix off = h;
      off.diagonal().setZero();
      diagonal_h = off.cwiseAbs().maxCoeff() == 0.0;
      if (diagonal_h) h_diag = h.diagonal().real();
    }
  }

  double rate_scale() const {
    const double nc = static_cast<double>(layout.cutoff);
    double s = noise.gamma_a * (2.0 * noise.nbar_bath + 1.0) * nc + noise.gamma_p * nc * nc;
    if (has_h) s += h.cwiseAbs().rowwise().sum().maxCoeff();
    return s;
  }

  void apply(const Matrix& rho, Matrix& out) const {
    const std::size_t nc = layout.cutoff;
    const std::size_t ns = layout.spin_states;
    const double up = noise.gamma_a * noise.nbar_bath;
    const double down = noise.gamma_a * (noise.nbar_bath + 1.0);
    const double gp = noise.gamma_p;
    const auto d = static_cast<Eigen::Index>(layout.dim());
    out.resize(d, d);
    for (std::size_t s2 = 0; s2 < ns; ++s2) {
      for (std::size_t m = 0; m < nc; ++m) {
        const auto j = static_cast<Eigen::Index>(s2 * nc + m);
        for (std::size_t s1 = 0; s1 < ns; ++s1) {
          for (std::size_t n = 0; n < nc; ++n) {
            const auto i = static_cast<Eigen::Index>(s1 * nc + n);
            const cplx r = rho(i, j);
            const double dn = static_cast<double>(n), dm = static_cast<double>(m);
            cplx v = -(0.5 * up * (c_aad[n] + c_aad[m]) + 0.5 * down * (dn + dm) +
                       0.5 * gp * (dn - dm) * (dn - dm)) * r;
            if (n > 0 && m > 0) v += up * sqrt_n[n] * sqrt_n[m] * rho(i - 1, j - 1);
            if (n + 1 < nc && m + 1 < nc) {
              v += down * sqrt_n[n + 1] * sqrt_n[m + 1] * rho(i + 1, j + 1);
            }
            out(i, j) = v;
          }
        }
      }
    }
    if (!has_h) return;
    const cplx mi(0.0, -1.0);
    if (diagonal_h) {
      for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < d; ++i) out(i, j) += mi * (h_diag[i] - h_diag[j]) * rho(i, j);
      }
    } else {
      out.noalias() += mi * (h * rho);
      out.noalias() -= mi * (rho * h);
    }
  }
};

double top_population(const Matrix& rho, const Layout& layout) {
  double p = 0.0;
  for (std::size_t s = 0; s < layout.spin_states; ++s) {
    const auto i = static_cast<Eigen::Index>(layout.index(s, layout.cutoff - 1));
    p += rho(i, i).real();
  }
  return p;
}

void validate_inputs(const Matrix& rho0, const Layout& layout, const NoiseModel& noise,
                     const std::optional<Matrix>& h) {
  detail::require(layout.cutoff >= 2 && layout.spin_states >= 1, "invalid register layout");
  const auto d = static_cast<Eigen::Index>(layout.dim());
  detail::require(rho0.rows() == d && rho0.cols() == d, "density matrix does not match layout");
  check_density_matrix(rho0);
  noise.validate();
  if (h) {
    detail::require(h->rows() == d && h->cols() == d, "Hamiltonian does not match layout");
    detail::require(h->allFinite(), "Hamiltonian contains non-finite entries");
    detail::require((*h - h->adjoint()).cwiseAbs().maxCoeff() <=
                        1e-12 * std::max(1.0, h->cwiseAbs().maxCoeff()),
                    "Hamiltonian is not Hermitian");
  }
}

class Stepper {
 public:
  Stepper(const Layout& layout, const NoiseModel& noise, const std::optional<Matrix>& h, double dt)
      : gen_(layout, noise, h), layout_(layout) {
    scale_ = gen_.rate_scale();
    if (dt == 0.0) {
      dt_ = scale_ > 0.0 ? kMaxStepScale / scale_ : 0.0;
    } else {
      detail::require(std::isfinite(dt) && dt > 0.0, "time step must be positive");
      if (dt * scale_ > kMaxStepScale * (1.0 + 1e-12)) {
        throw InvalidInput("time step too coarse: dt * rate = " + std::to_string(dt * scale_) +
                           " exceeds " + std::to_string(kMaxStepScale));
      }
      dt_ = dt;
    }
  }

  double nominal_dt() const { return dt_; }

  // Advance rho by duration in equal steps no longer than the nominal dt.
  std::size_t advance(Matrix& rho, double duration, LindbladResult& stats) {
    if (duration <= 0.0 || scale_ == 0.0) return 0;
    const auto steps = static_cast<std::size_t>(std::ceil(duration / dt_ - 1e-9));
    const double h = duration / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
      gen_.apply(rho, k1_);
      tmp_ = rho + 0.5 * h * k1_;
      gen_.apply(tmp_, k2_);
      tmp_ = rho + 0.5 * h * k2_;
      gen_.apply(tmp_, k3_);
      tmp_ = rho + h * k3_;
      gen_.apply(tmp_, k4_);
      rho += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
      stats.top_population = std::max(stats.top_population, top_population(rho, layout_));
    }
    stats.dt = h;
    return steps;
  }

 private:
  Generator gen_;
  const Layout& layout_;
  double scale_ = 0.0;
  double dt_ = 0.0;
  Matrix k1_, k2_, k3_, k4_, tmp_;
};

void finish(LindbladResult& r) {
  r.trace_drift = std::abs(r.rho.trace() - cplx(1.0, 0.0));
  if (!r.rho.allFinite()) throw NumericalError("Lindblad evolution became non-finite");
  if (r.trace_drift > 1e-6) {
    throw NumericalError("Lindblad step too coarse: trace drift " + std::to_string(r.trace_drift));
  }
  r.saturated = r.top_population > kSaturationThreshold;
}

}  // namespace

LindbladResult lindblad_evolve(const Matrix& rho0, const Layout& layout, const NoiseModel& noise,
                               const std::optional<Matrix>& hamiltonian, double t, double dt) {
  detail::require(std::isfinite(t) && t >= 0.0, "evolution time must be >= 0");
  validate_inputs(rho0, layout, noise, hamiltonian);
  Stepper stepper(layout, noise, hamiltonian, dt);
  LindbladResult r;
  r.rho = rho0;
  r.dt = stepper.nominal_dt();
  r.top_population = top_population(rho0, layout);
  r.steps = stepper.advance(r.rho, t, r);
  finish(r);
  return r;
}

std::vector<LindbladResult> lindblad_snapshots(const Matrix& rho0, const Layout& layout,
                                               const NoiseModel& noise,
                                               const std::optional<Matrix>& hamiltonian,
                                               const std::vector<double>& times, double dt) {
  validate_inputs(rho0, layout, noise, hamiltonian);
  for (std::size_t i = 0; i < times.size(); ++i) {
    detail::require(std::isfinite(times[i]) && times[i] >= 0.0, "snapshot times must be >= 0");
    if (i > 0) detail::require(times[i] >= times[i - 1], "snapshot times must ascend");
  }
  Stepper stepper(layout, noise, hamiltonian, dt);
  std::vector<LindbladResult> out;
  out.reserve(times.size());
  LindbladResult cur;
  cur.rho = rho0;
  cur.dt = stepper.nominal_dt();
  cur.top_population = top_population(rho0, layout);
  double now = 0.0;
  for (double t : times) {
    cur.steps += stepper.advance(cur.rho, t - now, cur);
    now = t;
    LindbladResult snap = cur;
    finish(snap);
    out.push_back(std::move(snap));
  }
  return out;
}

double t2_from_rates(double nbar_dot, double gamma_ph) {
  detail::require(std::isfinite(nbar_dot) && nbar_dot >= 0.0, "heating rate must be >= 0");
  detail::require(std::isfinite(gamma_ph) && gamma_ph >= 0.0, "dephasing rate must be >= 0");
  const double rate = 2.0 * nbar_dot + 0.5 * gamma_ph;
  detail::require(rate > 0.0, "T2 diverges when both decoherence rates are zero");
  return 1.0 / rate;
}

void write_density_matrix(std::ostream& out, const Matrix& rho) {
  out << "row,col,re,im\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    for (Eigen::Index j = 0; j < rho.cols(); ++j) {
      out << i << ',' << j << ',' << rho(i, j).real() << ',' << rho(i, j).imag() << '\n';
    }
  }
}

}  // namespace iontrap::quantum
