#include "iontrap/ion_chain.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "iontrap/optimize.hpp"
#include "iontrap/rng.hpp"

namespace iontrap::chain {

namespace {

double coulomb_k(const IonSpecies& ion) {
  return constants::coulomb_constant * ion.charge * ion.charge;
}

// Trap plus Coulomb energy in units of k e^2 / l, positions in units of l.
struct Dimensionless {
  double c2;
  double c4;

  double energy(const Eigen::VectorXd& u) const {
    double e = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double x2 = u[i] * u[i];
      e += c2 * x2 + c4 * x2 * x2;
      for (Eigen::Index j = i + 1; j < u.size(); ++j) e += 1.0 / std::abs(u[j] - u[i]);
    }
    return e;
  }

  Eigen::VectorXd force(const Eigen::VectorXd& u) const {
    Eigen::VectorXd f(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      double s = -(2.0 * c2 * u[i] + 4.0 * c4 * u[i] * u[i] * u[i]);
      for (Eigen::Index j = 0; j < u.size(); ++j) {
        if (j == i) continue;
        const double r = u[i] - u[j];
        s += (r > 0.0 ? 1.0 : -1.0) / (r * r);
      }
      f[i] = s;
    }
    return f;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& u) const {
    const Eigen::Index n = u.size();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      h(i, i) = 2.0 * c2 + 12.0 * c4 * u[i] * u[i];
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double c = 2.0 / std::pow(std::abs(u[i] - u[j]), 3);
        h(i, i) += c;
        h(i, j) = -c;
      }
    }
    return h;
  }
};

bool ordered_with_margin(const Eigen::VectorXd& u, const Eigen::VectorXd& step, double alpha) {
  for (Eigen::Index i = 0; i + 1 < u.size(); ++i) {
    const double gap = u[i + 1] - u[i];
    const double moved = gap + alpha * (step[i + 1] - step[i]);
    if (moved < 0.5 * gap) return false;
  }
  return true;
}

bool newton(const Dimensionless& p, Eigen::VectorXd& u) {
  constexpr double kTol = 1e-12;
  constexpr int kMaxIter = 300;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    const Eigen::VectorXd f = p.force(u);
    const double fnorm = f.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(fnorm)) return false;
    if (fnorm < kTol) return true;

    Eigen::VectorXd step;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(p.hessian(u));
    bool newton_ok = ldlt.info() == Eigen::Success && ldlt.isPositive();
    if (newton_ok) {
      step = ldlt.solve(f);
      newton_ok = step.allFinite() && step.dot(f) > 0.0;
    }
    if (!newton_ok) {
      double min_gap = u.size() > 1 ? std::numeric_limits<double>::infinity() : 1.0;
      for (Eigen::Index i = 0; i + 1 < u.size(); ++i) min_gap = std::min(min_gap, u[i + 1] - u[i]);
      step = f * (0.1 * min_gap / fnorm);
    }

    const double e0 = p.energy(u);
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k, alpha *= 0.5) {
      if (!ordered_with_margin(u, step, alpha)) continue;
      const Eigen::VectorXd trial = u + alpha * step;
      const double e1 = p.energy(trial);
      if (e1 <= e0 + 1e-14 * std::abs(e0) || p.force(trial).lpNorm<Eigen::Infinity>() < fnorm) {
        u = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) return false;
  }
  return false;
}

void fix_sign(Eigen::MatrixXd& v) {
  for (Eigen::Index m = 0; m < v.cols(); ++m) {
    Eigen::Index imax = 0;
    for (Eigen::Index i = 1; i < v.rows(); ++i) {
      if (std::abs(v(i, m)) > std::abs(v(imax, m)) * (1.0 + 1e-9)) imax = i;
    }
    if (v(imax, m) < 0.0) v.col(m) *= -1.0;
  }
}

ModeSet diagonalize(const Eigen::MatrixXd& k, const char* what) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (k + k.transpose()));
  if (es.info() != Eigen::Success) throw NumericalError(std::string(what) + ": eigensolver failed");
  ModeSet m;
  m.vectors = es.eigenvectors();
  fix_sign(m.vectors);
  m.frequencies.resize(es.eigenvalues().size());
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double w2 = es.eigenvalues()[i];
    if (!(w2 > 0.0)) {
      throw NumericalError(std::string(what) + " mode " + std::to_string(i) +
                           " has non-positive frequency squared");
    }
    m.frequencies[i] = std::sqrt(w2);
  }
  return m;
}

Eigen::MatrixXd transverse_matrix(const Eigen::VectorXd& z, const AxialPotential& pot,
                                  double omega_radial, const IonSpecies& ion) {
  const Eigen::Index n = z.size();
  const double ke2 = coulomb_k(ion);
  const double m = ion.mass;
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    t(i, i) = omega_radial * omega_radial - (pot.curvature(z[i]) - pot.curvature(0.0)) / (2.0 * m);
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = ke2 / (m * std::pow(std::abs(z[i] - z[j]), 3));
      t(i, i) -= c;
      t(i, j) = c;
    }
  }
  return t;
}

}  // namespace

void AxialPotential::validate() const {
  detail::require(std::isfinite(alpha2) && std::isfinite(alpha4),
                  "axial potential coefficients must be finite");
  detail::require(confining(), "axial potential is not confining");
}

double length_scale(const AxialPotential& pot, const IonSpecies& ion) {
  pot.validate();
  ion.validate();
  const double ke2 = coulomb_k(ion);
  // g(l) = 2|a2| l^3 + 4 a4 l^5 - k e^2 is increasing in l.
  auto g = [&](double l) {
    return 2.0 * std::abs(pot.alpha2) * l * l * l + 4.0 * pot.alpha4 * std::pow(l, 5) - ke2;
  };
  double lo = 0.0;
  double hi = 1e-6;
  while (g(hi) < 0.0) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Eigen::VectorXd equilibrium_positions(int n, const AxialPotential& pot, double omega_radial,
                                      const IonSpecies& ion) {
  detail::require(n >= 1, "chain needs at least one ion");
  detail::require(std::isfinite(omega_radial) && omega_radial > 0.0,
                  "radial frequency must be positive");
  const double l = length_scale(pot, ion);
  const double ke2 = coulomb_k(ion);
  const Dimensionless p{pot.alpha2 * l * l * l / ke2, pot.alpha4 * std::pow(l, 5) / ke2};

  const double width = 1.5 * std::pow(static_cast<double>(n), 0.56);
  static constexpr double kSeedScales[] = {1.0, 0.5, 2.0, 0.25, 4.0, 0.1, 10.0};
  for (double scale : kSeedScales) {
    Eigen::VectorXd u(n);
    for (int i = 0; i < n; ++i) {
      u[i] = n == 1 ? 0.0 : scale * width * (static_cast<double>(i) / (n - 1) - 0.5);
    }
    if (!newton(p, u)) continue;
    Eigen::VectorXd z = u * l;
    try {
      diagonalize(transverse_matrix(z, pot, omega_radial, ion), "transverse");
    } catch (const NumericalError&) {
      throw NumericalError("zigzag instability: a transverse mode is soft at omega_radial = " +
                           std::to_string(omega_radial) + " rad/s");
    }
    return z;
  }
  throw NumericalError("chain equilibrium did not converge for n = " + std::to_string(n));
}

ChainSolution normal_modes(const Eigen::VectorXd& positions, const AxialPotential& pot,
                           double omega_radial, const IonSpecies& ion) {
  pot.validate();
  ion.validate();
  const Eigen::Index n = positions.size();
  detail::require(n >= 1, "chain needs at least one ion");
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    detail::require(positions[i + 1] > positions[i], "positions must be strictly ascending");
  }
  const double ke2 = coulomb_k(ion);
  const double m = ion.mass;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, i) = pot.curvature(positions[i]) / m;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const double c = 2.0 * ke2 / (m * std::pow(std::abs(positions[i] - positions[j]), 3));
      a(i, i) += c;
      a(i, j) = -c;
    }
  }
  ChainSolution s;
  s.positions = positions;
  try {
    s.axial = diagonalize(a, "axial");
  } catch (const NumericalError& e) {
    throw NumericalError(std::string("axial Hessian is not positive definite (not a minimum): ") +
                         e.what());
  }
  try {
    s.transverse = diagonalize(transverse_matrix(positions, pot, omega_radial, ion), "transverse");
  } catch (const NumericalError&) {
    throw NumericalError("zigzag instability: a transverse mode is soft at omega_radial = " +
                         std::to_string(omega_radial) + " rad/s");
  }
  return s;
}

ChainSolution solve_chain(int n, const AxialPotential& pot, double omega_radial,
                          const IonSpecies& ion) {
  return normal_modes(equilibrium_positions(n, pot, omega_radial, ion), pot, omega_radial, ion);
}

namespace {

std::pair<Eigen::Index, Eigen::Index> central_range(const Eigen::VectorXd& z, int central_k) {
  const auto n = z.size();
  detail::require(central_k >= 2 && central_k <= n, "central_k must lie in [2, n]");
  const Eigen::Index start = (n - central_k) / 2;
  return {start, start + central_k - 1};
}

}  // namespace

double mean_central_spacing(const Eigen::VectorXd& positions, int central_k) {
  const auto [a, b] = central_range(positions, central_k);
  return (positions[b] - positions[a]) / static_cast<double>(b - a);
}

double spacing_variability(const Eigen::VectorXd& positions, int central_k) {
  const auto [a, b] = central_range(positions, central_k);
  const double mean = mean_central_spacing(positions, central_k);
  double ss = 0.0;
  for (Eigen::Index i = a; i < b; ++i) {
    const double d = positions[i + 1] - positions[i] - mean;
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(b - a)) / mean;
}

LambDickeSet lamb_dicke(const ModeSet& modes, double delta_k, const IonSpecies& ion) {
  ion.validate();
  detail::require(std::isfinite(delta_k) && delta_k >= 0.0, "delta_k must be non-negative");
  LambDickeSet out;
  out.delta_k = delta_k;
  out.eta.resize(modes.vectors.rows(), modes.vectors.cols());
  for (Eigen::Index m = 0; m < modes.frequencies.size(); ++m) {
    const double w = modes.frequencies[m];
    detail::require(w > 0.0, "mode frequencies must be positive");
    const double x0 = std::sqrt(constants::hbar / (2.0 * ion.mass * w));
    for (Eigen::Index i = 0; i < modes.vectors.rows(); ++i) {
      out.eta(i, m) = delta_k * std::abs(modes.vectors(i, m)) * x0;
    }
  }
  return out;
}

EquispaceResult optimize_equispaced(int n, int central_k, double target_spacing,
                                    const IonSpecies& ion, const EquispaceOptions& options) {
  ion.validate();
  detail::require(n >= 2, "equispacing needs at least two ions");
  detail::require(central_k >= 2 && central_k <= n, "central_k must lie in [2, n]");
  detail::require(std::isfinite(target_spacing) && target_spacing > 0.0,
                  "target spacing must be positive");
  detail::require(options.starts >= 1, "at least one optimizer start is required");

  const double ke2 = coulomb_k(ion);
  const double s = target_spacing;
  // Harmonic reference: central spacing ~ 2 l n^-0.56 equal to one target spacing.
  const double l_ref = std::pow(static_cast<double>(n), 0.56) / 2.0;
  const double a2_ref = 1.0 / (2.0 * l_ref * l_ref * l_ref);
  const double half = 0.5 * static_cast<double>(n);
  const double log_a4_ref = std::log(a2_ref / (half * half));

  auto to_potential = [&](const Eigen::VectorXd& x) {
    double a2, a4;
    if (options.harmonic_only) {
      a2 = a2_ref * std::exp(x[0]);
      a4 = 0.0;
    } else {
      a2 = a2_ref * x[0];
      a4 = std::exp(log_a4_ref + x[1]);
    }
    return AxialPotential{a2 * ke2 / (s * s * s), a4 * ke2 / std::pow(s, 5)};
  };

  auto objective = [&](const Eigen::VectorXd& x) {
    const AxialPotential pot = to_potential(x);
    if (!pot.confining()) return std::numeric_limits<double>::infinity();
    try {
      const Eigen::VectorXd z = equilibrium_positions(n, pot, options.omega_radial, ion);
      const double mean = mean_central_spacing(z, central_k) / s;
      const double lm = std::log(mean);
      return spacing_variability(z, central_k) + lm * lm;
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  struct Candidate {
    AxialPotential pot;
    double variability;
  };
  std::vector<Candidate> found;
  Rng rng(options.seed);
  optimize::NelderMeadOptions nm;
  nm.max_evaluations = 3000;
  nm.x_tol = 1e-9;
  for (int start = 0; start < options.starts; ++start) {
    Eigen::VectorXd x0, step;
    if (options.harmonic_only) {
      x0 = Eigen::VectorXd::Constant(1, start == 0 ? 0.0 : rng.uniform() - 0.5);
      step = Eigen::VectorXd::Constant(1, 0.3);
    } else {
      x0.resize(2);
      x0[0] = start == 0 ? 1.0 : -1.0 + 2.5 * rng.uniform();
      x0[1] = start == 0 ? 0.0 : -4.0 + 6.0 * rng.uniform();
      step = Eigen::Vector2d(0.2, 0.5);
    }
    const auto r = optimize::nelder_mead(objective, x0, step, nm);
    if (!std::isfinite(r.value)) continue;
    const AxialPotential pot = to_potential(r.x);
    try {
      const Eigen::VectorXd z = equilibrium_positions(n, pot, options.omega_radial, ion);
      // Exact rescale onto the target: z -> lambda z needs alpha2 lambda^-3, alpha4 lambda^-5.
      const double lambda = s / mean_central_spacing(z, central_k);
      const AxialPotential scaled{pot.alpha2 / std::pow(lambda, 3), pot.alpha4 / std::pow(lambda, 5)};
      found.push_back({scaled, spacing_variability(z, central_k)});
    } catch (const Error&) {
      continue;
    }
  }

  std::stable_sort(found.begin(), found.end(), [](const Candidate& a, const Candidate& b) {
    if (std::abs(a.variability - b.variability) > 1e-9 * std::max(1e-12, a.variability)) {
      return a.variability < b.variability;
    }
    return std::abs(a.pot.alpha4) < std::abs(b.pot.alpha4);
  });
  for (const auto& c : found) {
    try {
      EquispaceResult res;
      res.potential = c.pot;
      res.chain = solve_chain(n, c.pot, options.omega_radial, ion);
      res.variability = spacing_variability(res.chain.positions, central_k);
      res.mean_spacing = mean_central_spacing(res.chain.positions, central_k);
      return res;
    } catch (const Error&) {
      continue;
    }
  }
  throw NumericalError("no confining, transversely stable equispacing optimum found");
}

void write_chain(std::ostream& out, const ChainSolution& chain) {
  const auto n = chain.positions.size();
  out << std::setprecision(12);
  out << "index,z_um\n";
  for (Eigen::Index i = 0; i < n; ++i) out << i << ',' << chain.positions[i] * 1e6 << '\n';
  out << "\nfamily,mode,frequency_hz";
  for (Eigen::Index i = 0; i < n; ++i) out << ",b_" << i;
  out << '\n';
  auto table = [&](const char* family, const ModeSet& m) {
    for (Eigen::Index k = 0; k < m.frequencies.size(); ++k) {
      out << family << ',' << k << ',' << m.frequencies[k] / constants::two_pi;
      for (Eigen::Index i = 0; i < n; ++i) out << ',' << m.vectors(i, k);
      out << '\n';
    }
  };
  table("axial", chain.axial);
  table("transverse", chain.transverse);
}

}  // namespace iontrap::chain
