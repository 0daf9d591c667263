#pragma once

#include <cstdint>
#include <iosfwd>

#include <Eigen/Core>

#include "iontrap/species.hpp"

namespace iontrap::chain {

/// V(z) = alpha2 z^2 + alpha4 z^4 per ion.
struct AxialPotential {
  double alpha2 = 0.0;  // J/m^2
  double alpha4 = 0.0;  // J/m^4

  double value(double z) const { return alpha2 * z * z + alpha4 * z * z * z * z; }
  double derivative(double z) const { return 2.0 * alpha2 * z + 4.0 * alpha4 * z * z * z; }
  double curvature(double z) const { return 2.0 * alpha2 + 12.0 * alpha4 * z * z; }

  /// Confining means V -> +inf as |z| -> inf.
  bool confining() const { return alpha4 > 0.0 || (alpha4 == 0.0 && alpha2 > 0.0); }
  void validate() const;

  static AxialPotential harmonic(double omega_z, const IonSpecies& ion) {
    return {0.5 * ion.mass * omega_z * omega_z, 0.0};
  }
};

/// Normal modes sorted by ascending frequency; column m of `vectors` is the
/// orthonormal participation vector b_{.m} of mode m.
struct ModeSet {
  Eigen::VectorXd frequencies;  // rad/s
  Eigen::MatrixXd vectors;
};

struct ChainSolution {
  Eigen::VectorXd positions;  // m, ascending
  ModeSet axial;
  ModeSet transverse;
};

/// Natural length: root of 2|alpha2| l + 4 alpha4 l^3 = k e^2 / l^2, which
/// for a harmonic well is (e^2 / (4 pi eps0 m omega_z^2))^(1/3).
double length_scale(const AxialPotential& pot, const IonSpecies& ion);

/// Equilibrium of n ions in `pot` with mutual Coulomb repulsion. Damped
/// Newton in units of length_scale, converged to a maximum residual force of
/// 1e-12 of k e^2 / l^2; restarts from wider/narrower seeds on failure.
/// Throws NumericalError on non-convergence or when a transverse mode at
/// `omega_radial` goes soft (zigzag).
Eigen::VectorXd equilibrium_positions(int n, const AxialPotential& pot, double omega_radial,
                                      const IonSpecies& ion);

/// Axial modes from the Hessian of trap plus Coulomb energy; transverse modes
/// from omega_radial^2 (given at the trap center, with the Laplace defocusing
/// of the quartic term) minus the Coulomb coupling.
ChainSolution normal_modes(const Eigen::VectorXd& positions, const AxialPotential& pot,
                           double omega_radial, const IonSpecies& ion);

/// equilibrium_positions followed by normal_modes.
ChainSolution solve_chain(int n, const AxialPotential& pot, double omega_radial,
                          const IonSpecies& ion);

/// Relative standard deviation (population) of the central_k - 1 spacings
/// between the central_k middle ions.
double spacing_variability(const Eigen::VectorXd& positions, int central_k);
double mean_central_spacing(const Eigen::VectorXd& positions, int central_k);

struct LambDickeSet {
  Eigen::MatrixXd eta;  // eta(ion, mode)
  double delta_k = 0.0;  // rad/m
};

/// eta_im = delta_k |b_im| sqrt(hbar / (2 m omega_m)).
LambDickeSet lamb_dicke(const ModeSet& modes, double delta_k, const IonSpecies& ion);

struct EquispaceOptions {
  double omega_radial = 2.0 * constants::pi * 3.0e6;  // rad/s, transverse stability check
  bool harmonic_only = false;                          // force alpha4 = 0
  int starts = 8;
  std::uint64_t seed = 0;
};

struct EquispaceResult {
  AxialPotential potential;
  double variability = 0.0;
  double mean_spacing = 0.0;  // m
  ChainSolution chain;
};

/// Searches (alpha2, alpha4) for the most uniform central spacings of an
/// n-ion chain with the requested mean spacing. Multi-start simplex over
/// dimensionless coefficients, then an exact rescaling of the winner onto the
/// target mean spacing. Ties are broken towards smaller |alpha4|.
EquispaceResult optimize_equispaced(int n, int central_k, double target_spacing,
                                    const IonSpecies& ion, const EquispaceOptions& options = {});

/// Delimited export: a position table (index, z_um) followed, after a blank
/// line, by a mode table (family, mode, frequency_hz, b_0 ... b_{n-1}).
void write_chain(std::ostream& out, const ChainSolution& chain);

}  // namespace iontrap::chain
