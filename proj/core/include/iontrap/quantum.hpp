#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "iontrap/errors.hpp"

namespace iontrap::quantum {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

inline constexpr std::size_t kDefaultCutoff = 30;

/// Truncated Fock space {|0>, ..., |cutoff-1>}. Operators are the exact
/// truncations, so [a, a^dagger] = 1 except in the top level.
struct FockSpace {
  std::size_t cutoff = kDefaultCutoff;

  Matrix annihilation() const;
  Matrix creation() const;
  Matrix number() const;
};

FockSpace build_fock_space(std::size_t cutoff);

/// Amplitude reservoir (gamma_a, nbar_bath) and pure dephasing gamma_p.
struct NoiseModel {
  double gamma_a = 0.0;    // 1/s
  double nbar_bath = 0.0;  // mean bath occupation
  double gamma_p = 0.0;    // 1/s

  double heating_rate() const { return gamma_a * nbar_bath; }
  void validate() const;

  /// gamma_a = nbar_dot / nbar_bath at the given bath occupation.
  static NoiseModel from_heating_rate(double nbar_dot, double nbar_bath, double gamma_p = 0.0);
};

/// Bose-Einstein occupation of a mode at angular frequency omega.
double thermal_occupation(double omega, double temperature_k = 300.0);

/// Register layout: `spin_states` internal levels (1 for a bare oscillator)
/// times `cutoff` Fock levels, basis index spin * cutoff + n.
struct Layout {
  std::size_t spin_states = 1;
  std::size_t cutoff = kDefaultCutoff;

  std::size_t dim() const { return spin_states * cutoff; }
  std::size_t index(std::size_t spin, std::size_t n) const { return spin * cutoff + n; }
};

/// Throws InvalidInput unless rho is Hermitian (1e-10), has unit trace
/// (1e-8) and no eigenvalue below -1e-8.
void check_density_matrix(const Matrix& rho, double hermitian_tol = 1e-10, double trace_tol = 1e-8,
                          double eig_tol = 1e-8);

Matrix fock_state(const Layout& layout, std::size_t n, std::size_t spin = 0);
/// Thermal occupation p_n = nbar^n / (nbar+1)^(n+1), renormalized on the cutoff.
Matrix thermal_state(const Layout& layout, double nbar);
std::vector<double> thermal_populations(double nbar, std::size_t max_levels);

double mean_phonon_number(const Matrix& rho, const Layout& layout);
/// Populations of each Fock level, summed over spin states.
std::vector<double> fock_populations(const Matrix& rho, const Layout& layout);

struct LindbladResult {
  Matrix rho;
  std::size_t steps = 0;
  double dt = 0.0;
  double trace_drift = 0.0;
  double top_population = 0.0;  // largest top-Fock-level population seen
  bool saturated = false;       // top_population > 1e-6
};

inline constexpr double kMaxStepScale = 0.01;
inline constexpr double kSaturationThreshold = 1e-6;

/// d rho/dt = -i[H, rho] + D_a(rho) + D_p(rho) with
///   D_a = gamma_a nbar (a^+ rho a - {a a^+, rho}/2)
///       + gamma_a (nbar+1) (a rho a^+ - {a^+ a, rho}/2),
///   D_p = gamma_p (n rho n - {n^2, rho}/2),
/// acting on the Fock factor of `layout`. H is in rad/s and time independent.
/// Fixed-step RK4; dt = 0 picks 0.01 / (largest rate). Throws InvalidInput if
/// dt times the largest rate exceeds 0.01, NumericalError on trace drift > 1e-6.
LindbladResult lindblad_evolve(const Matrix& rho0, const Layout& layout, const NoiseModel& noise,
                               const std::optional<Matrix>& hamiltonian, double t, double dt = 0.0);

/// Snapshots of the same evolution at ascending times (t = 0 allowed).
std::vector<LindbladResult> lindblad_snapshots(const Matrix& rho0, const Layout& layout,
                                               const NoiseModel& noise,
                                               const std::optional<Matrix>& hamiltonian,
                                               const std::vector<double>& times, double dt = 0.0);

/// T2 ~= 1 / (2 nbar_dot + gamma_ph / 2). Throws InvalidInput if both are zero.
double t2_from_rates(double nbar_dot, double gamma_ph);

struct RamseyOptions {
  std::size_t cutoff = kDefaultCutoff;
  /// Static detuning added as H = detuning * a^+ a (rad/s).
  double detuning = 0.0;
  double dt = 0.0;
};

struct RamseyResult {
  std::vector<double> phases;
  std::vector<double> fringe;  // P(|1>) after the closing pulse
  double contrast = 0.0;       // peak-to-peak of the fitted sinusoid
  double fringe_phase = 0.0;   // rad, fitted phase phi0 in P = c + (C/2) sin(phi + phi0)
  bool saturated = false;
};

/// Motional Ramsey on Fock levels {0, 1}: prepare (|0> + |1>)/sqrt 2, wait
/// t_wait under lindblad_evolve (with an instantaneous 0 <-> 1 swap at
/// t_wait / 2 when `echo` is set), close with an ideal pi/2 pulse of phase phi
/// and read P(|1>).
RamseyResult simulate_motional_ramsey(const NoiseModel& noise, double t_wait, bool echo,
                                      const std::vector<double>& phases,
                                      const RamseyOptions& options = {});

/// Ramsey contrast 2|rho_01| at each wait time (ascending). Without echo the
/// waits share one evolution.
std::vector<double> ramsey_contrast_curve(const NoiseModel& noise, const std::vector<double>& waits,
                                          bool echo, const RamseyOptions& options = {});

enum class Transition { carrier, red_sideband, blue_sideband };

enum class Coupling {
  /// Full Debye-Waller/Laguerre dependence, normalized to the n = 0 carrier.
  laguerre,
  /// First order: carrier Omega, red Omega eta sqrt(n), blue Omega eta sqrt(n+1).
  lamb_dicke,
};

/// Rabi frequency connecting |n> on `transition`; zero for the red sideband at n = 0.
double fock_rabi_rate(double omega, double eta, std::size_t n, Transition transition,
                      Coupling coupling = Coupling::laguerre);

/// P_excited(t) = sum_n p_n sin^2(Omega_n t / 2) for arbitrary Fock populations.
std::vector<double> sideband_rabi(double omega, double eta, const std::vector<double>& populations,
                                  Transition transition, const std::vector<double>& times,
                                  Coupling coupling = Coupling::laguerre);

/// sideband_rabi over a thermal distribution, truncated once the remaining
/// tail weight is below 1e-8.
std::vector<double> thermal_rabi(double omega, double eta, double nbar, Transition transition,
                                 const std::vector<double>& times,
                                 Coupling coupling = Coupling::laguerre);

struct MsParams {
  double eta_omega = 0.0;    // rad/s, sideband Rabi rate eta * Omega per ion
  double delta = 0.0;        // rad/s, symmetric detuning
  int n_ions = 2;
  double carrier_omega = 0.0;  // rad/s, informational
  double nbar = 0.0;

  void validate() const;
  /// eta Omega <= |delta| / 10.
  bool dispersive() const;
};

struct MsOptions {
  std::size_t cutoff = kDefaultCutoff;
  /// RK4 steps per detuning period 2 pi / delta.
  std::size_t steps_per_loop = 2000;
};

struct MsResult {
  std::vector<double> times;
  std::vector<double> p_up_up;
  std::vector<double> p_odd;  // P(up,down) + P(down,up)
  std::vector<double> p_down_down;
  Matrix final_state;  // spins (x) Fock, spin index = 2 s_0 + s_1 with up = 1
  Matrix final_spins;  // 4 x 4 reduced spin state
  double purity_drift = 0.0;
  double top_population = 0.0;
  bool saturated = false;
};

/// Bichromatic interaction H = (eta Omega / 2) sum_i sigma_x^(i)
/// (a e^{-i delta t} + a^+ e^{i delta t}) from |down down> (x) thermal(nbar).
/// Each thermal Fock component evolves as a pure state with fixed-step RK4.
/// Throws NumericalError if a component's norm drifts by more than 1e-8.
MsResult molmer_sorensen_evolve(const MsParams& p, const std::vector<double>& times,
                                const MsOptions& options = {});

/// Dispersive coupling J = (eta Omega)^2 / (2 delta): in this convention the
/// effective Hamiltonian is J sigma_x sigma_x and P(up,up) = sin^2(J t)
/// oscillates at angular frequency 2J. Throws InvalidInput unless |delta| > eta Omega.
double dispersive_ising_j(double eta_omega, double delta);

/// Partial trace over the Fock factor of a spins (x) Fock state.
Matrix trace_out_motion(const Matrix& rho, const Layout& layout);

/// Parity P_uu + P_dd - P_ud - P_du after a global pi/2 pulse
/// exp(-i pi/4 (cos phi sigma_x + sin phi sigma_y)) on each ion.
std::vector<double> parity_scan(const Matrix& spin_rho, const std::vector<double>& phases);

/// Real/imaginary table export (row, col, re, im) for debugging.
void write_density_matrix(std::ostream& out, const Matrix& rho);

}  // namespace iontrap::quantum
