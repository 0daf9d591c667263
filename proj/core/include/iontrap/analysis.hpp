#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "iontrap/species.hpp"

namespace iontrap::analysis {

// ---------------------------------------------------------------------------
// Thermometry and heating

struct NbarEstimate {
  double nbar = 0.0;
  double sigma = 0.0;
  /// Set when nbar > 2, where the sideband-ratio method degrades.
  bool high_occupation_warning = false;
};

inline constexpr double kThermometryWarnNbar = 2.0;

/// nbar = r / (1 - r), sigma = sigma_r / (1 - r)^2. Throws unless 0 <= r < 1.
NbarEstimate nbar_from_sideband_ratio(double r, double sigma_r = 0.0);

struct HeatingPoint {
  double t = 0.0;      // s
  double nbar = 0.0;
  double sigma = 0.0;  // 0 for every point selects an unweighted fit
};

struct LineFit {
  double slope = 0.0;
  double slope_sigma = 0.0;
  double intercept = 0.0;
  double intercept_sigma = 0.0;
  double chi2 = 0.0;
  int dof = 0;
};

/// Weighted least-squares line nbar = intercept + slope t. With per-point
/// sigmas the standard errors are the a-priori ones; unweighted fits scale by
/// the residual variance (zero for two points).
LineFit heating_rate_fit(const std::vector<HeatingPoint>& points);

struct FieldNoise {
  double s_e = 0.0;             // V^2 m^-2 Hz^-1
  double s_e_referred = 0.0;    // s_e * omega / omega_ref (1/omega scaling)
  double omega_ref = 0.0;
};

/// S_E = 4 m hbar omega nbar_dot / q^2, and its value referred to omega_ref.
FieldNoise field_noise_from_heating(double nbar_dot, double omega, const IonSpecies& ion,
                                    double omega_ref = 2.0 * constants::pi * 1.0e6);

// ---------------------------------------------------------------------------
// Frequency stability

struct AllanResult {
  std::vector<double> taus;
  std::vector<double> deviation;
  std::vector<double> lower;  // 68.3% chi-square band
  std::vector<double> upper;
  std::vector<double> edf;
};

/// Overlapping Allan deviation of a frequency series sampled every `period`.
/// Bands use chi-square statistics with the white-FM equivalent degrees of
/// freedom. Each tau must be a positive multiple of `period` no longer than
/// half the record.
AllanResult allan_deviation(const std::vector<double>& samples, double period,
                            const std::vector<double>& taus);

/// Sideband lineshape used for side-of-fringe tracking:
/// P(D) = W^2/(W^2 + D^2) sin^2(sqrt(W^2 + D^2) t / 2), D the laser detuning.
struct Lineshape {
  double omega_center = 0.0;  // rad/s, nominal resonance
  double rabi = 0.0;          // rad/s, on-resonance Rabi rate W
  double pulse_time = 0.0;    // s, requires W t <= pi

  void validate() const;
  double probability(double detuning) const;
  double slope(double detuning) const;
  /// Positive detuning where P falls to half its peak; the probe parks here.
  double half_max_detuning() const;
  /// First zero of P at positive detuning; the end of the invertible flank.
  double first_zero_detuning() const;
};

struct FringeEstimate {
  double omega = 0.0;   // rad/s, inferred resonance
  double offset = 0.0;  // rad/s, omega - omega_center
  double sigma = 0.0;   // rad/s
};

/// Infers the resonance from one excitation probability measured with the
/// probe parked at omega_center + half_max_detuning. Throws unless p lies on
/// the flank (0, P(0)].
FringeEstimate side_of_fringe_frequency(double p_excited, double sigma_p, const Lineshape& line);

// ---------------------------------------------------------------------------
// Contrast decay

enum class DecayModel { exponential, gaussian };

struct DecayPoint {
  double t = 0.0;
  double contrast = 0.0;
  double sigma = 0.0;  // 0 for every point selects an unweighted fit
};

struct DecayFit {
  double c0 = 0.0;
  double c0_sigma = 0.0;
  double t2 = 0.0;  // 1/e time
  double t2_sigma = 0.0;
  double chi2 = 0.0;
  int iterations = 0;
};

/// Levenberg-Marquardt fit of C0 exp(-t/T2) or C0 exp(-(t/T2)^2).
DecayFit fit_contrast_decay(const std::vector<DecayPoint>& points, DecayModel model);

/// First time a sampled curve falls to `level` (e.g. 1/e of its start),
/// linearly interpolated between the bracketing samples. Throws
/// NumericalError when the curve never reaches the level.
double level_crossing_time(const std::vector<double>& times, const std::vector<double>& values,
                           double level);

// ---------------------------------------------------------------------------
// Detection statistics

using Histogram = std::vector<std::uint64_t>;  // entry c = number of shots with c photons

Histogram histogram_from_counts(const std::vector<std::uint32_t>& counts);

/// Column-stochastic confusion matrix M(detected, prepared) over the
/// categories {both dark, one bright, both bright}, plus credible intervals.
struct SpamMatrix {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d lower = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d upper = Eigen::Matrix3d::Identity();
  double credible_level = 0.683;

  void validate() const;
};

/// Category of a shot: counts < t1 -> 0, t1 <= counts < t2 -> 1, otherwise 2.
int classify_counts(std::uint32_t counts, std::uint32_t t1, std::uint32_t t2);

struct ThresholdOptions {
  std::size_t dirichlet_samples = 10000;
  double credible_level = 0.683;
  std::uint64_t seed = 0;
};

struct ThresholdResult {
  std::uint32_t t1 = 0;
  std::uint32_t t2 = 0;
  double fidelity_product = 0.0;
  SpamMatrix spam;
};

/// Exhaustive integer scan of t1 < t2 maximizing the product of the three
/// diagonal fidelities (first maximum in (t1, t2) order wins). Intervals come
/// from Dirichlet(counts + 1) resampling of each prepared-state column.
ThresholdResult optimize_thresholds(const std::array<Histogram, 3>& prepared,
                                    const ThresholdOptions& options = {});

/// Shots at one analysis phase, classified into the three categories.
struct PhasePoint {
  double phase = 0.0;
  std::array<std::uint64_t, 3> counts{};
};

/// Raw per-shot photon counts at each phase plus the classification thresholds.
struct CountRecord {
  std::vector<double> phases;
  std::vector<std::vector<std::uint32_t>> shots;
  std::uint32_t t1 = 0;
  std::uint32_t t2 = 1;

  std::vector<PhasePoint> classify() const;
};

/// Delimited count record: header "phase_rad,counts" then one shot per row.
/// Rows sharing a phase value are grouped in first-appearance order.
CountRecord read_count_record(std::istream& in, std::uint32_t t1, std::uint32_t t2);

struct MleOptions {
  int restarts = 8;
  std::uint64_t seed = 0;
  double interval_level = 0.683;
};

struct MleParityResult {
  double contrast = 0.0;
  double lower = 0.0;  // profile-likelihood interval, clipped to [0, 1]
  double upper = 0.0;
  double sigma = 0.0;  // inverse-Hessian standard deviation
  double phase = 0.0;  // rad, Pi(phi) = offset + C cos(2 phi + phase)
  double offset = 0.0;
  double nll = 0.0;
};

/// Parity model Pi(phi) = offset + C cos(2 phi + phase) with P(uu) = P(dd) =
/// (1 + Pi)/4 and P(odd) = (1 - Pi)/2. When `correct` is set the model
/// probabilities are pushed through the SPAM matrix before the multinomial
/// likelihood; data are never inverted.
MleParityResult mle_parity_fit(const std::vector<PhasePoint>& data, const SpamMatrix& spam,
                               bool correct, const MleOptions& options = {});

/// Parity of classified shots: (N_dd + N_uu - N_odd) / N.
double empirical_parity(const PhasePoint& p);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Central credible interval of Beta(k+1, n-k+1). At k = n (k = 0) the
/// interval is one-sided and ends exactly at 1 (0).
Interval beta_interval(std::uint64_t k, std::uint64_t n, double level = 0.683);

// ---------------------------------------------------------------------------
// Micromotion via fluorescence modulation

/// Four-level model: ground m = -1/2, +1/2 and excited m' = -1/2, +1/2 of a
/// J = 1/2 -> J' = 1/2 line. Zeeman g-factors, dipole couplings by
/// polarization component and decay branching (pi 1/3, sigma 2/3) follow
/// that angular-momentum structure.
struct ObeConfig {
  double gamma = constants::two_pi * 19.6e6;     // rad/s, natural linewidth
  double detuning = -constants::pi * 19.6e6;     // rad/s, laser - atom (red < 0)
  double saturation = 1.0;                       // s, Rabi rate gamma sqrt(s/2)
  double b_field = 4.5e-4;                       // T
  double omega_rf = constants::two_pi * 23.24e6; // rad/s
  double beta = 0.0;                             // modulation index k x_mm
  double wavevector = constants::two_pi / 369.5e-9;  // rad/m
  double g_ground = 2.0;
  double g_excited = 2.0 / 3.0;
  /// Polarization amplitudes (pi, sigma+, sigma-), normalized internally.
  std::array<double, 3> polarization{0.70710678118654752, 0.5, 0.5};
  int max_periods = 20000;
  double periodicity_tol = 1e-11;

  void validate() const;
};

struct ObeResult {
  double contrast = 0.0;       // Delta S / S0
  double mean_excited = 0.0;   // S0
  double phase = 0.0;          // rad
  int periods = 0;
};

/// Integrates the four-level optical Bloch equations with the instantaneous
/// detuning D + beta Omega_RF cos(Omega_RF t) to periodic steady state and
/// returns the Omega_RF Fourier amplitude of the excited population over its
/// mean. `initial` selects the starting state (0: ground m=-1/2, 1: mixed).
ObeResult obe_modulation_contrast(const ObeConfig& cfg, int initial = 0);

struct MicromotionCalibration {
  ObeConfig base;
  std::vector<double> betas;
  std::vector<double> contrasts;
};

/// Contrast at `points` betas evenly spaced on [0, beta_max]. Requires a
/// strictly increasing relation and throws NumericalError otherwise.
MicromotionCalibration calibrate_micromotion(const ObeConfig& base, int points = 21,
                                             double beta_max = 0.5, unsigned threads = 1);

struct MicromotionEstimate {
  double beta = 0.0;
  double e_rf = 0.0;  // V/m
};

/// Monotone cubic inversion of the calibration, then E_RF = beta m Omega^2 / (k q).
/// Contrasts outside the calibrated range are rejected, never extrapolated.
MicromotionEstimate beta_from_contrast(double contrast, const MicromotionCalibration& cal,
                                       const IonSpecies& ion);

double rf_field_from_beta(double beta, double omega_rf, double wavevector, const IonSpecies& ion);

}  // namespace iontrap::analysis
