#pragma once

#include <optional>
#include <span>

#include "iontrap/species.hpp"

namespace iontrap::trap {

/// Drive and geometry of a linear blade trap in the analytic quadrupole model.
///
/// The RF potential is kappa * V_RF * (x^2 - y^2) / (2 d^2) * cos(Omega t), so
/// that |E_RF| = kappa * V_RF * r / d^2. The twist bias adds a static
/// quadrupole of the same geometry with amplitude V_twist. The endcaps set the
/// axial curvature omega_z^2 = axial_curvature_per_volt * V_endcap and, by
/// Laplace's equation, defocus both radial axes by omega_z^2 / 2.
struct TrapConfig {
  double d = 0.0;          // m, ion-electrode distance
  double kappa = 1.0;      // radial geometric factor
  double omega_rf = 0.0;   // rad/s
  double v_rf = 0.0;       // V peak
  double v_twist = 0.0;    // V
  double v_endcap = 0.0;   // V
  double axial_curvature_per_volt = 0.0;  // (rad/s)^2 / V

  void validate() const;
};

struct MathieuParameters {
  double q = 0.0;
  double a_x = 0.0;
  double a_y = 0.0;
  bool stable = false;
};

/// Lowest-order first-stability-region boundary at a ~ 0.
inline constexpr double kStabilityQLimit = 0.908;

MathieuParameters mathieu_parameters(const TrapConfig& trap, const IonSpecies& ion);

struct SecularFrequencies {
  double omega_hf = 0.0;     // rad/s, higher radial mode
  double omega_lf = 0.0;     // rad/s, lower radial mode
  double omega_axial = 0.0;  // rad/s
};

/// Pseudopotential secular frequencies omega_i = (Omega/2) sqrt(a_i + q^2/2).
/// Throws NumericalError when the drive is outside the stability region.
SecularFrequencies secular_frequencies(const TrapConfig& trap, const IonSpecies& ion);

struct DissipationParams {
  double r_series = 0.0;  // ohm
  double c_trap = 0.0;    // F

  void validate() const;
};

/// P = R_s C_t^2 Omega^2 V^2 / 2, in watts.
double rf_power_dissipation(const DissipationParams& p, double omega_rf, double v_rf);

/// Axial depth in eV: charge (in e) times the endcap-gain difference times V_endcap.
double axial_depth_from_endcaps(double potential_gain_center, double potential_gain_max,
                                double v_endcap, const IonSpecies& ion);

struct RfVoltageFit {
  double v_rf = 0.0;
  double rms_residual = 0.0;  // rad/s
  int iterations = 0;
};

/// Measured radial frequency pair at one trap setting.
struct RadialMeasurement {
  double omega_hf = 0.0;
  double omega_lf = 0.0;
};

/// Least-squares fit of V_RF alone (every other TrapConfig field held fixed)
/// to measured HF/LF secular frequencies.
RfVoltageFit fit_rf_voltage(const TrapConfig& trap, const IonSpecies& ion,
                            std::span<const RadialMeasurement> measured);

}  // namespace iontrap::trap
