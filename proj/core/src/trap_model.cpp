#include "iontrap/trap_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

namespace iontrap::trap {

namespace {

bool all_finite(const TrapConfig& t) {
  return std::isfinite(t.d) && std::isfinite(t.kappa) && std::isfinite(t.omega_rf) &&
         std::isfinite(t.v_rf) && std::isfinite(t.v_twist) && std::isfinite(t.v_endcap) &&
         std::isfinite(t.axial_curvature_per_volt);
}

double axial_omega_sq(const TrapConfig& t) { return t.axial_curvature_per_volt * t.v_endcap; }

}  // namespace

void TrapConfig::validate() const {
  detail::require(all_finite(*this), "trap configuration contains non-finite values");
  detail::require(d > 0.0, "ion-electrode distance d must be positive");
  detail::require(kappa > 0.0 && kappa <= 1.0, "geometric factor kappa must lie in (0, 1]");
  detail::require(omega_rf > 0.0, "RF drive frequency must be positive");
  detail::require(v_rf >= 0.0, "RF voltage must be non-negative");
}

void DissipationParams::validate() const {
  detail::require(std::isfinite(r_series) && r_series >= 0.0, "series resistance must be >= 0");
  detail::require(std::isfinite(c_trap) && c_trap >= 0.0, "trap capacitance must be >= 0");
}

MathieuParameters mathieu_parameters(const TrapConfig& trap, const IonSpecies& ion) {
  trap.validate();
  ion.validate();
  const double omega2 = trap.omega_rf * trap.omega_rf;
  const double geom = ion.charge * trap.kappa / (ion.mass * omega2 * trap.d * trap.d);

  MathieuParameters p;
  p.q = 2.0 * geom * trap.v_rf;
  // Static twist quadrupole (same geometry, opposite sign on the two axes)
  // and the Laplace defocusing from the axial (endcap) curvature.
  const double a_twist = 4.0 * geom * trap.v_twist;
  const double a_endcap = -2.0 * axial_omega_sq(trap) / omega2;
  p.a_x = a_twist + a_endcap;
  p.a_y = -a_twist + a_endcap;

  const double q2 = 0.5 * p.q * p.q;
  p.stable = std::abs(p.q) < kStabilityQLimit && p.a_x + q2 > 0.0 && p.a_y + q2 > 0.0;
  return p;
}

SecularFrequencies secular_frequencies(const TrapConfig& trap, const IonSpecies& ion) {
  const MathieuParameters m = mathieu_parameters(trap, ion);
  if (!m.stable) {
    throw NumericalError("drive outside the first stability region (q = " + std::to_string(m.q) +
                         ", a_x = " + std::to_string(m.a_x) + ", a_y = " + std::to_string(m.a_y) +
                         ")");
  }
  const double wz2 = axial_omega_sq(trap);
  if (wz2 < 0.0) throw NumericalError("axial curvature is anti-confining");

  const double half = 0.5 * trap.omega_rf;
  const double wx = half * std::sqrt(m.a_x + 0.5 * m.q * m.q);
  const double wy = half * std::sqrt(m.a_y + 0.5 * m.q * m.q);
  return {std::max(wx, wy), std::min(wx, wy), std::sqrt(wz2)};
}

double rf_power_dissipation(const DissipationParams& p, double omega_rf, double v_rf) {
  p.validate();
  return 0.5 * p.r_series * p.c_trap * p.c_trap * omega_rf * omega_rf * v_rf * v_rf;
}

double axial_depth_from_endcaps(double potential_gain_center, double potential_gain_max,
                                double v_endcap, const IonSpecies& ion) {
  ion.validate();
  detail::require(potential_gain_max >= potential_gain_center,
                  "potential maximum must not lie below the trap-center potential");
  const double charge_number = ion.charge / constants::elementary_charge;
  return charge_number * (potential_gain_max - potential_gain_center) * v_endcap;
}

RfVoltageFit fit_rf_voltage(const TrapConfig& trap, const IonSpecies& ion,
                            std::span<const RadialMeasurement> measured) {
  detail::require(!measured.empty(), "fit_rf_voltage needs at least one measurement");
  trap.validate();

  // Seed from the lowest-order relation omega = q Omega / (2 sqrt 2) on the mean.
  double mean = 0.0;
  for (const auto& m : measured) mean += 0.5 * (m.omega_hf + m.omega_lf);
  mean /= static_cast<double>(measured.size());
  const double q_guess = 2.0 * std::sqrt(2.0) * mean / trap.omega_rf;
  const double v_guess = q_guess * ion.mass * trap.omega_rf * trap.omega_rf * trap.d * trap.d /
                         (2.0 * ion.charge * trap.kappa);

  auto cost = [&](double v) {
    TrapConfig t = trap;
    t.v_rf = v;
    const MathieuParameters m = mathieu_parameters(t, ion);
    if (!m.stable) return std::numeric_limits<double>::max();
    const SecularFrequencies f = secular_frequencies(t, ion);
    double s = 0.0;
    for (const auto& meas : measured) {
      s += std::pow(f.omega_hf - meas.omega_hf, 2) + std::pow(f.omega_lf - meas.omega_lf, 2);
    }
    return s;
  };

  std::uintmax_t iterations = 200;
  const auto [v, c] = boost::math::tools::brent_find_minima(cost, 0.5 * v_guess, 2.0 * v_guess,
                                                            std::numeric_limits<double>::digits / 2,
                                                            iterations);
  if (c == std::numeric_limits<double>::max()) {
    throw NumericalError("no stable RF voltage reproduces the measured frequencies");
  }
  return {v, std::sqrt(c / (2.0 * static_cast<double>(measured.size()))),
          static_cast<int>(iterations)};
}

}  // namespace iontrap::trap
