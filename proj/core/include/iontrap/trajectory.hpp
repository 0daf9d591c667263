#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "iontrap/field_model.hpp"

namespace iontrap::trap {

struct Trajectory {
  std::vector<double> times;       // s, uniform grid
  std::vector<Vec3> positions;     // m
  std::vector<Vec3> velocities;    // m/s
  bool escaped = false;
  double escape_time = 0.0;        // s, valid when escaped
};

struct IntegrationOptions {
  /// Step size; 0 selects the default RF period / 200.
  double dt = 0.0;
  /// RF phase at t = 0, the drive is cos(Omega t + rf_phase).
  double rf_phase = 0.0;
  /// Replace the RF drive by the time-averaged pseudopotential force.
  bool pseudopotential_only = false;
  /// Keep every `record_stride`-th step; 0 records only the endpoints.
  std::size_t record_stride = 1;
};

inline constexpr int kDefaultStepsPerRfPeriod = 200;
inline constexpr int kMinStepsPerRfPeriod = 100;

/// Fixed-step RK4 integration of m r'' = q E_RF(r) cos(Omega t + phase) + q E_static(r).
/// Stops early, flagging an escape, when the ion leaves the field domain.
Trajectory integrate_trajectory(const FieldModel& field, const IonSpecies& ion, const Vec3& x0,
                                const Vec3& v0, double duration,
                                const IntegrationOptions& options = {});

struct DepthScanOptions {
  std::size_t shots = 100;
  std::size_t cycles = 50;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double dt = 0.0;          // 0: RF period / 200
  bool random_rf_phase = true;
  /// Secular frequency used to convert `cycles` into time; 0 derives it from
  /// the pseudopotential curvature at the trap center (lowest radial mode).
  double secular_omega = 0.0;
};

struct DepthScan {
  std::vector<double> energies;       // J
  std::vector<double> probabilities;  // escape fraction per energy
  std::vector<double> sigmas;         // binomial standard error
  std::vector<std::size_t> escapes;
  /// Largest energy with zero escapes, smallest with all shots escaping.
  std::optional<double> lower_bound;
  std::optional<double> upper_bound;
  double secular_omega = 0.0;
  double duration = 0.0;
};

/// Monte-Carlo escape-probability scan. Each shot starts at the trap center
/// with speed sqrt(2E/m) along a direction uniform on the radial-plane circle
/// and, by default, a uniformly random RF launch phase. Deterministic in the
/// seed regardless of `threads`.
DepthScan trap_depth_monte_carlo(const FieldModel& field, const IonSpecies& ion,
                                 const std::vector<double>& energy_grid,
                                 const DepthScanOptions& options = {});

/// Lowest radial secular frequency from the pseudopotential Hessian at `center`.
double pseudopotential_secular_omega(const FieldModel& field, const IonSpecies& ion,
                                     const Vec3& center = Vec3::Zero());

}  // namespace iontrap::trap
