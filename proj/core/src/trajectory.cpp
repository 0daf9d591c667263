#include "iontrap/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/Eigenvalues>

#include "iontrap/rng.hpp"

namespace iontrap::trap {

namespace {

using constants::two_pi;

struct Integrator {
  const FieldModel& field;
  const IonSpecies& ion;
  double phase;
  bool pseudo;
  double qm;
  double pp_coeff;

  Integrator(const FieldModel& f, const IonSpecies& i, double rf_phase, bool pseudopotential_only)
      : field(f), ion(i), phase(rf_phase), pseudo(pseudopotential_only), qm(i.charge / i.mass) {
    const double w = f.omega_rf();
    pp_coeff = qm * qm / (4.0 * w * w);
  }

  // False when the stage position is outside the domain.
  bool accel(double t, const Vec3& r, Vec3& out) const {
    if (!field.inside(r)) return false;
    out = field.static_acceleration(r, ion);
    if (pseudo) {
      out -= pp_coeff * field.rf_field_sq_gradient(r);
    } else {
      out += qm * std::cos(field.omega_rf() * t + phase) * field.rf_field(r);
    }
    return true;
  }

  // One RK4 step; false on escape.
  bool step(double t, double dt, Vec3& r, Vec3& v) const {
    Vec3 a1, a2, a3, a4;
    if (!accel(t, r, a1)) return false;
    const Vec3 r2 = r + 0.5 * dt * v;
    const Vec3 v2 = v + 0.5 * dt * a1;
    if (!accel(t + 0.5 * dt, r2, a2)) return false;
    const Vec3 r3 = r + 0.5 * dt * v2;
    const Vec3 v3 = v + 0.5 * dt * a2;
    if (!accel(t + 0.5 * dt, r3, a3)) return false;
    const Vec3 r4 = r + dt * v3;
    const Vec3 v4 = v + dt * a3;
    if (!accel(t + dt, r4, a4)) return false;
    r += dt / 6.0 * (v + 2.0 * v2 + 2.0 * v3 + v4);
    v += dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4);
    return field.inside(r);
  }
};

double resolve_dt(const FieldModel& field, double dt) {
  const double period = two_pi / field.omega_rf();
  if (dt == 0.0) return period / kDefaultStepsPerRfPeriod;
  detail::require(std::isfinite(dt) && dt > 0.0, "time step must be positive");
  if (dt > period / kMinStepsPerRfPeriod * (1.0 + 1e-12)) {
    throw InvalidInput("time step exceeds RF period / " + std::to_string(kMinStepsPerRfPeriod));
  }
  return dt;
}

}  // namespace

Trajectory integrate_trajectory(const FieldModel& field, const IonSpecies& ion, const Vec3& x0,
                                const Vec3& v0, double duration,
                                const IntegrationOptions& options) {
  ion.validate();
  detail::require(std::isfinite(duration) && duration > 0.0, "duration must be positive");
  detail::require(x0.allFinite() && v0.allFinite(), "initial conditions must be finite");
  if (!field.inside(x0)) throw InvalidInput("initial position outside the field domain");

  const double dt_req = resolve_dt(field, options.dt);
  const auto steps = static_cast<std::size_t>(std::ceil(duration / dt_req - 1e-9));
  const double dt = duration / static_cast<double>(steps);
  const Integrator in(field, ion, options.rf_phase, options.pseudopotential_only);

  Trajectory out;
  auto record = [&](double t, const Vec3& r, const Vec3& v) {
    out.times.push_back(t);
    out.positions.push_back(r);
    out.velocities.push_back(v);
  };

  Vec3 r = x0, v = v0;
  record(0.0, r, v);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * dt;
    if (!in.step(t, dt, r, v)) {
      out.escaped = true;
      out.escape_time = t + dt;
      return out;
    }
    if (!r.allFinite() || !v.allFinite()) throw NumericalError("trajectory became non-finite");
    const std::size_t n = k + 1;
    const bool last = n == steps;
    if (last || (options.record_stride > 0 && n % options.record_stride == 0)) {
      record(static_cast<double>(n) * dt, r, v);
    }
  }
  return out;
}

double pseudopotential_secular_omega(const FieldModel& field, const IonSpecies& ion,
                                     const Vec3& center) {
  ion.validate();
  if (!field.inside(center)) throw InvalidInput("center outside the field domain");
  const double qm = ion.charge / ion.mass;
  const double w = field.omega_rf();
  const double coeff = qm * qm / (4.0 * w * w);

  double h = 1e-6;
  if (const auto* ideal = field.ideal()) {
    h = 1e-3 * ideal->wall_radius;
  } else {
    const auto& ax = field.grid_map()->axis(0);
    h = 1e-2 * (ax.back() - ax.front()) / static_cast<double>(ax.size() - 1);
  }
  auto acc = [&](const Vec3& r) {
    return Vec3(field.static_acceleration(r, ion) - coeff * field.rf_field_sq_gradient(r));
  };
  Eigen::Matrix2d k;
  for (int j = 0; j < 2; ++j) {
    Vec3 lo = center, hi = center;
    lo[j] -= h;
    hi[j] += h;
    if (!field.inside(lo) || !field.inside(hi)) {
      throw InvalidInput("center too close to the field-domain edge");
    }
    const Vec3 d = (acc(hi) - acc(lo)) / (2.0 * h);
    k(0, j) = -d.x();
    k(1, j) = -d.y();
  }
  const Eigen::Matrix2d sym = 0.5 * (k + k.transpose());
  const double lmin = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(sym).eigenvalues()(0);
  if (!(lmin > 0.0)) throw NumericalError("radial pseudopotential is not confining at the center");
  return std::sqrt(lmin);
}

DepthScan trap_depth_monte_carlo(const FieldModel& field, const IonSpecies& ion,
                                 const std::vector<double>& energy_grid,
                                 const DepthScanOptions& options) {
  ion.validate();
  detail::require(!energy_grid.empty(), "energy grid is empty");
  for (std::size_t i = 0; i < energy_grid.size(); ++i) {
    detail::require(std::isfinite(energy_grid[i]) && energy_grid[i] > 0.0,
                    "energies must be positive");
    if (i > 0) detail::require(energy_grid[i] > energy_grid[i - 1], "energy grid must increase");
  }
  detail::require(options.shots > 0, "shots must be positive");
  detail::require(options.cycles > 0, "cycles must be positive");
  detail::require(options.threads > 0, "threads must be positive");

  DepthScan scan;
  scan.energies = energy_grid;
  scan.secular_omega = options.secular_omega > 0.0 ? options.secular_omega
                                                   : pseudopotential_secular_omega(field, ion);
  scan.duration = static_cast<double>(options.cycles) * two_pi / scan.secular_omega;

  const double dt_req = resolve_dt(field, options.dt);
  const auto steps = static_cast<std::size_t>(std::ceil(scan.duration / dt_req - 1e-9));
  const double dt = scan.duration / static_cast<double>(steps);

  const std::size_t shots = options.shots;
  const std::size_t total = energy_grid.size() * shots;
  std::vector<unsigned char> escaped(total, 0);

  auto run_shot = [&](std::size_t task) {
    const std::size_t ei = task / shots;
    Rng rng = Rng::stream(options.seed, static_cast<std::uint64_t>(task));
    const double theta = two_pi * rng.uniform();
    const double phase = options.random_rf_phase ? two_pi * rng.uniform() : 0.0;
    const double speed = std::sqrt(2.0 * energy_grid[ei] / ion.mass);
    const Integrator in(field, ion, phase, false);
    Vec3 r = Vec3::Zero();
    Vec3 v{speed * std::cos(theta), speed * std::sin(theta), 0.0};
    for (std::size_t k = 0; k < steps; ++k) {
      if (!in.step(static_cast<double>(k) * dt, dt, r, v)) {
        escaped[task] = 1;
        return;
      }
    }
  };

  const unsigned nthreads =
      static_cast<unsigned>(std::min<std::size_t>(options.threads, total));
  if (nthreads <= 1) {
    for (std::size_t t = 0; t < total; ++t) run_shot(t);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned w = 0; w < nthreads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < total; t += nthreads) run_shot(t);
      });
    }
    for (auto& th : pool) th.join();
  }

  const double n = static_cast<double>(shots);
  for (std::size_t ei = 0; ei < energy_grid.size(); ++ei) {
    std::size_t count = 0;
    for (std::size_t s = 0; s < shots; ++s) count += escaped[ei * shots + s];
    const double p = static_cast<double>(count) / n;
    scan.escapes.push_back(count);
    scan.probabilities.push_back(p);
    scan.sigmas.push_back(std::sqrt(p * (1.0 - p) / n));
    if (count == 0) scan.lower_bound = energy_grid[ei];
    if (count == shots && !scan.upper_bound) scan.upper_bound = energy_grid[ei];
  }
  return scan;
}

}  // namespace iontrap::trap
