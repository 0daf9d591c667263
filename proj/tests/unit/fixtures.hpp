#pragma once

#include <cmath>
#include <utility>

#include "iontrap/constants.hpp"
#include "iontrap/species.hpp"
#include "iontrap/trap_model.hpp"

namespace iontrap::testing {

using constants::pi;
using constants::two_pi;

/// Blade trap at 250 um with the 23.24 MHz, 483 V drive.
inline trap::TrapConfig blade_trap(double v_rf = 483.0) {
  trap::TrapConfig t;
  t.d = 250e-6;
  t.kappa = 0.83;
  t.omega_rf = two_pi * 23.24e6;
  t.v_rf = v_rf;
  return t;
}

inline IonSpecies yb171() { return species::ytterbium_171(); }

/// Characteristic exponent beta of x'' + (a - 2q cos 2 tau) x = 0 from the
/// trace of the monodromy matrix over one period pi. Valid in the first
/// stability region, where 0 < beta < 1.
inline double mathieu_beta(double a, double q, int steps = 20000) {
  auto rhs = [&](double tau, double x, double v, double& dx, double& dv) {
    dx = v;
    dv = -(a - 2.0 * q * std::cos(2.0 * tau)) * x;
  };
  auto propagate = [&](double x, double v) {
    const double h = pi / steps;
    for (int k = 0; k < steps; ++k) {
      const double t = k * h;
      double k1x, k1v, k2x, k2v, k3x, k3v, k4x, k4v;
      rhs(t, x, v, k1x, k1v);
      rhs(t + h / 2, x + h / 2 * k1x, v + h / 2 * k1v, k2x, k2v);
      rhs(t + h / 2, x + h / 2 * k2x, v + h / 2 * k2v, k3x, k3v);
      rhs(t + h, x + h * k3x, v + h * k3v, k4x, k4v);
      x += h / 6 * (k1x + 2 * k2x + 2 * k3x + k4x);
      v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v);
    }
    return std::pair{x, v};
  };
  const auto [x1, v1] = propagate(1.0, 0.0);
  const auto [x2, v2] = propagate(0.0, 1.0);
  (void)v1;
  (void)x2;
  const double half_trace = 0.5 * (x1 + v2);
  return std::acos(half_trace) / pi;
}

}  // namespace iontrap::testing
