#pragma once

#include <numbers>

namespace iontrap::constants {

// CODATA 2018 exact / recommended values, SI units.
inline constexpr double elementary_charge = 1.602176634e-19;
inline constexpr double vacuum_permittivity = 8.8541878128e-12;
inline constexpr double hbar = 1.054571817e-34;
inline constexpr double boltzmann = 1.380649e-23;
inline constexpr double atomic_mass_unit = 1.66053906660e-27;
inline constexpr double bohr_magneton = 9.2740100783e-24;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// 1 / (4 pi epsilon_0)
inline constexpr double coulomb_constant = 1.0 / (4.0 * pi * vacuum_permittivity);

inline constexpr double joules_per_ev = elementary_charge;

}  // namespace iontrap::constants
