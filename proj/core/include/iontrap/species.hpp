#pragma once

#include <cmath>

#include "iontrap/constants.hpp"
#include "iontrap/errors.hpp"

namespace iontrap {

struct IonSpecies {
  double mass = 0.0;    // kg
  double charge = 0.0;  // C

  void validate() const {
    detail::require(std::isfinite(mass) && mass > 0.0, "ion mass must be positive");
    detail::require(std::isfinite(charge) && charge != 0.0, "ion charge must be non-zero");
    const double z = charge / constants::elementary_charge;
    detail::require(std::abs(z - std::round(z)) < 1e-9,
                    "ion charge must be an integer multiple of e");
  }

  static IonSpecies from_amu(double mass_amu, int charge_state = 1) {
    return {mass_amu * constants::atomic_mass_unit,
            charge_state * constants::elementary_charge};
  }
};

namespace species {

inline IonSpecies ytterbium_171() { return IonSpecies::from_amu(170.9363302); }
inline IonSpecies ytterbium_172() { return IonSpecies::from_amu(171.9363859); }

}  // namespace species
}  // namespace iontrap
