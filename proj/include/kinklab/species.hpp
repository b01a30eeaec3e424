#pragma once

#include "kinklab/errors.hpp"
#include "kinklab/types.hpp"

namespace kinklab {

// Ion species relative to the reference species of the unit system.
struct IonSpecies {
  Real mass_ratio = 1.0;    // m_ion / m_ref
  Real charge_ratio = 1.0;  // q_ion / q_ref
  bool bright = true;       // fluoresces on camera

  static IonSpecies reference() { return {1.0, 1.0, true}; }

  void validate() const {
    if (!(mass_ratio > 0.0)) throw InvalidArgumentError("IonSpecies: mass_ratio must be > 0");
    if (!(charge_ratio > 0.0)) throw InvalidArgumentError("IonSpecies: charge_ratio must be > 0");
  }

  bool operator==(const IonSpecies&) const = default;
};

}  // namespace kinklab
