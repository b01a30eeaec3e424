#pragma once

#include <array>

#include "kinklab/trap.hpp"
#include "kinklab/types.hpp"

namespace kinklab {

// Single-ion secular motion extracted from the monodromy matrix of the linear
// Mathieu equations over one rf period (period pi in nondimensional time).
struct SecularModes {
  // Frequencies in units of Omega/2, ordered (axial, in-plane radial,
  // out-of-plane radial); the radial pair is sorted ascending.
  std::array<Real, 3> omega{};
  // Orthonormal principal axes as columns (x, y', z') in lab coordinates.
  // x decouples exactly; y' and z' lie in the yz plane.
  Mat3 axes = Mat3::Identity();
  // Rotation angle of the radial principal axes, (y,z) = R(psi) (y',z').
  Real axes_angle = 0.0;
  // Equivalent static trap in the principal frame.
  PseudoTrap pseudo;
  // Per-axis stability; with allow_unstable the unstable axes carry the
  // offending multiplier modulus instead of a frequency.
  std::array<bool, 3> stable{true, true, true};
  std::array<Real, 3> multiplier_modulus{1.0, 1.0, 1.0};

  bool all_stable() const { return stable[0] && stable[1] && stable[2]; }
};

// Monodromy matrix of the coupled radial (y, z, vy, vz) system over one rf
// period, from the stroboscopic phase t = 0.
Mat4 radial_monodromy(const PaulTrap& trap, int steps_per_period = 4096);

// Floquet analysis of the single-ion motion. Throws FloquetInstabilityError
// if any axis is unstable, unless allow_unstable is set (then the unstable
// axes are flagged in the result instead).
SecularModes pseudopotential_from_paul(const PaulTrap& trap, bool allow_unstable = false,
                                       int steps_per_period = 4096);

}  // namespace kinklab
