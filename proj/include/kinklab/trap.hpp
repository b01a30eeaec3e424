#pragma once

#include <cmath>

#include "kinklab/errors.hpp"
#include "kinklab/types.hpp"

namespace kinklab {

// Static pseudopotential trap, axial strength == 1 by nondimensionalization.
struct PseudoTrap {
  Real gamma_y = 1.0;  // (omega_y / omega_x)^2
  Real gamma_z = 1.0;  // (omega_z / omega_x)^2

  void validate() const {
    if (!(gamma_y > 0.0) || !(gamma_z > 0.0))
      throw InvalidArgumentError("PseudoTrap: gamma_y and gamma_z must be > 0");
  }

  // A planar trap where z is effectively frozen; gamma_z is irrelevant once
  // the z axis is masked out of the configuration, but keep it large and sane.
  static PseudoTrap planar(Real gamma_y) { return {gamma_y, 1e6}; }

  bool operator==(const PseudoTrap&) const = default;
};

// Time-dependent Paul trap in Mathieu form. The single-reference-ion trap
// potential (time in units of 2/Omega) is
//   V(x,y,z,t) = 1/2 (a_x x^2 + a_y y^2 + a_z z^2) + a_yz y z
//                - q cos(2t) (y^2 - z^2),
// with a_z = -a_x - a_y enforced by the Laplace equation. The yz cross term
// carries the full coefficient a_yz = a' sin(2 theta) of the rotated DC
// quadrupole; the curvature-matrix off-diagonal is a_yz.
struct PaulTrap {
  Real a_x = 0.0;
  Real a_y = 0.0;
  Real a_yz = 0.0;
  Real q = 0.0;

  Real a_z() const { return -a_x - a_y; }

  // Build from a rotated DC quadrupole of strength a_prime at angle theta
  // (radians) in the yz plane, added on top of (a_x, a_y, a_z) with
  // a_z = -a_x - a_y before the addition.
  static PaulTrap from_rotated_dc(Real a_x, Real a_y, Real a_prime, Real theta, Real q) {
    PaulTrap t;
    t.a_x = a_x;
    t.a_y = a_y - a_prime * std::cos(2.0 * theta);
    // a_z picks up +a' cos(2 theta); with a_z derived, that means a_x + a_y
    // must absorb the shift, which the a_y update above does.
    t.a_yz = a_prime * std::sin(2.0 * theta);
    t.q = q;
    return t;
  }

  bool operator==(const PaulTrap&) const = default;
};

}  // namespace kinklab
