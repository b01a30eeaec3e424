#pragma once

#include <vector>

#include "kinklab/configuration.hpp"
#include "kinklab/types.hpp"

namespace kinklab {

// Invariance of the configuration, as a set of ions, under the inversion
// operations of the potential (ions are indistinguishable within a species).
struct SymmetryFlags {
  bool sym_x = false;
  bool sym_y = false;
  bool sym_z = false;
  bool sym_xy_combined = false;

  bool operator==(const SymmetryFlags&) const = default;
};

struct CriticalPoint {
  Configuration config;
  Real energy = 0.0;
  Real grad_norm = 0.0;
  Vec eigenvalues;         // Hessian spectrum over active DOF, ascending
  int n_negative = 0;      // eigenvalues below -zero_threshold
  int local_index = 0;     // (-1)^n_negative, 0 when at_bifurcation
  bool stable = false;     // n_negative == 0 and not at_bifurcation
  bool at_bifurcation = false;  // some |eigenvalue| < zero_threshold
  SymmetryFlags symmetry;
  Real zero_threshold = 0.0;
  // Set by relax when the seed drifted to a saddle instead of a minimum.
  bool drifted_to_saddle = false;

  Real min_eigenvalue() const { return eigenvalues.size() ? eigenvalues[0] : 0.0; }
};

}  // namespace kinklab
