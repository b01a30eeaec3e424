#pragma once

#include <array>
#include <string>
#include <vector>

#include "kinklab/species.hpp"
#include "kinklab/trap.hpp"
#include "kinklab/types.hpp"
#include "kinklab/units.hpp"

namespace kinklab {

// Which coordinate axes carry degrees of freedom. Masked axes are pinned to
// exactly zero; the Hessian and the equations of motion are restricted to the
// active axes (this reproduces the planar 2N-dimensional problem exactly,
// rather than approximating it with a stiff gamma_z).
struct DofMask {
  std::array<bool, 3> active{true, true, true};

  static DofMask full() { return {{true, true, true}}; }
  static DofMask planar_xy() { return {{true, true, false}}; }
  static DofMask axial_x() { return {{true, false, false}}; }

  int n_active_axes() const { return int(active[0]) + int(active[1]) + int(active[2]); }
  bool operator==(const DofMask&) const = default;
};

// State on which everything operates: N nondimensional ion positions plus the
// per-ion species and the DOF mask.
struct Configuration {
  Coords positions;  // N x 3
  std::vector<IonSpecies> species;
  DofMask dof_mask = DofMask::full();

  Index n_ions() const { return positions.rows(); }
  int n_dof() const { return int(n_ions()) * dof_mask.n_active_axes(); }

  static Configuration uniform(const Coords& positions, DofMask mask = DofMask::full());

  // Zero out masked coordinates (enforces the invariant after edits).
  void apply_mask();
  // Throws InvalidArgumentError / SingularGeometryError on broken invariants.
  void validate() const;

  // Flatten active coordinates to a vector of length n_dof() (ion-major,
  // active axes in x,y,z order) and back.
  Vec active_coords() const;
  void set_active_coords(const Vec& v);

  // Scatter a flat active-DOF vector into an N x 3 block (masked axes zero).
  Coords expand(const Vec& v) const;

  Real min_pair_distance() const;
  // Median axial nearest-neighbour distance; the "lattice spacing" used for
  // continuation step bounds and kink-position bookkeeping.
  Real lattice_spacing() const;
  // Indices sorted by x coordinate.
  std::vector<Index> axial_order() const;

  bool all_reference_species() const;
  bool operator==(const Configuration&) const = default;
};

// CSV with columns: index,x,y,z,mass_ratio,charge_ratio,bright
std::string to_csv(const Configuration& c);
Configuration configuration_from_csv(const std::string& csv);

}  // namespace kinklab
