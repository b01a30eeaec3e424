#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kinklab/continuation.hpp"
#include "kinklab/critical_point.hpp"
#include "kinklab/statics.hpp"
#include "kinklab/units.hpp"

namespace kinklab {

// Peierls-Nabarro landscape: per-site kink minima and the saddle barriers
// between adjacent sites, relative to the zigzag ground state. "Site" means
// the kink-boundary index of the seeding rule, not a continuous position.
struct PNSite {
  int offset = 0;
  bool exists = false;
  bool stable = false;
  Real energy = 0.0;  // E(site) - E(zigzag), when exists
  std::optional<CriticalPoint> point;
};

struct PNBarrier {
  int site_lo = 0;  // between site_lo and site_lo + 1
  Real saddle_energy = 0.0;  // E(saddle) - E(zigzag)
  int n_negative = 1;
  std::optional<CriticalPoint> point;
};

struct PNLandscape {
  PseudoTrap trap;
  Index n_ions = 0;
  std::string kink_type;
  Real ground_energy = 0.0;  // zigzag global-minimum energy (absolute)
  CriticalPoint ground;
  std::vector<PNSite> sites;       // ascending offset
  std::vector<PNBarrier> barriers;

  const PNSite* site(int offset) const;
  // Energies in units of k_B T_D when a unit system with T_D is attached.
  std::optional<UnitSystem> units;
  Real to_doppler_units(Real energy_nd) const;
};

struct PNOptions {
  int max_offset = 2;
  SeedSpec::Kind kink_kind = SeedSpec::Kind::OddKink;
  DofMask mask = DofMask::planar_xy();
  RelaxOptions relax;
  std::optional<UnitSystem> units;
  // Concurrent site/separation searches (results merged in offset order).
  int jobs = 1;
};

PNLandscape pn_extract(const PseudoTrap& trap, Index n_ions, const PNOptions& opts = {});

// E(centred kink) - E(zigzag). Throws if the kink is unstable or missing.
Real kink_rest_energy(const PseudoTrap& trap, Index n_ions, const PNOptions& opts = {});

// Two-kink energies and the annihilation barrier.
struct TwoKinkSeparation {
  int separation = 0;     // seed block width in sites
  bool exists = false;    // unconstrained stable state at (about) this separation
  Real energy = 0.0;      // E(two-kink) - E(zigzag)
  Real interaction = 0.0; // energy - 2 E_kink(centre)
  Real measured_separation = 0.0;  // kink-position split in site units
  std::optional<CriticalPoint> point;
};
struct TwoKinkAnalysis {
  std::vector<TwoKinkSeparation> separations;
  Real kink_energy = 0.0;  // single centred kink
  // Barrier of the symmetric collision channel between the minimal stable
  // two-kink state and the zigzag (the transition configuration has one
  // symmetric unstable direction plus, at near-degenerate radial trapping,
  // an antisymmetric one; n_negative records what was found).
  Real annihilation_barrier = 0.0;
  int barrier_n_negative = 0;
  std::optional<CriticalPoint> barrier_point;
  // Lowest index-1 saddle connecting the same pair, when distinct.
  std::optional<Real> asymmetric_channel_barrier;
  // (separation, E - E_zigzag) sampled along the annihilation path from the
  // stable pair up to the barrier: the adiabatic repulsion curve as the two
  // kinks approach below their stable spacing.
  std::vector<std::pair<Real, Real>> approach_curve;
  std::optional<UnitSystem> units;
  Real barrier_in_doppler_units() const;
};
TwoKinkAnalysis two_kink_analysis(const PseudoTrap& trap, Index n_ions,
                                  const std::vector<int>& separations,
                                  const PNOptions& opts = {});

// Landscape bifurcation study against a continuously varying defect mass:
// traces the dark-ion configuration over mass_ratio and reports the defect
// ion's radial displacement relative to the bright ions' radial extent.
struct MassDefectSample {
  Real mass_ratio = 0.0;
  bool stable = false;
  Real dark_radial_displacement = 0.0;  // sqrt(y^2 + z^2) of the dark ion
  Real bright_radial_extent = 0.0;      // max over bright ions
  Real kink_energy = 0.0;               // vs the all-bright ground state energy
};
struct MassDefectLandscape {
  Branch branch;
  std::vector<MassDefectSample> samples;
};
MassDefectLandscape mass_defect_landscape(const PseudoTrap& trap, Index n_ions, Index dark_site,
                                          Real mass_from, Real mass_to, Real step,
                                          SeedSpec::Kind base = SeedSpec::Kind::Zigzag,
                                          DofMask mask = DofMask::full());

// String-method bracket of the transition state between two configurations,
// followed by Newton refinement of the maximum-energy image. Used for the
// two-kink annihilation barrier and as a fallback for PN saddles.
struct StringOptions {
  int n_images = 28;
  int iterations = 1200;
  Real step = 2e-3;
};
CriticalPoint string_saddle(const Configuration& a, const Configuration& b,
                            const PseudoTrap& trap, const StringOptions& opts = {},
                            const NewtonOptions& newton = {});

// The converged string itself (equal-arclength images from a to b).
std::vector<Coords> string_path(const Configuration& a, const Configuration& b,
                                const PseudoTrap& trap, const StringOptions& opts = {});

}  // namespace kinklab
