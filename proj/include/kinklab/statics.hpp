#pragma once

#include <cstdint>
#include <optional>

#include "kinklab/critical_point.hpp"
#include "kinklab/trap.hpp"

namespace kinklab {

inline constexpr Real kDefaultZeroThreshold = 1e-8;
inline constexpr Real kDefaultGradTol = 1e-10;
inline constexpr Real kSymmetryMatchTol = 1e-6;

// Friction linearly decayed from `friction` to zero over `duration`
// (nondimensional time; the default is 2000 axial periods), then coasting
// until the kinetic-energy exit test fires.
struct DampingSchedule {
  Real friction = 0.5;
  Real duration = 2000.0 * 2.0 * constants::pi;
  Real kinetic_exit = 1e-12;   // total kinetic energy threshold
  Real grad_exit = 1e-4;       // early exit also requires |grad| below this
  Real max_duration_factor = 4.0;

  Real friction_at(Real t) const {
    return t >= duration ? 0.0 : friction * (1.0 - t / duration);
  }
};

// Spectrum, index, stability and symmetry bookkeeping for a configuration
// whose gradient already vanishes to tolerance.
CriticalPoint classify(const Configuration& config, const PseudoTrap& trap,
                       Real zero_threshold = kDefaultZeroThreshold);

// Newton refinement to a critical point of any index. Quadratically
// convergent near the solution; throws ConvergenceError on divergence.
struct NewtonOptions {
  Real grad_tol = kDefaultGradTol;
  int max_iterations = 80;
  // Per-iteration displacement clamp in units of the lattice spacing.
  Real max_step_factor = 0.45;
  Real zero_threshold = kDefaultZeroThreshold;
};
CriticalPoint newton_critical(const Configuration& seed, const PseudoTrap& trap,
                              const NewtonOptions& opts = {});

// Damped-dynamics relaxation (friction adiabatically turned off) followed by
// Newton refinement. Returns a local minimum, or flags drifted_to_saddle.
struct RelaxOptions {
  DampingSchedule schedule;
  Real timestep = 0.0;  // 0: choose from the stiffness bound
  NewtonOptions newton;
  // Optional per-ion pin: listed (ion, axis) coordinates are frozen during
  // the damped stage (used to hold a kink at an off-center site).
  std::vector<std::pair<Index, int>> pinned;
};
CriticalPoint relax(const Configuration& seed, const PseudoTrap& trap,
                    const RelaxOptions& opts = {});

// Deterministic seed construction.
struct SeedSpec {
  enum class Kind {
    Chain,
    Zigzag,
    OddKink,
    ExtendedKinkSeed,
    TwoKink,
    DisplacedKink,
    DarkIon,
  };
  Kind kind = Kind::Chain;
  Index n_ions = 0;
  // DisplacedKink: kink boundary offset in sites from the centre.
  int offset = 0;
  // TwoKink: flipped-block width in sites (the seed separation).
  int separation = 2;
  // DarkIon: axially-sorted site index that carries `dark`, on top of `base`.
  Index dark_index = 0;
  IonSpecies dark = IonSpecies::reference();
  Kind base = Kind::Zigzag;
  // Optional radial noise amplitude (requires noise_seed), e.g. for chain
  // relaxation tests.
  Real noise = 0.0;
  std::uint64_t noise_seed = 0;

  static SeedSpec chain(Index n) { return {Kind::Chain, n}; }
  static SeedSpec zigzag(Index n) { return {Kind::Zigzag, n}; }
  static SeedSpec odd_kink(Index n) { return {Kind::OddKink, n}; }
  static SeedSpec extended_kink(Index n) { return {Kind::ExtendedKinkSeed, n}; }
  static SeedSpec two_kink(Index n, int separation) {
    SeedSpec s{Kind::TwoKink, n};
    s.separation = separation;
    return s;
  }
  static SeedSpec displaced_kink(Index n, int offset) {
    SeedSpec s{Kind::DisplacedKink, n};
    s.offset = offset;
    return s;
  }
  static SeedSpec dark_ion(Index n, Index index, IonSpecies species,
                           Kind base = Kind::Zigzag) {
    SeedSpec s{Kind::DarkIon, n};
    s.dark_index = index;
    s.dark = species;
    s.base = base;
    return s;
  }
};

// Builds the seed configuration for `spec` in `trap`. Kink seeds embed a
// relaxed zigzag with the radial coordinates of the ions past the boundary
// flipped; for an odd ion count the centre ion is placed on the axis so the
// boundary bisects the crystal. Deterministic for fixed inputs.
Configuration make_seed(const SeedSpec& spec, const PseudoTrap& trap,
                        DofMask mask = DofMask::full());

// Axial-order index of the flip boundary for the kink at `offset` sites from
// the centre (ions at order index >= boundary are flipped). Shared by the
// seeding rule and the site bookkeeping.
Index kink_boundary_index(Index n_ions, int offset);

// Axial position of that boundary in a given reference configuration.
Real kink_site_position(const Configuration& reference, int offset);

// Axial position of the kink as the domain wall of the zigzag alternation
// pattern (ions near the axis, e.g. blurred-kink cores, are ignored).
Real domain_wall_position(const Configuration& config);

// 1-D chain equilibrium along x (always exists; used by make_seed and by the
// chain-branch continuations).
Configuration chain_equilibrium(Index n_ions, DofMask mask = DofMask::full());

// gamma_y at which radial chain mode k (0 = softest-to-cross, i.e. the zigzag
// mode) crosses zero, plus the mode vector over ions. The chain's radial
// eigenvalues are gamma_y - c_k with c_k independent of gamma_y.
std::pair<Real, Vec> chain_radial_crossing(const Configuration& chain, int k = 0);

}  // namespace kinklab
