#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "kinklab/critical_point.hpp"
#include "kinklab/modes.hpp"
#include "kinklab/statics.hpp"
#include "kinklab/trap.hpp"
#include "kinklab/units.hpp"

namespace kinklab {

struct State {
  Coords positions;   // N x 3
  Coords velocities;  // N x 3
  Real time = 0.0;
};

struct Trajectory {
  std::vector<Real> times;
  std::vector<Coords> positions;
  std::vector<Coords> velocities;
  // Total energy at the sampled times. For pseudopotential runs without
  // damping this is the conserved quantity; for Paul runs it is V(t) + T.
  std::vector<Real> energies;
  Real timestep = 0.0;
  int stride = 1;
  std::string scheme = "velocity-verlet";
  State final_state;

  Index n_samples() const { return Index(times.size()); }
  // |mean(E) over last sample period - mean over first| / max(|E0|, 1e-30),
  // with `window` samples per mean.
  Real energy_drift(Index window = 16) const;
};

using TrapModel = std::variant<PseudoTrap, PaulTrap>;

struct IntegrateOptions {
  Real timestep = 0.0;  // 0: default (pseudo: 2pi/(50 w_max); Paul: pi/400)
  int stride = 1;       // store every stride-th step
  Real damping = 0.0;   // constant friction coefficient
  bool record_energy = true;
};

// Second-order symplectic (velocity-Verlet) integration; the force is
// re-evaluated at both substeps, which handles the explicit time dependence
// of the Paul potential. Masses enter as F/mu per ion. With damping > 0 a
// -gamma*v friction term is added (the integrator statics.relax uses).
Trajectory integrate(const State& initial, const Configuration& reference, const TrapModel& trap,
                     Real duration, const IntegrateOptions& opts = {});

// Initial condition exciting a single normal mode with (harmonic-estimate)
// energy E: R = R0 + sqrt(2E)/omega_j * M^{-1/2} D_j, zero velocity. The true
// potential energy differs at large amplitude by the anharmonicity.
State excite_mode(const CriticalPoint& cp, const ModeSpectrum& spectrum, Index mode, Real energy);

// Thermal state: every stable mode receives an exponentially distributed
// energy (mean k_B T) and a uniform phase. Deterministic for a fixed seed.
State thermal_state(const CriticalPoint& cp, const ModeSpectrum& spectrum,
                    const UnitSystem& units, Real temperature_K, std::uint64_t seed);

// Zero-temperature release of a kink displaced `offset` sites off centre.
// If no displaced-kink minimum exists (globally trapping PN landscape), the
// start is prepared by a short strong quench of the displaced seed - the
// fast local coordinates settle while the slow kink coordinate stays put -
// and then released from rest.
struct ReleaseResult {
  Trajectory trajectory;
  Configuration start;
  bool quenched_start = false;
  std::vector<Real> kink_positions;  // kink-position estimate per sample
};
ReleaseResult release_displaced_kink(const PseudoTrap& trap, Index n_ions, int offset,
                                     Real duration, const IntegrateOptions& opts = {});

// Kink-position estimate: centre of the axial compression excess around the
// most-compressed zigzag bond.
Real kink_position(const Configuration& config);
Real kink_position(const Coords& positions);

// Time-averaged ion positions on the damped limit cycle of the full
// time-dependent Paul potential: damped integration from the seed until the
// micromotion orbit is reached, then an average over whole rf periods.
Coords paul_time_averaged_equilibrium(const Configuration& seed, const PaulTrap& trap,
                                      Real damp_periods = 600.0, Real average_periods = 4.0,
                                      Real friction = 0.1);

// Amplitude, spectral fundamental, and a circle-deviation metric for a
// single-mode-dominated trajectory segment. Throws if the mode carries less
// than half the linearized energy.
struct AnharmonicityReport {
  Real amplitude = 0.0;         // max |Theta_j|
  Real fundamental = 0.0;       // spectral peak of Theta_j(t)
  Real ellipse_deviation = 0.0; // RMS radial scatter of the (Theta, Theta_dot/omega) orbit
  Real energy_share = 0.0;
};
AnharmonicityReport anharmonicity_report(const Trajectory& traj, const ModeSpectrum& spectrum,
                                         const Configuration& reference, Index mode);

}  // namespace kinklab
