#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kinklab/critical_point.hpp"
#include "kinklab/statics.hpp"
#include "kinklab/trap.hpp"

namespace kinklab {

// Linearized normal modes at a critical point. For mixed species the
// mass-weighted Hessian M^{-1/2} K M^{-1/2} is diagonalized; for identical
// masses this is the plain Hessian. mode_matrix columns are orthonormal in
// the mass-weighted coordinates, i.e. R = R0 + M^{-1/2} D Theta.
struct ModeSpectrum {
  Vec lambdas;       // eigenvalues, ascending
  Vec frequencies;   // sign(lambda) sqrt(|lambda|)
  Mat mode_matrix;   // n_dof x n_dof, columns are modes
  Vec localization;  // participation ratio per mode, in ions (1..N)
  Index n_ions = 0;
  int n_active_axes = 3;

  // Lowest localized mode (participation < N/4), when present.
  std::optional<Index> low_mode_index;
  Real omega_low() const { return low_mode_index ? frequencies[*low_mode_index] : 0.0; }

  bool is_localized(Index mode) const {
    return localization[mode] < Real(n_ions) / 4.0;
  }
  // Per-ion weight distribution of one mode.
  Vec ion_weights(Index mode) const;
};

ModeSpectrum normal_modes(const CriticalPoint& cp, const PseudoTrap& trap);

// Mode coordinates Theta = D^T M^{1/2} (R - R0) and their velocities for a
// batch of states near the reference configuration.
struct ModeCoordinates {
  Mat theta;      // n_samples x n_modes
  Mat theta_dot;  // n_samples x n_modes
};
ModeCoordinates mode_coordinates(const std::vector<Coords>& positions,
                                 const std::vector<Coords>& velocities,
                                 const ModeSpectrum& spectrum, const Configuration& reference);

// Reconstruct R0 + M^{-1/2} D Theta for one sample.
Coords reconstruct(const Vec& theta, const ModeSpectrum& spectrum,
                   const Configuration& reference);

// omega_low vs the radial indegeneracy omega_z/omega_y at fixed gamma_y,
// tracking the kink's localized mode by eigenvector overlap across the sweep.
struct OmegaLowSample {
  Real ratio = 0.0;
  Real omega_low = 0.0;  // sign(lambda) sqrt(|lambda|) of the tracked mode
  Real participation = 0.0;
  bool stable = false;  // whole configuration stable at this ratio
};
struct OmegaLowCurve {
  std::vector<OmegaLowSample> samples;  // ascending in ratio
  bool truncated_low = false;           // kink lost before range start
  bool truncated_high = false;
  std::string truncation_reason;
};
OmegaLowCurve omega_low_curve(const CriticalPoint& kink, Real gamma_y, Real ratio_ref,
                              Real ratio_from, Real ratio_to, Real ratio_step,
                              const NewtonOptions& opts = {});

}  // namespace kinklab
