#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "kinklab/floquet.hpp"
#include "kinklab/imaging.hpp"
#include "kinklab/species.hpp"
#include "kinklab/trap.hpp"
#include "kinklab/types.hpp"

namespace kinklab {

// One camera frame of extracted ion coordinates, in meters, centred either on
// the frame's own bright-ion centre of mass or on an externally supplied trap
// centre (dark-ion frames).
// What structure the frame shows; the forward model seeds accordingly.
enum class FrameKind { Zigzag, OddKink };

struct Observation {
  Points2 points;  // N_bright x 2, camera-plane coordinates (m)
  enum class Centering { BrightCom, TrapCenter };
  Centering centering = Centering::BrightCom;
  FrameKind kind = FrameKind::Zigzag;
  std::string label;

  Index n_ions() const { return points.rows(); }
  void validate() const;
};

// The six free parameters of the Appendix-A fit.
struct FitParams {
  Real a_x = 0.0, a_y = 0.0, a_yz = 0.0, q = 0.0;
  Real azimuth_deg = 0.0, elevation_deg = 0.0;

  PaulTrap trap() const { return {a_x, a_y, a_yz, q}; }
  Vec to_vec() const;
  static FitParams from_vec(const Vec& v);
  static constexpr std::array<const char*, 6> names{"a_x", "a_y", "a_yz", "q",
                                                    "azimuth_deg", "elevation_deg"};
};

struct FitOptions {
  // Experimental constants (define the physical length scale).
  Real Omega_rf = 0.0;   // rad/s
  Real mass_kg = 0.0;
  Real charge_C = constants::elementary_charge;
  // Parameter freezing and box bounds (default: angles within +-20 deg of the
  // guess, Mathieu parameters within a factor of 3).
  std::array<bool, 6> freeze{};
  std::optional<Vec> lower, upper;
  int max_iterations = 150;
  Real penalty = 1e6;  // residual magnitude when no equilibrium exists (m)
};

struct FitResult {
  FitParams params;
  std::vector<Vec> residuals;   // per frame, per-ion distances (m)
  Real mean_residual = 0.0;     // over all ions of all frames (m)
  Real max_residual = 0.0;
  Real objective = 0.0;         // sum of squared distances (m^2)
  bool converged = false;
  int iterations = 0;
  int n_evaluations = 0;
  // Secular frequencies of the fitted parameters (core_model Floquet), Hz.
  std::array<Real, 3> secular_freq_hz{};
  Real secular_ratio = 0.0;
};

// Appendix-A least-squares fit: equilibrium crystal at trial Mathieu
// parameters (pseudopotential derived from the Floquet analysis), projected
// through the trial camera, matched to the observation by minimum-cost
// assignment, minimized over the 6 parameters with Levenberg-Marquardt.
// Multiple frames share all parameters.
FitResult fit(const std::vector<Observation>& observations, const FitParams& guess,
              const FitOptions& options);

// Dark-ion hypothesis scan at fixed trap/camera parameters: places one dark
// ion of trial mass at each candidate site, matches bright ions only, and
// returns the best placement with the residual-vs-mass curve (the minimal
// mass consistent with the threshold gives the "at least" bound). The
// winning hypothesis is re-verified in the full time-dependent Paul
// potential (time-averaged positions).
struct DarkIonHypothesis {
  Index site = 0;      // axially sorted site index of the dark ion
  Real mass_ratio = 0.0;
  Real mean_residual = 0.0;  // bright-ion match (m)
};
struct DarkIonFitResult {
  DarkIonHypothesis best;
  Real minimal_mass_ratio = 0.0;  // smallest trial mass with residual < threshold
  std::vector<DarkIonHypothesis> scan;  // all evaluated hypotheses
  Real paul_verified_residual = -1.0;   // -1 if verification skipped/failed
  bool converged = false;
};
struct DarkIonFitOptions {
  FitOptions fit;  // carries the experimental constants and fitted params context
  Real residual_threshold = 0.5e-6;  // m
  std::vector<Index> candidate_sites;  // empty: all sites
  bool paul_verify = true;
};
DarkIonFitResult dark_ion_hypothesis_fit(const Observation& observation, Index total_ions,
                                         const FitParams& fitted,
                                         const std::vector<Real>& mass_ratios,
                                         const DarkIonFitOptions& options);

// Forward model shared by fit() and the synthetic-data generators in the
// tests: equilibrium ion positions (meters, lab frame, centred per the
// observation convention) for N ions at the given parameters. A dark ion at
// `dark_site` with `dark_mass` is included but reported separately.
struct ModelCrystal {
  Points2 projected;          // bright ions only, after centering
  Coords lab_positions_m;     // all ions, lab frame, meters
  SecularModes secular;
};
ModelCrystal model_crystal(const FitParams& params, Index n_ions, const FitOptions& options,
                           std::optional<Index> dark_site = std::nullopt, Real dark_mass = 1.0,
                           Observation::Centering centering = Observation::Centering::BrightCom,
                           FrameKind kind = FrameKind::Zigzag);

}  // namespace kinklab
