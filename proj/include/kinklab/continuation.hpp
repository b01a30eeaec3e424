#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kinklab/critical_point.hpp"
#include "kinklab/statics.hpp"
#include "kinklab/trap.hpp"

namespace kinklab {

// The one trap/model parameter a branch is traced against. RatioZY holds
// gamma_y fixed and sets gamma_z = gamma_y * ratio^2; MassRatio varies the
// mass of the species at one axially-sorted site.
struct Parameter {
  enum class Kind { GammaY, RatioZY, MassRatio };
  Kind kind = Kind::GammaY;
  Real gamma_y_fixed = 0.0;   // RatioZY: the fixed gamma_y
  Real ratio_fixed = 0.0;     // GammaY with 3-D dof: gamma_z = gamma_y * ratio^2 (0: keep trap's)
  Index species_site = -1;    // MassRatio: axially-sorted site index

  static Parameter gamma_y() { return {Kind::GammaY}; }
  static Parameter gamma_y_at_ratio(Real ratio) {
    Parameter p{Kind::GammaY};
    p.ratio_fixed = ratio;
    return p;
  }
  static Parameter ratio_zy(Real gamma_y) {
    Parameter p{Kind::RatioZY};
    p.gamma_y_fixed = gamma_y;
    return p;
  }
  static Parameter mass_ratio(Index site) {
    Parameter p{Kind::MassRatio};
    p.species_site = site;
    return p;
  }

  std::string name() const;
  // Trap/configuration at parameter value v, starting from the template.
  void apply(Real v, PseudoTrap& trap, Configuration& config) const;
};

enum class BifurcationKind { Pitchfork, SaddleNode, Unclassified };

struct BifurcationEvent {
  Real parameter = 0.0;          // bracketed crossing / fold location
  Real bracket_width = 0.0;
  Vec soft_mode;                 // active-DOF eigenvector of the vanishing eigenvalue
  // Negative-eigenvalue counts just left/right of the event (-1 on the side
  // where the branch does not exist, i.e. past a fold).
  int n_negative_left = 0;
  int n_negative_right = 0;
  BifurcationKind kind = BifurcationKind::Unclassified;
  bool two_mode = false;         // more than one eigenvalue crossed within min step
  // Soft-mode parity under the parent's symmetry operations (odd entries
  // predict which inversion symmetries the children break).
  SymmetryFlags soft_mode_odd;
  // Representative parent configurations just left/right of the event.
  std::optional<Configuration> parent_left;
  std::optional<Configuration> parent_right;
};

struct BranchSample {
  Real parameter = 0.0;
  CriticalPoint point;
};

struct Branch {
  std::string parameter_name;
  std::vector<BranchSample> samples;  // in traversal order
  std::vector<BifurcationEvent> events;
  bool terminated_at_fold = false;
  std::string termination;

  const BranchSample& front() const { return samples.front(); }
  const BranchSample& back() const { return samples.back(); }
};

struct StepControl {
  Real initial_step = 0.5;        // in parameter units (0.002 for ratio sweeps)
  Real min_step = 1e-7;
  // Per-ion continuity bound in units of the lattice spacing. Branch jumps
  // between adjacent PN sites move ions by about half a spacing, so the
  // bound must sit well below that.
  Real max_displacement = 0.2;
  Real bracket_tol = 1e-6;        // parameter precision for eigenvalue crossings
  Real fold_tol = 1e-5;           // parameter precision for folds
  NewtonOptions newton;
};

// Predictor-corrector continuation of one critical point against one
// parameter. Every change of n_negative is bracketed by bisection and
// recorded; when the corrector fails irrecoverably while the smallest
// eigenvalue heads to zero, the endpoint is refined and recorded as a fold.
Branch trace_branch(const CriticalPoint& start, const PseudoTrap& trap, const Parameter& param,
                    Real from, Real to, const StepControl& ctl = {});

// Seeds new branches just past an event from parent +- epsilon * soft mode
// (epsilon in units of the lattice spacing). Distinct converged critical
// points, deduplicated against the parent and each other, are returned as
// one-sample branches at the given side's parameter value.
struct BranchSwitchResult {
  std::vector<Branch> branches;
  bool unresolved = false;  // every perturbed seed fell back to the parent
};
BranchSwitchResult branch_switch(const BifurcationEvent& event, const PseudoTrap& trap,
                                 const Parameter& param, Real epsilon = 0.05,
                                 const StepControl& ctl = {});

// Traces every seed of a family and collects the fold (saddle-node) events.
std::vector<BifurcationEvent> saddle_node_scan(const std::vector<CriticalPoint>& seeds,
                                               const PseudoTrap& trap, const Parameter& param,
                                               Real from, Real to, const StepControl& ctl = {});

// Topological index audit: sum of local indices over the enumerated branches
// on each side of the event.
struct IndexAudit {
  int sum_left = 0;
  int sum_right = 0;
  int branches_left = 0;
  int branches_right = 0;
  bool balanced = false;
  std::string note;
};
IndexAudit index_audit(const BifurcationEvent& event, const std::vector<Branch>& branches,
                       const PseudoTrap& trap, const Parameter& param, Real delta,
                       const StepControl& ctl = {});

// Max per-ion displacement under the optimal species-aware permutation.
// Mirror-image solutions compare as distinct (ion labels are arbitrary,
// inversions are not).
Real matched_distance(const Configuration& a, const Configuration& b);

// Min of matched_distance over the inversion group; identifies symmetry
// images of the same solution orbit.
Real symmetry_reduced_distance(const Configuration& a, const Configuration& b);

}  // namespace kinklab
