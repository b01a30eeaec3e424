#include "kinklab/continuation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "kinklab/assignment.hpp"
#include "kinklab/errors.hpp"
#include "kinklab/potential.hpp"

namespace kinklab {

std::string Parameter::name() const {
  switch (kind) {
    case Kind::GammaY: return "gamma_y";
    case Kind::RatioZY: return "ratio_zy";
    case Kind::MassRatio: return "mass_ratio";
  }
  return "?";
}

void Parameter::apply(Real v, PseudoTrap& trap, Configuration& config) const {
  switch (kind) {
    case Kind::GammaY:
      trap.gamma_y = v;
      if (ratio_fixed > 0.0) trap.gamma_z = v * ratio_fixed * ratio_fixed;
      break;
    case Kind::RatioZY:
      trap.gamma_y = gamma_y_fixed;
      trap.gamma_z = gamma_y_fixed * v * v;
      break;
    case Kind::MassRatio: {
      if (species_site < 0 || species_site >= config.n_ions())
        throw InvalidArgumentError("Parameter::apply: species site out of range");
      const Index ion = config.axial_order()[size_t(species_site)];
      config.species[size_t(ion)].mass_ratio = v;
      break;
    }
  }
}

namespace {

Real matched_distance_signed(const Configuration& a, const Configuration& b, Real sx, Real sy,
                             Real sz) {
  const Index n = a.n_ions();
  Mat cost(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      Vec3 p = b.positions.row(i);
      p[0] *= sx;
      p[1] *= sy;
      p[2] *= sz;
      Real d2 = (p.transpose() - a.positions.row(j)).squaredNorm();
      if (!(b.species[size_t(i)] == a.species[size_t(j)])) d2 += 1e6;
      cost(i, j) = d2;
    }
  const std::vector<int> match = min_cost_assignment(cost);
  Real worst = 0.0;
  for (Index i = 0; i < n; ++i) worst = std::max(worst, std::sqrt(cost(i, match[size_t(i)])));
  return worst;
}

}  // namespace

Real matched_distance(const Configuration& a, const Configuration& b) {
  if (a.n_ions() != b.n_ions()) return std::numeric_limits<Real>::infinity();
  return matched_distance_signed(a, b, 1.0, 1.0, 1.0);
}

Real symmetry_reduced_distance(const Configuration& a, const Configuration& b) {
  if (a.n_ions() != b.n_ions()) return std::numeric_limits<Real>::infinity();
  Real best = std::numeric_limits<Real>::infinity();
  for (int op = 0; op < 8; ++op)
    best = std::min(best, matched_distance_signed(a, b, (op & 1) ? -1.0 : 1.0,
                                                  (op & 2) ? -1.0 : 1.0, (op & 4) ? -1.0 : 1.0));
  return best;
}

namespace {

struct Corrected {
  CriticalPoint cp;
  Real displacement = 0.0;
  bool ok = false;
};

Corrected correct_at(const Configuration& predictor, const PseudoTrap& trap_template,
                     const Parameter& param, Real value, const StepControl& ctl) {
  Corrected out;
  PseudoTrap trap = trap_template;
  Configuration seed = predictor;
  param.apply(value, trap, seed);
  try {
    out.cp = newton_critical(seed, trap, ctl.newton);
  } catch (const ConvergenceError&) {
    return out;
  } catch (const SingularGeometryError&) {
    return out;
  }
  out.displacement =
      (out.cp.config.positions - predictor.positions).rowwise().norm().maxCoeff();
  out.ok = true;
  return out;
}

// Parity of the soft mode under the inversion ops that leave the parent
// configuration invariant. Ion labels are arbitrary, so the permutation that
// realizes the symmetry is recovered by nearest-neighbour pairing of the
// transformed positions first.
SymmetryFlags soft_mode_parity(const Configuration& parent, const Vec& mode) {
  const Index n = parent.n_ions();
  const int na = parent.dof_mask.n_active_axes();
  int axes[3], naxes = 0;
  for (int a = 0; a < 3; ++a)
    if (parent.dof_mask.active[a]) axes[naxes++] = a;

  auto odd_under = [&](bool fx, bool fy, bool fz) {
    // permutation: transformed ion i matches original ion perm[i]
    std::vector<Index> perm(static_cast<size_t>(n), Index(0));
    for (Index i = 0; i < n; ++i) {
      Vec3 p = parent.positions.row(i);
      if (fx) p[0] *= -1.0;
      if (fy) p[1] *= -1.0;
      if (fz) p[2] *= -1.0;
      Real best = std::numeric_limits<Real>::infinity();
      Index jbest = 0;
      for (Index j = 0; j < n; ++j) {
        const Real d = (p.transpose() - parent.positions.row(j)).norm();
        if (d < best) {
          best = d;
          jbest = j;
        }
      }
      if (best > 10.0 * kSymmetryMatchTol) return false;  // op not a symmetry of the parent
      perm[size_t(i)] = jbest;
    }
    // Transformed mode: component a of ion i lands on ion perm[i] with the
    // axis sign flips applied.
    Vec tm(mode.size());
    for (Index i = 0; i < n; ++i)
      for (int k = 0; k < naxes; ++k) {
        Real s = 1.0;
        if (axes[k] == 0 && fx) s = -1.0;
        if (axes[k] == 1 && fy) s = -1.0;
        if (axes[k] == 2 && fz) s = -1.0;
        tm[perm[size_t(i)] * na + k] = s * mode[i * na + k];
      }
    return (tm + mode).norm() < 1e-4 * mode.norm();  // tm == -mode
  };

  SymmetryFlags f;
  f.sym_x = odd_under(true, false, false);
  f.sym_y = odd_under(false, true, false);
  f.sym_z = odd_under(false, false, true);
  f.sym_xy_combined = odd_under(true, true, false);
  return f;
}

Vec smallest_eigenvector(const CriticalPoint& cp, const PseudoTrap& trap_template,
                         const Parameter& param, Real value) {
  PseudoTrap trap = trap_template;
  Configuration c = cp.config;
  param.apply(value, trap, c);
  const Mat k = hessian(c, trap);
  Eigen::SelfAdjointEigenSolver<Mat> es(k);
  Index imin = 0;
  es.eigenvalues().cwiseAbs().minCoeff(&imin);
  return es.eigenvectors().col(imin);
}

}  // namespace

Branch trace_branch(const CriticalPoint& start, const PseudoTrap& trap, const Parameter& param,
                    Real from, Real to, const StepControl& ctl) {
  Branch branch;
  branch.parameter_name = param.name();
  const Real dir = to >= from ? 1.0 : -1.0;

  // Converge the start point at `from`.
  Corrected cur = correct_at(start.config, trap, param, from, ctl);
  if (!cur.ok) throw ConvergenceError("trace_branch: start point did not converge");
  branch.samples.push_back({from, cur.cp});

  Real p = from;
  Real step = dir * std::abs(ctl.initial_step);

  while (dir * (to - p) > 1e-12) {
    Real p_next = p + step;
    if (dir * (p_next - to) > 0.0) p_next = to;

    const Real spacing = branch.back().point.config.lattice_spacing();
    Corrected next = correct_at(branch.back().point.config, trap, param, p_next, ctl);
    const bool continuous = next.ok && next.displacement < ctl.max_displacement * spacing;

    if (!continuous) {
      if (std::abs(step) > ctl.min_step) {
        step *= 0.5;
        continue;
      }
      // Corrector fails at the minimal step: a fold if the smallest
      // eigenvalue was heading to zero. Refine the endpoint by bisection on
      // branch-continuation success.
      Real lo = p, hi = p_next;
      Configuration last_good = branch.back().point.config;
      CriticalPoint last_cp = branch.back().point;
      while (std::abs(hi - lo) > ctl.fold_tol) {
        const Real mid = 0.5 * (lo + hi);
        Corrected m = correct_at(last_good, trap, param, mid, ctl);
        if (m.ok && m.displacement < ctl.max_displacement * last_good.lattice_spacing()) {
          lo = mid;
          last_good = m.cp.config;
          last_cp = m.cp;
        } else {
          hi = mid;
        }
      }
      BifurcationEvent ev;
      ev.parameter = 0.5 * (lo + hi);
      ev.bracket_width = std::abs(hi - lo);
      ev.kind = BifurcationKind::SaddleNode;
      ev.soft_mode = smallest_eigenvector(last_cp, trap, param, lo);
      const int n_neg = last_cp.n_negative;
      // By fold pair creation, the colliding partners have indices +-1; the
      // side where the branch exists carries both.
      if (dir * (hi - lo) > 0.0) {  // branch exists at smaller parameter side iff dir > 0
        ev.n_negative_left = n_neg;
        ev.n_negative_right = -1;  // no solution
        ev.parent_left = last_good;
      } else {
        ev.n_negative_right = n_neg;
        ev.n_negative_left = -1;
        ev.parent_right = last_good;
      }
      ev.soft_mode_odd = soft_mode_parity(last_good, ev.soft_mode);
      branch.samples.push_back({lo, last_cp});
      branch.events.push_back(ev);
      branch.terminated_at_fold = true;
      branch.termination = "fold at " + param.name() + " = " + std::to_string(ev.parameter);
      return branch;
    }

    // Event detection: any change in the negative-eigenvalue count.
    const int dn = next.cp.n_negative - branch.back().point.n_negative;
    if (dn != 0) {
      if (std::abs(dn) > 1 && std::abs(step) > ctl.min_step) {
        step *= 0.5;  // resolve multiple crossings one at a time
        continue;
      }
      // Bracket the crossing by bisection on n_negative.
      Real lo = p, hi = p_next;
      CriticalPoint cp_lo = branch.back().point, cp_hi = next.cp;
      while (std::abs(hi - lo) > ctl.bracket_tol) {
        const Real mid = 0.5 * (lo + hi);
        Corrected m = correct_at(cp_lo.config, trap, param, mid, ctl);
        if (!m.ok) break;  // keep the current bracket if refinement stalls
        if (m.cp.n_negative == cp_lo.n_negative) {
          lo = mid;
          cp_lo = m.cp;
        } else {
          hi = mid;
          cp_hi = m.cp;
        }
      }
      // A genuine crossing leaves the two bracket endpoints on the same
      // continuous branch, so their configurations coincide as the bracket
      // shrinks. A finite gap means the corrector hopped onto a neighbouring
      // branch of different index; retry with a smaller step.
      if (matched_distance(cp_lo.config, cp_hi.config) >
          1e-3 * branch.back().point.config.lattice_spacing()) {
        if (std::abs(step) > ctl.min_step) {
          step *= 0.25;
          continue;
        }
        throw ConvergenceError(
            "trace_branch: corrector keeps hopping branches near " + param.name() + " = " +
            std::to_string(0.5 * (lo + hi)));
      }
      BifurcationEvent ev;
      ev.parameter = 0.5 * (lo + hi);
      ev.bracket_width = std::abs(hi - lo);
      ev.two_mode = std::abs(dn) > 1;
      const bool lo_is_left = lo < hi;
      ev.n_negative_left = lo_is_left ? cp_lo.n_negative : cp_hi.n_negative;
      ev.n_negative_right = lo_is_left ? cp_hi.n_negative : cp_lo.n_negative;
      ev.parent_left = lo_is_left ? cp_lo.config : cp_hi.config;
      ev.parent_right = lo_is_left ? cp_hi.config : cp_lo.config;
      ev.soft_mode = smallest_eigenvector(cp_lo, trap, param, lo);
      ev.soft_mode_odd = soft_mode_parity(cp_lo.config, ev.soft_mode);
      const bool parity_breaking = ev.soft_mode_odd.sym_x || ev.soft_mode_odd.sym_y ||
                                   ev.soft_mode_odd.sym_z || ev.soft_mode_odd.sym_xy_combined;
      ev.kind = ev.two_mode ? BifurcationKind::Unclassified
                            : (parity_breaking ? BifurcationKind::Pitchfork
                                               : BifurcationKind::Unclassified);
      branch.events.push_back(ev);
    }

    branch.samples.push_back({p_next, next.cp});
    p = p_next;
    // Grow the step back after successful moves.
    if (std::abs(step) < std::abs(ctl.initial_step))
      step = dir * std::min(std::abs(step) * 2.0, std::abs(ctl.initial_step));
  }
  branch.termination = "range end";
  return branch;
}

BranchSwitchResult branch_switch(const BifurcationEvent& event, const PseudoTrap& trap,
                                 const Parameter& param, Real epsilon, const StepControl& ctl) {
  BranchSwitchResult result;
  struct Side {
    const std::optional<Configuration>* parent;
    Real value;
  };
  const Real off = std::max(Real(4.0) * event.bracket_width, Real(1e-3) * std::abs(event.parameter));
  const Side sides[2] = {{&event.parent_left, event.parameter - off},
                         {&event.parent_right, event.parameter + off}};

  std::vector<Configuration> found;
  for (const Side& side : sides) {
    if (!side.parent->has_value()) continue;
    const Configuration& parent = side.parent->value();
    // Converge the parent itself at the probe value for deduplication.
    Corrected parent_here = correct_at(parent, trap, param, side.value, ctl);

    const Real spacing = parent.lattice_spacing();
    const int na = parent.dof_mask.n_active_axes();
    Real mode_max = 0.0;
    for (Index i = 0; i < parent.n_ions(); ++i)
      mode_max = std::max(mode_max, event.soft_mode.segment(i * na, na).norm());
    if (mode_max <= 0.0) continue;

    for (const Real sign : {1.0, -1.0}) {
      // A too-small nudge falls back into the parent's basin near the event;
      // escalate the perturbation a few times before giving up on this side.
      for (const Real scale : {1.0, 2.0, 4.0}) {
        Configuration seed = parent;
        Vec x = seed.active_coords() +
                sign * (scale * epsilon * spacing / mode_max) * event.soft_mode;
        seed.set_active_coords(x);
        Corrected child = correct_at(seed, trap, param, side.value, ctl);
        if (!child.ok) continue;
        if (parent_here.ok && matched_distance(child.cp.config, parent_here.cp.config) < 1e-4)
          continue;  // fell back to the parent
        // Children must stay close to the event; a large jump means the seed
        // escaped to an unrelated solution.
        if (child.displacement > 2.0 * ctl.max_displacement * spacing) continue;
        bool duplicate = false;
        for (const Configuration& c : found)
          if (matched_distance(child.cp.config, c) < 1e-4) {
            duplicate = true;
            break;
          }
        if (!duplicate) {
          found.push_back(child.cp.config);
          Branch b;
          b.parameter_name = param.name();
          b.samples.push_back({side.value, child.cp});
          result.branches.push_back(std::move(b));

          // The soft mode's odd symmetries map each child to a sibling
          // solution exactly; enumerate the images so index audits see the
          // complete emanating set even when only one basin was reached.
          struct Op {
            bool fx, fy, fz, enabled;
          };
          const Op ops[4] = {{true, false, false, event.soft_mode_odd.sym_x},
                             {false, true, false, event.soft_mode_odd.sym_y},
                             {false, false, true, event.soft_mode_odd.sym_z},
                             {true, true, false, event.soft_mode_odd.sym_xy_combined}};
          for (const Op& op : ops) {
            if (!op.enabled) continue;
            Configuration image = child.cp.config;
            if (op.fx) image.positions.col(0) *= -1.0;
            if (op.fy) image.positions.col(1) *= -1.0;
            if (op.fz) image.positions.col(2) *= -1.0;
            Corrected mirrored = correct_at(image, trap, param, side.value, ctl);
            if (!mirrored.ok || mirrored.displacement > 1e-6) continue;
            bool dup = false;
            for (const Configuration& c : found)
              if (matched_distance(mirrored.cp.config, c) < 1e-4) dup = true;
            if (dup) continue;
            found.push_back(mirrored.cp.config);
            Branch mb;
            mb.parameter_name = param.name();
            mb.samples.push_back({side.value, mirrored.cp});
            result.branches.push_back(std::move(mb));
          }
        }
        break;  // this side produced a converged, classified outcome
      }
    }
  }
  result.unresolved = result.branches.empty();
  return result;
}

std::vector<BifurcationEvent> saddle_node_scan(const std::vector<CriticalPoint>& seeds,
                                               const PseudoTrap& trap, const Parameter& param,
                                               Real from, Real to, const StepControl& ctl) {
  std::vector<BifurcationEvent> events;
  for (const CriticalPoint& seed : seeds) {
    Branch b = trace_branch(seed, trap, param, from, to, ctl);
    for (const BifurcationEvent& ev : b.events)
      if (ev.kind == BifurcationKind::SaddleNode) events.push_back(ev);
  }
  return events;
}

IndexAudit index_audit(const BifurcationEvent& event, const std::vector<Branch>& branches,
                       const PseudoTrap& trap, const Parameter& param, Real delta,
                       const StepControl& ctl) {
  IndexAudit audit;
  const Real left = event.parameter - std::abs(delta);
  const Real right = event.parameter + std::abs(delta);

  std::vector<Configuration> seen_left, seen_right;
  for (const Branch& b : branches) {
    // Nearest sample to the event as the continuation seed.
    const BranchSample* nearest = nullptr;
    Real best = std::numeric_limits<Real>::infinity();
    for (const BranchSample& s : b.samples) {
      const Real d = std::abs(s.parameter - event.parameter);
      if (d < best) {
        best = d;
        nearest = &s;
      }
    }
    if (!nearest) continue;
    for (const bool is_left : {true, false}) {
      const Real v = is_left ? left : right;
      // Walk the branch in adaptive parameter substeps. Along a branch the
      // negative-eigenvalue count can change only across the event itself;
      // a count change elsewhere (or an oversized displacement) means the
      // corrector hopped onto a neighbouring branch, so the step is halved.
      auto walk = [&](const CriticalPoint& from, Real p_from, Real p_to,
                      CriticalPoint* reached) {
        CriticalPoint cur = from;
        Real p = p_from;
        const Real dir = p_to >= p_from ? 1.0 : -1.0;
        Real step = (p_to - p_from) / 6.0;
        const Real min_step = std::abs(p_to - p_from) / 1024.0;
        const Real spacing = from.config.lattice_spacing();
        // Near-degenerate sibling branches (mirror saddles of one event) sit
        // closer than the global continuity bound, so the per-substep bound
        // adapts to the motion actually seen along this branch.
        Real seen = 1e-3 * spacing;
        while (dir * (p_to - p) > 1e-15) {
          Real vs = p + step;
          if (dir * (vs - p_to) > 0.0) vs = p_to;
          const Configuration prev = cur.config;
          Corrected s = correct_at(prev, trap, param, vs, ctl);
          const bool spans_event = (p - event.parameter) * (vs - event.parameter) <= 0.0;
          const Real bound =
              std::min(std::max(4.0 * seen, 1e-3 * spacing), ctl.max_displacement * spacing);
          const bool ok = s.ok && s.displacement <= bound &&
                          (s.cp.n_negative == cur.n_negative || spans_event);
          if (!ok) {
            step *= 0.5;
            if (std::abs(step) < min_step) return false;
            continue;
          }
          seen = std::max(seen, s.displacement);
          cur = s.cp;
          p = vs;
        }
        *reached = cur;
        return true;
      };
      CriticalPoint probed;
      bool on_branch = walk(nearest->point, nearest->parameter, v, &probed);
      if (on_branch) {
        // Branch identity: the probe must continue back onto the sample it
        // came from, which rejects impostor solutions picked up across a
        // fold.
        CriticalPoint back;
        on_branch = walk(probed, v, nearest->parameter, &back) &&
                    matched_distance(back.config, nearest->point.config) < 1e-6;
      }
      Corrected c;
      c.ok = on_branch;
      if (on_branch) c.cp = probed;
      if (!on_branch) continue;  // solution does not exist on this side (fold partner)
      auto& seen = is_left ? seen_left : seen_right;
      bool dup = false;
      for (const Configuration& s : seen)
        if (matched_distance(c.cp.config, s) < 1e-4) {
          dup = true;
          break;
        }
      if (dup) continue;
      seen.push_back(c.cp.config);
      if (c.cp.at_bifurcation) continue;  // cannot assign an index this close
      (is_left ? audit.sum_left : audit.sum_right) += c.cp.local_index;
      ++(is_left ? audit.branches_left : audit.branches_right);
    }
  }
  audit.balanced = audit.sum_left == audit.sum_right;
  if (!audit.balanced)
    audit.note = "index imbalance: a branch emanating from the event is missing from the "
                 "enumerated set";
  return audit;
}

}  // namespace kinklab
