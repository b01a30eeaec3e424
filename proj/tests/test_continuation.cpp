#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kinklab/continuation.hpp"
#include "kinklab/pn.hpp"
#include "kinklab/statics.hpp"
#include "test_helpers.hpp"

using namespace kinklab;
using namespace kinklab::testing;

namespace {

CriticalPoint planar_chain(Index n, Real gamma_y) {
  const Configuration c = make_seed(SeedSpec::chain(n), PseudoTrap::planar(gamma_y),
                                    DofMask::planar_xy());
  return newton_critical(c, PseudoTrap::planar(gamma_y));
}

CriticalPoint centred_kink(Index n, Real gamma_y) {
  const PseudoTrap trap = PseudoTrap::planar(gamma_y);
  const Configuration ks = make_seed(SeedSpec::odd_kink(n), trap, DofMask::planar_xy());
  return relax(ks, trap);
}

}  // namespace

TEST_CASE("two-ion chain bifurcates at gamma_y = 1 exactly") {
  const CriticalPoint start = planar_chain(2, 2.0);
  const Branch b = trace_branch(start, PseudoTrap::planar(2.0), Parameter::gamma_y(), 2.0, 0.5);
  REQUIRE(b.events.size() == 1);
  CHECK(std::abs(b.events[0].parameter - 1.0) < 1e-5);
  CHECK(b.events[0].n_negative_left == 1);
  CHECK(b.events[0].n_negative_right == 0);
}

TEST_CASE("31-ion chain: zigzag pitchfork near 152, kink-generating crossing near 144") {
  const CriticalPoint start = planar_chain(31, 160.0);
  const Branch b =
      trace_branch(start, PseudoTrap::planar(160.0), Parameter::gamma_y(), 160.0, 140.0);
  REQUIRE(b.events.size() >= 2);
  CHECK(b.events[0].parameter == doctest::Approx(152.4).epsilon(0.015));
  CHECK(b.events[0].kind == BifurcationKind::Pitchfork);
  // The zigzag soft mode is odd under the radial inversion: children break it.
  CHECK(b.events[0].soft_mode_odd.sym_y);
  CHECK_FALSE(b.events[0].soft_mode_odd.sym_x);
  // Next radial crossing (the odd-kink creation).
  CHECK(b.events[1].parameter == doctest::Approx(144.1).epsilon(0.015));

  // Reversibility across the traversed interval.
  const Branch back = trace_branch(b.back().point, PseudoTrap::planar(140.0),
                                   Parameter::gamma_y(), 140.0, 160.0);
  CHECK(matched_distance(back.back().point.config, start.config) < 1e-8);
}

TEST_CASE("branch switch at the zigzag pitchfork yields the mirror pair") {
  const CriticalPoint start = planar_chain(31, 156.0);
  const Branch b =
      trace_branch(start, PseudoTrap::planar(156.0), Parameter::gamma_y(), 156.0, 149.0);
  REQUIRE(b.events.size() == 1);
  const BifurcationEvent& ev = b.events[0];

  const BranchSwitchResult sw = branch_switch(ev, PseudoTrap::planar(156.0), Parameter::gamma_y());
  REQUIRE_FALSE(sw.unresolved);
  // Two stable mirror branches (zigzag and zagzig).
  int stable_children = 0;
  for (const Branch& child : sw.branches)
    if (child.front().point.stable) ++stable_children;
  CHECK(stable_children == 2);
  CHECK(sw.branches.size() == 2);
  // They are y-mirror images of each other, not identical.
  if (sw.branches.size() == 2) {
    const Configuration& a = sw.branches[0].front().point.config;
    const Configuration& c = sw.branches[1].front().point.config;
    CHECK(matched_distance(a, c) > 1e-3);
    CHECK(symmetry_reduced_distance(a, c) < 1e-6);
  }

  // Index conservation at the pitchfork: {+1} -> {-1, +1, +1}.
  std::vector<Branch> all = sw.branches;
  all.push_back(b);
  const IndexAudit audit = index_audit(ev, all, PseudoTrap::planar(156.0), Parameter::gamma_y(),
                                       0.2);
  CHECK(audit.balanced);
  CHECK(audit.sum_right == 1);
  CHECK(audit.sum_left == 1);
  CHECK(audit.branches_left == 3);

  // Negative control: dropping one child must break the balance.
  std::vector<Branch> omitting = {sw.branches[0], b};
  const IndexAudit bad = index_audit(ev, omitting, PseudoTrap::planar(156.0),
                                     Parameter::gamma_y(), 0.2);
  CHECK_FALSE(bad.balanced);
  CHECK_FALSE(bad.note.empty());
}

TEST_CASE("branch switch at the kink-creating crossing yields unstable kinks") {
  const CriticalPoint start = planar_chain(31, 146.0);
  const Branch b =
      trace_branch(start, PseudoTrap::planar(146.0), Parameter::gamma_y(), 146.0, 142.0);
  REQUIRE(b.events.size() == 1);
  const BifurcationEvent& ev = b.events[0];
  CHECK(ev.parameter == doctest::Approx(144.1).epsilon(0.01));

  const BranchSwitchResult sw = branch_switch(ev, PseudoTrap::planar(146.0), Parameter::gamma_y());
  REQUIRE_FALSE(sw.unresolved);
  // All bifurcating solutions are unstable (the chain is already unstable).
  for (const Branch& child : sw.branches) {
    CHECK_FALSE(child.front().point.stable);
    CHECK(child.front().point.n_negative == 1);
  }
  CHECK(sw.branches.size() == 2);

  // Epsilon-halving consistency: same converged children.
  const BranchSwitchResult sw2 =
      branch_switch(ev, PseudoTrap::planar(146.0), Parameter::gamma_y(), 0.025);
  REQUIRE(sw2.branches.size() == sw.branches.size());
  Real worst = 0.0;
  for (size_t k = 0; k < sw.branches.size(); ++k) {
    Real best = 1e30;
    for (size_t l = 0; l < sw2.branches.size(); ++l)
      best = std::min(best, matched_distance(sw.branches[k].front().point.config,
                                             sw2.branches[l].front().point.config));
    worst = std::max(worst, best);
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("centred odd-kink branch: stabilization near 106 and symmetry breaking near 65.2") {
  const CriticalPoint kink = centred_kink(31, 90.0);
  REQUIRE(kink.stable);

  const Branch up = trace_branch(kink, PseudoTrap::planar(90.0), Parameter::gamma_y(), 90.0, 110.0);
  bool found_c = false;
  for (const BifurcationEvent& ev : up.events)
    if (std::abs(ev.parameter - 106.1) < 1.6) {
      found_c = true;
      CHECK(ev.n_negative_left == 0);   // stable below
      CHECK(ev.n_negative_right == 1);  // unstable above
    }
  CHECK(found_c);

  const Branch dn = trace_branch(kink, PseudoTrap::planar(90.0), Parameter::gamma_y(), 90.0, 63.0);
  bool found_652 = false;
  for (const BifurcationEvent& ev : dn.events)
    if (std::abs(ev.parameter - 65.2) < 1.0) {
      found_652 = true;
      CHECK(ev.n_negative_right == 0);
      CHECK(ev.n_negative_left == 1);
      CHECK(ev.kind == BifurcationKind::Pitchfork);
      // The soft mode breaks the remaining total-inversion symmetry.
      CHECK(ev.soft_mode_odd.sym_xy_combined);
    }
  CHECK(found_652);
}

TEST_CASE("saddle-node scan: displaced-kink fold near 96.5") {
  const PseudoTrap trap = PseudoTrap::planar(90.0);
  const Configuration seed = make_seed(SeedSpec::displaced_kink(31, 1), trap, DofMask::planar_xy());
  const CriticalPoint displaced = relax(seed, trap);
  REQUIRE(displaced.stable);

  const std::vector<BifurcationEvent> events =
      saddle_node_scan({displaced}, trap, Parameter::gamma_y(), 90.0, 100.0);
  REQUIRE(events.size() == 1);
  CHECK(events[0].parameter == doctest::Approx(96.5).epsilon(0.011));
  CHECK(events[0].kind == BifurcationKind::SaddleNode);

  // Fold pair: the displaced kink annihilates with the saddle on its OUTER
  // side (the escape barrier toward the zigzag); the inner centre<->site
  // saddle continues smoothly past the fold. Enumerating the true pair
  // balances at 0 on both sides, matching pair creation.
  const Configuration zzs = make_seed(SeedSpec::zigzag(31), trap, DofMask::planar_xy());
  const CriticalPoint zigzag = relax(zzs, trap);
  const CriticalPoint outer = string_saddle(displaced.config, zigzag.config, trap);
  REQUIRE(outer.n_negative == 1);
  CHECK(outer.energy > displaced.energy);

  Branch stable_branch;
  stable_branch.parameter_name = "gamma_y";
  stable_branch.samples.push_back({90.0, displaced});
  Branch saddle_branch;
  saddle_branch.parameter_name = "gamma_y";
  saddle_branch.samples.push_back({90.0, outer});
  const IndexAudit audit = index_audit(events[0], {stable_branch, saddle_branch}, trap,
                                       Parameter::gamma_y(), 0.5);
  CHECK(audit.balanced);
  CHECK(audit.sum_left == 0);
  CHECK(audit.branches_left == 2);
  CHECK(audit.branches_right == 0);
}

TEST_CASE("ratio sweep of the planar 50-ion kink finds the transverse bifurcation at 1.131") {
  const Real gy = 121.0;
  // Planar kink (in-plane relaxed), then full 3-D dof for the sweep.
  const PseudoTrap planar_trap = PseudoTrap::planar(gy);
  const Configuration ks = make_seed(SeedSpec::odd_kink(50), planar_trap, DofMask::planar_xy());
  const CriticalPoint planar_kink = relax(ks, planar_trap);
  REQUIRE(planar_kink.stable);

  Configuration kink3d = planar_kink.config;
  kink3d.dof_mask = DofMask::full();
  kink3d.apply_mask();
  const PseudoTrap start_trap{gy, gy * 1.2 * 1.2};
  const CriticalPoint start = newton_critical(kink3d, start_trap);

  StepControl ctl;
  ctl.initial_step = 0.002;
  const Branch b = trace_branch(start, start_trap, Parameter::ratio_zy(gy), 1.2, 1.05, ctl);
  REQUIRE(b.events.size() >= 1);
  const BifurcationEvent& ev = b.events[0];
  CHECK(ev.parameter == doctest::Approx(1.1275).epsilon(0.004));
  // Soft mode transverse (z) and localized on the kink core.
  CHECK(ev.soft_mode_odd.sym_z);
  const Index n = 50;
  Vec ion_w = Vec::Zero(n);
  for (Index i = 0; i < n; ++i)
    ion_w[i] = ev.soft_mode.segment(3 * i, 3).squaredNorm();
  // z-dominated:
  Real z_share = 0.0;
  for (Index i = 0; i < n; ++i) z_share += ev.soft_mode[3 * i + 2] * ev.soft_mode[3 * i + 2];
  CHECK(z_share > 0.95);
  // Localized: participation over ions well below N/4.
  const Real pr = 1.0 / ion_w.squaredNorm();
  CHECK(pr < 50.0 / 4.0);
}

TEST_CASE("parameter application and branch bookkeeping") {
  PseudoTrap trap{10.0, 40.0};
  Configuration c = random_configuration(3, DofMask::full(), 3);
  Parameter::ratio_zy(10.0).apply(1.5, trap, c);
  CHECK(trap.gamma_y == 10.0);
  CHECK(trap.gamma_z == doctest::Approx(22.5));

  Parameter pm = Parameter::mass_ratio(1);
  pm.apply(1.8, trap, c);
  CHECK(c.species[size_t(c.axial_order()[1])].mass_ratio == doctest::Approx(1.8));
}
