#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kinklab/io.hpp"
#include "kinklab/dynamics.hpp"
#include "kinklab/errors.hpp"
#include "kinklab/floquet.hpp"
#include "kinklab/pn.hpp"
#include "kinklab/statics.hpp"
#include "test_helpers.hpp"

using namespace kinklab;
using namespace kinklab::testing;

TEST_CASE("pn landscape at gamma_y = 100: only the centre site exists") {
  const PNLandscape land = pn_extract(PseudoTrap::planar(100.0), 31, [] {
    PNOptions o;
    o.max_offset = 2;
    return o;
  }());
  REQUIRE(land.site(0) != nullptr);
  CHECK(land.site(0)->exists);
  CHECK(land.site(0)->stable);
  for (int k : {-2, -1, 1, 2}) {
    REQUIRE(land.site(k) != nullptr);
    CHECK_FALSE(land.site(k)->exists);
  }
}

TEST_CASE("pn landscape at gamma_y = 90: centre and +-1, centre slightly higher") {
  const PNLandscape land = pn_extract(PseudoTrap::planar(90.0), 31, [] {
    PNOptions o;
    o.max_offset = 2;
    return o;
  }());
  REQUIRE(land.site(0));
  REQUIRE(land.site(1));
  REQUIRE(land.site(-1));
  CHECK(land.site(0)->exists);
  CHECK(land.site(1)->exists);
  CHECK(land.site(-1)->exists);
  CHECK_FALSE(land.site(2)->exists);
  CHECK_FALSE(land.site(-2)->exists);

  // The centre minimum is slightly higher than its neighbours.
  CHECK(land.site(0)->energy > land.site(1)->energy);
  CHECK(land.site(0)->energy - land.site(1)->energy < 0.01);

  // Landscape symmetry.
  CHECK(std::abs(land.site(1)->energy - land.site(-1)->energy) < 1e-9);

  // Barriers: each saddle above both adjacent minima, index -1.
  REQUIRE(land.barriers.size() == 2);
  for (const PNBarrier& b : land.barriers) {
    CHECK(b.n_negative == 1);
    const PNSite* lo = land.site(b.site_lo);
    const PNSite* hi = land.site(b.site_lo + 1);
    CHECK(b.saddle_energy > lo->energy);
    CHECK(b.saddle_energy > hi->energy);
  }

  // All energies relative to the zigzag are nonnegative.
  for (const PNSite& s : land.sites)
    if (s.exists) CHECK(s.energy >= 0.0);

  // CSV emission sanity.
  const std::string csv = pn_landscape_csv(land);
  CHECK(csv.find("offset,E_min") != std::string::npos);
}

TEST_CASE("pn saddles agree with the continuation branch-switch route") {
  // The saddles created at bifurcation c (the kink-stabilization event) are
  // the PN barriers. Cross-validate: switch onto a saddle child at the event
  // and trace it down to gamma_y = 90, where the interpolation route of
  // pn_extract finds the same barrier.
  const PseudoTrap trap = PseudoTrap::planar(100.0);
  const Configuration ks = make_seed(SeedSpec::odd_kink(31), trap, DofMask::planar_xy());
  const CriticalPoint kink = relax(ks, trap);
  const Branch up = trace_branch(kink, trap, Parameter::gamma_y(), 100.0, 108.0);
  REQUIRE(up.events.size() >= 1);
  const BifurcationEvent& c_event = up.events[0];

  const BranchSwitchResult sw = branch_switch(c_event, trap, Parameter::gamma_y());
  REQUIRE_FALSE(sw.unresolved);
  std::vector<CriticalPoint> saddles;
  Real child_param = 0.0;
  for (const Branch& b : sw.branches)
    if (b.front().point.n_negative == 1) {
      saddles.push_back(b.front().point);
      child_param = b.front().parameter;
    }
  REQUIRE(saddles.size() >= 1);

  const Branch traced =
      trace_branch(saddles.back(), trap, Parameter::gamma_y(), child_param, 90.0);
  REQUIRE_FALSE(traced.terminated_at_fold);
  const CriticalPoint& switch_saddle = traced.back().point;
  REQUIRE(switch_saddle.n_negative == 1);

  const PNLandscape land = pn_extract(PseudoTrap::planar(90.0), 31, [] {
    PNOptions o;
    o.max_offset = 1;
    return o;
  }());
  REQUIRE(land.barriers.size() == 2);
  Real best = 1e30;
  for (const PNBarrier& b : land.barriers)
    best = std::min(best,
                    std::abs(b.saddle_energy - (switch_saddle.energy - land.ground_energy)));
  CHECK(best < 1e-8);
}

TEST_CASE("kink rest energy at the experimental parameters is 0.1265") {
  const Real gy = 121.0, ratio = 1.047;
  const PseudoTrap trap{gy, gy * ratio * ratio};
  PNOptions opts;
  opts.mask = DofMask::full();
  const Real e = kink_rest_energy(trap, 50, opts);
  CHECK(e == doctest::Approx(0.1265).epsilon(0.02));

  // Mirror seed gives the same energy.
  const Configuration zz = make_seed(SeedSpec::zigzag(50), trap, DofMask::full());
  const CriticalPoint ground = relax(zz, trap);
  Configuration mirror_seed = make_seed(SeedSpec::odd_kink(50), trap, DofMask::full());
  mirror_seed.positions.col(1) *= -1.0;
  const CriticalPoint mirror = relax(mirror_seed, trap);
  CHECK(std::abs((mirror.energy - ground.energy) - e) < 1e-10);
}

TEST_CASE("two-kink energies and the annihilation barrier") {
  const Real gy = 121.0, ratio = 1.047;
  const PseudoTrap trap{gy, gy * ratio * ratio};
  PNOptions opts;
  opts.mask = DofMask::full();
  const Real mg = 23.985041697 * constants::atomic_mass_unit;
  opts.units = UnitSystem::pseudopotential(mg, constants::elementary_charge,
                                           2.0 * constants::pi * 56.7e3, 1.0026e-3);

  const TwoKinkAnalysis two = two_kink_analysis(trap, 50, {4, 6}, opts);
  CHECK(two.kink_energy == doctest::Approx(0.1265).epsilon(0.02));

  REQUIRE(two.separations.size() == 2);
  // Both even seeds relax to the stable adjacent pair.
  for (const auto& s : two.separations) {
    REQUIRE(s.exists);
    CHECK(s.energy == doctest::Approx(0.27).epsilon(0.02));
    // Repulsive interaction: E_two-kink exceeds twice the single-kink energy.
    CHECK(s.interaction > 0.0);
    CHECK(s.interaction == doctest::Approx(0.017).epsilon(0.25));
  }

  CHECK(two.annihilation_barrier == doctest::Approx(0.078).epsilon(0.05));
  // The symmetric collision channel carries an antisymmetric escape

  // direction as well at these near-degenerate parameters.
  CHECK(two.barrier_n_negative >= 1);
  if (two.asymmetric_channel_barrier)
    CHECK(*two.asymmetric_channel_barrier < two.annihilation_barrier);

  // ~35 k_B T_D for the Mg+ experiment.
  CHECK(two.barrier_in_doppler_units() == doctest::Approx(35.0).epsilon(0.10));
}

TEST_CASE("kinks repel: energy rises monotonically as they approach") {
  // The adiabatic approach curve along the annihilation path: separation
  // shrinks from the stable pair toward the transition image while the
  // energy rises monotonically (repulsion at shorter distance).
  const Real gy = 121.0, ratio = 1.047;
  const PseudoTrap trap{gy, gy * ratio * ratio};
  PNOptions opts;
  opts.mask = DofMask::full();
  const TwoKinkAnalysis two = two_kink_analysis(trap, 50, {4}, opts);

  REQUIRE(two.approach_curve.size() >= 3);
  CHECK(two.approach_curve.front().first > two.approach_curve.back().first);
  for (size_t k = 0; k + 1 < two.approach_curve.size(); ++k)
    CHECK(two.approach_curve[k].second < two.approach_curve[k + 1].second + 1e-9);
  // Interaction positive at the stable spacing (E_two-kink > 2 E_kink).
  REQUIRE(two.separations.front().exists);
  CHECK(two.separations.front().interaction > 0.0);
}

TEST_CASE("mass-defect landscape: reference species reduces to the ordinary kink") {
  const Real gy = 121.0, ratio = 1.047;
  const PseudoTrap trap{gy, gy * ratio * ratio};

  // mu = 1 dark ion: same landscape as all-bright.
  const Configuration seed =
      make_seed(SeedSpec::dark_ion(50, 25, IonSpecies{1.0, 1.0, false}, SeedSpec::Kind::OddKink),
                trap, DofMask::full());
  const CriticalPoint dark1 = relax(seed, trap);
  PNOptions opts;
  opts.mask = DofMask::full();
  const Real e_kink = kink_rest_energy(trap, 50, opts);
  const Configuration zz = make_seed(SeedSpec::zigzag(50), trap, DofMask::full());
  const CriticalPoint ground = relax(zz, trap);
  CHECK(std::abs((dark1.energy - ground.energy) - e_kink) < 1e-9);
}

TEST_CASE("kink_rest_energy reports a missing kink") {
  // Above the stability window no centred kink exists.
  PNOptions opts;
  opts.mask = DofMask::planar_xy();
  CHECK_THROWS_AS(kink_rest_energy(PseudoTrap::planar(120.0), 31, opts), ConvergenceError);
}

TEST_CASE("dark ion in the full Paul potential sits at roughly twice the bright extent") {
  // Time-averaged equilibrium of a 40-ion zigzag with one heavy dark ion
  // (mu = 40/24) at the experimental parameters.
  const PaulTrap paul{0.000328, -0.0002, 0.0019, 0.286};
  const SecularModes sec = pseudopotential_from_paul(paul);
  const PseudoTrap pseudo = sec.pseudo;

  IonSpecies dark{40.0 / 24.0, 1.0, false};
  const Configuration seed =
      make_seed(SeedSpec::dark_ion(40, 20, dark), pseudo, DofMask::full());
  const CriticalPoint cp = relax(seed, pseudo);

  // Pseudopotential coordinates -> Paul coordinates (principal axes, unit
  // ratio between the two nondimensionalizations at the same physical size).
  const Real mg = 23.985041697 * constants::atomic_mass_unit;
  const Real omega_x_si = sec.omega[0] * 0.5 * (2.0 * constants::pi * 6.22e6);
  const UnitSystem u_pseudo =
      UnitSystem::pseudopotential(mg, constants::elementary_charge, omega_x_si);
  const UnitSystem u_paul =
      UnitSystem::paul(mg, constants::elementary_charge, 2.0 * constants::pi * 6.22e6);
  Configuration paul_seed = cp.config;
  paul_seed.positions =
      (cp.config.positions * sec.axes.transpose()) * (u_pseudo.length_unit() / u_paul.length_unit());

  const Coords averaged = paul_time_averaged_equilibrium(paul_seed, paul, 400.0, 4.0, 0.15);
  Real bright = 0.0, dark_r = 0.0;
  for (Index i = 0; i < 40; ++i) {
    const Real r = std::hypot(averaged(i, 1), averaged(i, 2));
    if (paul_seed.species[size_t(i)].bright)
      bright = std::max(bright, r);
    else
      dark_r = r;
  }
  CHECK(dark_r / bright > 1.4);
  CHECK(dark_r / bright < 2.6);
}

TEST_CASE("mass-defect sweep displaces the dark ion radially") {
  const Real gy = 121.0, ratio = 1.047;
  const PseudoTrap trap{gy, gy * ratio * ratio};
  const MassDefectLandscape land =
      mass_defect_landscape(trap, 40, 20, 1.0, 40.0 / 24.0, 0.05,
                            SeedSpec::Kind::Zigzag, DofMask::full());
  REQUIRE(land.samples.size() > 5);
  CHECK(land.samples.front().dark_radial_displacement <
        land.samples.front().bright_radial_extent * 1.2);
  const MassDefectSample& last = land.samples.back();
  CHECK(last.mass_ratio == doctest::Approx(40.0 / 24.0).epsilon(1e-6));
  // Reduced confinement pushes the defect outside the bright rows.
  CHECK(last.dark_radial_displacement > last.bright_radial_extent);
}
