#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kinklab/configuration.hpp"
#include "kinklab/errors.hpp"
#include "kinklab/floquet.hpp"
#include "kinklab/io.hpp"
#include "kinklab/potential.hpp"
#include "kinklab/units.hpp"
#include "test_helpers.hpp"

using namespace kinklab;
using namespace kinklab::testing;

namespace {

Configuration two_ion_equilibrium() {
  const Real u = std::cbrt(0.25);
  Coords p = Coords::Zero(2, 3);
  p(0, 0) = -u;
  p(1, 0) = u;
  return Configuration::uniform(p);
}

}  // namespace

TEST_CASE("potential energy analytic values") {
  const PseudoTrap trap{7.0, 13.0};

  Configuration single = Configuration::uniform(Coords::Zero(1, 3));
  CHECK(potential_energy(single, trap) == 0.0);

  // Two ions at +-(1/4)^(1/3): minimum of u^2 + 1/(2u).
  Configuration pair = two_ion_equilibrium();
  CHECK(potential_energy(pair, trap) == doctest::Approx(3.0 * std::pow(0.25, 2.0 / 3.0))
                                             .epsilon(1e-12));
  CHECK(potential_energy(pair, trap) == doctest::Approx(1.19055).epsilon(1e-5));

  // Three ions at 0, +-(5/4)^(1/3): minimum of x^2 + 5/(2x).
  const Real a = std::cbrt(1.25);
  Coords p3 = Coords::Zero(3, 3);
  p3(0, 0) = -a;
  p3(2, 0) = a;
  Configuration triple = Configuration::uniform(p3);
  CHECK(potential_energy(triple, trap) ==
        doctest::Approx(3.0 * std::pow(1.25, 2.0 / 3.0)).epsilon(1e-12));
  CHECK(potential_energy(triple, trap) == doctest::Approx(3.48120).epsilon(1e-5));
}

TEST_CASE("coincident ions raise a singular-geometry error") {
  Coords p = Coords::Zero(2, 3);
  p(1, 0) = 1e-8;
  Configuration c = Configuration::uniform(p);
  CHECK_THROWS_AS(potential_energy(c, PseudoTrap{1, 1}), SingularGeometryError);
  CHECK_THROWS_AS(gradient(c, PseudoTrap{1, 1}), SingularGeometryError);
  CHECK_THROWS_AS(hessian(c, PseudoTrap{1, 1}), SingularGeometryError);
}

TEST_CASE("gradient analytic values and finite-difference oracle") {
  const PseudoTrap trap{5.0, 9.0};

  Configuration single = Configuration::uniform(Coords::Zero(1, 3));
  CHECK(gradient(single, trap).norm() == 0.0);

  Configuration pair = two_ion_equilibrium();
  CHECK(gradient(pair, trap).norm() < 1e-12);

  // Two ions at x = +-1: dV/dx_right = x - 1/(2x)^2 = 0.75; checked against
  // the finite-difference oracle.
  Coords p = Coords::Zero(2, 3);
  p(0, 0) = -1.0;
  p(1, 0) = 1.0;
  Configuration c = Configuration::uniform(p);
  const Coords g = gradient(c, trap);
  CHECK(g(1, 0) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(g(0, 0) == doctest::Approx(-0.75).epsilon(1e-12));
  const Coords g_fd = fd_gradient(c, trap);
  CHECK((g - g_fd).norm() / g_fd.norm() < 1e-7);
}

TEST_CASE("gradient and hessian match finite differences on random configurations") {
  for (const bool mixed : {false, true}) {
    for (std::uint64_t seed : {11u, 23u}) {
      for (const DofMask mask : {DofMask::full(), DofMask::planar_xy()}) {
        Configuration c = random_configuration(6, mask, seed, mixed);
        const PseudoTrap trap{3.7, 10.1};
        const Coords g = gradient(c, trap);
        const Coords g_fd = fd_gradient(c, trap);
        CHECK((g - g_fd).norm() / std::max(g_fd.norm(), 1e-300) < 1e-6);

        const Mat k = hessian(c, trap);
        const Mat k_fd = fd_hessian(c, trap);
        CHECK((k - k_fd).norm() / k_fd.norm() < 1e-6);
        CHECK((k - k.transpose()).norm() < 1e-12 * k.norm());
      }
    }
  }
}

TEST_CASE("hessian analytic values") {
  const Real gy = 6.5, gz = 17.0;
  const PseudoTrap trap{gy, gz};

  Configuration single = Configuration::uniform(Coords::Zero(1, 3));
  const Mat k1 = hessian(single, trap);
  CHECK(k1(0, 0) == doctest::Approx(1.0));
  CHECK(k1(1, 1) == doctest::Approx(gy));
  CHECK(k1(2, 2) == doctest::Approx(gz));

  // Two-ion equilibrium, planar: out-of-phase radial eigenvalue gamma_y - 1
  // (Coulomb softening 2/r^3 with r^3 = 2).
  Configuration pair = two_ion_equilibrium();
  pair.dof_mask = DofMask::planar_xy();
  pair.apply_mask();
  const Mat k = hessian(pair, trap);
  Eigen::SelfAdjointEigenSolver<Mat> es(k);
  bool found = false;
  for (Index i = 0; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()[i] - (gy - 1.0)) < 1e-9) found = true;
  CHECK(found);

  // Trace identity against the diagonal.
  Configuration c = random_configuration(5, DofMask::full(), 3);
  const Mat kr = hessian(c, trap);
  Eigen::SelfAdjointEigenSolver<Mat> esr(kr);
  CHECK(esr.eigenvalues().sum() == doctest::Approx(kr.trace()).epsilon(1e-12));
}

TEST_CASE("potential inversion symmetries") {
  const PseudoTrap trap{4.2, 9.9};
  Configuration c = random_configuration(5, DofMask::full(), 17);
  const Real v0 = potential_energy(c, trap);
  for (int axis = 0; axis < 3; ++axis) {
    Configuration ci = c;
    ci.positions.col(axis) *= -1.0;
    CHECK(potential_energy(ci, trap) == doctest::Approx(v0).epsilon(1e-14));
  }
}

TEST_CASE("paul potential values and symmetries") {
  const PaulTrap trap{0.0003, -0.0002, 0.0019, 0.28};

  Configuration single = Configuration::uniform(Coords::Zero(1, 3));
  CHECK(paul_potential_energy(single, trap, 0.3) == 0.0);
  CHECK(paul_force(single, trap, 0.3).norm() == 0.0);

  // Ion at (0,1,0) with a_y = a_yz = 0: V(t) = -q cos 2t.
  PaulTrap t2{0.0, 0.0, 0.0, 0.37};
  Coords p = Coords::Zero(1, 3);
  p(0, 1) = 1.0;
  Configuration cy = Configuration::uniform(p);
  CHECK(paul_potential_energy(cy, t2, 0.0) == doctest::Approx(-0.37).epsilon(1e-14));
  const Real t = 0.77;
  CHECK(paul_potential_energy(cy, t2, t) ==
        doctest::Approx(-0.37 * std::cos(2.0 * t)).epsilon(1e-14));

  // The yz cross term carries the full coefficient a_yz (the rotated-frame
  // derivation; reproduces the published secular frequencies).
  PaulTrap t3{0.0, 0.0, 0.0051, 0.0};
  Coords pyz = Coords::Zero(1, 3);
  pyz(0, 1) = 1.0;
  pyz(0, 2) = 1.0;
  Configuration cyz = Configuration::uniform(pyz);
  CHECK(paul_potential_energy(cyz, t3, 0.1) == doctest::Approx(0.0051).epsilon(1e-14));

  // Invariance under (y,z) -> (-y,-z)  and under y -> -y with a_yz -> -a_yz.
  Configuration c = random_configuration(4, DofMask::full(), 5);
  const PaulTrap trap2{0.0004, -0.0002, 0.0019, 0.286};
  const Real v0 = paul_potential_energy(c, trap2, 0.41);
  Configuration cf = c;
  cf.positions.col(1) *= -1.0;
  cf.positions.col(2) *= -1.0;
  CHECK(paul_potential_energy(cf, trap2, 0.41) == doctest::Approx(v0).epsilon(1e-13));
  Configuration cy2 = c;
  cy2.positions.col(1) *= -1.0;
  PaulTrap flipped = trap2;
  flipped.a_yz = -trap2.a_yz;
  CHECK(paul_potential_energy(cy2, flipped, 0.41) == doctest::Approx(v0).epsilon(1e-13));

  // Force matches central differences of the energy.
  const Coords f = paul_force(c, trap2, 0.41);
  Configuration cw = c;
  Real worst = 0.0;
  for (Index i = 0; i < c.n_ions(); ++i)
    for (int a = 0; a < 3; ++a) {
      cw.positions = c.positions;
      cw.positions(i, a) += 1e-6;
      const Real vp = paul_potential_energy(cw, trap2, 0.41);
      cw.positions(i, a) -= 2e-6;
      const Real vm = paul_potential_energy(cw, trap2, 0.41);
      worst = std::max(worst, std::abs(-(vp - vm) / 2e-6 - f(i, a)));
    }
  CHECK(worst < 1e-7);

  // Laplace constraint.
  CHECK(trap2.a_x + trap2.a_y + trap2.a_z() == doctest::Approx(0.0));
}

TEST_CASE("paul trap from rotated dc quadrupole") {
  // theta = 45 deg leaves a_y unchanged and gives a_yz = a'.
  const PaulTrap t = PaulTrap::from_rotated_dc(3e-4, -2e-4, 1.9e-3, constants::pi / 4.0, 0.286);
  CHECK(t.a_y == doctest::Approx(-2e-4).epsilon(1e-12));
  CHECK(t.a_yz == doctest::Approx(1.9e-3).epsilon(1e-12));
  CHECK(t.q == 0.286);
}

TEST_CASE("unit system round trips and scales") {
  const Real mg = 23.985041697 * constants::atomic_mass_unit;
  const Real e = constants::elementary_charge;
  const UnitSystem pseudo =
      UnitSystem::pseudopotential(mg, e, 2.0 * constants::pi * 56.7e3, 1.0e-3);
  const UnitSystem paul = UnitSystem::paul(mg, e, 2.0 * constants::pi * 6.22e6);

  for (const UnitSystem& u : {pseudo, paul}) {
    for (Real x : {1.0, 3.7e-5, 123.456}) {
      CHECK(rel_err(u.from_si_length(u.to_si_length(x)), x) < 1e-12);
      CHECK(rel_err(u.from_si_time(u.to_si_time(x)), x) < 1e-12);
      CHECK(rel_err(u.from_si_energy(u.to_si_energy(x)), x) < 1e-12);
    }
  }
  CHECK(pseudo.time_unit() == doctest::Approx(1.0 / (2.0 * constants::pi * 56.7e3)));
  CHECK(paul.time_unit() == doctest::Approx(2.0 / (2.0 * constants::pi * 6.22e6)));
  // d^3 = e_g^2 / (m omega^2), Gaussian convention.
  const Real eg2 = constants::coulomb_constant * e * e;
  const Real wx = 2.0 * constants::pi * 56.7e3;
  CHECK(rel_err(std::pow(pseudo.length_unit(), 3.0), eg2 / (mg * wx * wx)) < 1e-12);
  const Real half = constants::pi * 6.22e6;
  CHECK(rel_err(std::pow(paul.length_unit(), 3.0), eg2 / (mg * half * half)) < 1e-12);
  // Thermal scale: ~2.1e-3 nondimensional at the Mg+ Doppler limit.
  CHECK(pseudo.doppler_energy() == doctest::Approx(2.14e-3).epsilon(0.05));
}

TEST_CASE("floquet analysis reproduces the fitted experimental frequencies") {
  // a_x=0.000328, a_y=-0.0002, a_yz=0.0019, q=0.286, Omega = 2 pi 6.22 MHz.
  const PaulTrap trap{0.000328, -0.0002, 0.0019, 0.286};
  const SecularModes sec = pseudopotential_from_paul(trap);
  const Real f_unit = 0.5 * 6.22e6;  // Omega/2 in Hz / (2 pi) steps below

  const Real fx = sec.omega[0] * f_unit;
  const Real fy = sec.omega[1] * f_unit;
  const Real fz = sec.omega[2] * f_unit;
  CHECK(rel_err(fx, 56.7e3) < 0.02);
  CHECK(rel_err(fy, 623.3e3) < 0.02);
  CHECK(rel_err(fz / fy, 1.047) < 0.02);

  // Principal axes orthonormal; gamma_y consistent with the frequencies.
  CHECK((sec.axes.transpose() * sec.axes - Mat3::Identity()).norm() < 1e-9);
  CHECK(sec.pseudo.gamma_y == doctest::Approx(std::pow(sec.omega[1] / sec.omega[0], 2)));

  // Lowest-order pseudopotential cross-check at a_yz = 0.
  const PaulTrap t0{0.000328, -0.0002, 0.0, 0.286};
  const SecularModes s0 = pseudopotential_from_paul(t0);
  CHECK(rel_err(s0.omega[1], std::sqrt(-0.0002 + 0.286 * 0.286 / 2.0)) < 0.05);
  // Axes aligned with y and z when a_yz = 0.
  CHECK(std::abs(s0.axes(1, 1)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(s0.axes(2, 2)) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("floquet pure harmonic limit and instability reporting") {
  // q = 0: the axial frequency is exactly sqrt(a_x); Earnshaw makes at least
  // one radial axis unstable, reported via allow_unstable.
  const PaulTrap trap{0.0004, -0.0002, 0.0, 0.0};
  CHECK_THROWS_AS(pseudopotential_from_paul(trap), FloquetInstabilityError);
  const SecularModes sec = pseudopotential_from_paul(trap, /*allow_unstable=*/true);
  CHECK(sec.stable[0]);
  CHECK(sec.omega[0] == doctest::Approx(0.02).epsilon(1e-12));
  CHECK_FALSE(sec.all_stable());
  bool has_modulus = false;
  for (int k = 1; k < 3; ++k)
    if (!sec.stable[size_t(k)] && sec.multiplier_modulus[size_t(k)] > 1.0) has_modulus = true;
  CHECK(has_modulus);
}

TEST_CASE("configuration csv round trip") {
  Configuration c = random_configuration(4, DofMask::full(), 99, true);
  c.species[2].bright = false;
  const std::string csv = to_csv(c);
  const Configuration back = configuration_from_csv(csv);
  CHECK((back.positions - c.positions).norm() < 1e-14);
  for (size_t i = 0; i < c.species.size(); ++i) {
    CHECK(back.species[i].mass_ratio == doctest::Approx(c.species[i].mass_ratio));
    CHECK(back.species[i].bright == c.species[i].bright);
  }
}

TEST_CASE("configuration json embeds the trap model and unit system") {
  Configuration c = random_configuration(3, DofMask::full(), 4);
  const UnitSystem units =
      UnitSystem::pseudopotential(23.985 * constants::atomic_mass_unit,
                                  constants::elementary_charge, 2.0 * constants::pi * 56.7e3);
  const std::string j = configuration_json(c, PseudoTrap{9.0, 16.0}, std::nullopt, units);
  CHECK(j.find("\"gamma_y\": 9.0") != std::string::npos);
  CHECK(j.find("pseudopotential") != std::string::npos);
  CHECK(j.find("length_unit_m") != std::string::npos);
  const std::string jp =
      configuration_json(c, std::nullopt, PaulTrap{3e-4, -2e-4, 1.9e-3, 0.286}, std::nullopt);
  CHECK(jp.find("\"a_yz\"") != std::string::npos);
}

TEST_CASE("masked coordinates stay zero and are validated") {
  Configuration c = random_configuration(3, DofMask::planar_xy(), 7);
  CHECK(c.positions.col(2).cwiseAbs().maxCoeff() == 0.0);
  c.positions(0, 2) = 0.5;
  CHECK_THROWS_AS(c.validate(), InvalidArgumentError);
}
