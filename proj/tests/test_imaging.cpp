#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "kinklab/dynamics.hpp"
#include "kinklab/imaging.hpp"
#include "kinklab/io.hpp"
#include "kinklab/modes.hpp"
#include "kinklab/statics.hpp"
#include "test_helpers.hpp"

using namespace kinklab;
using namespace kinklab::testing;

TEST_CASE("projection conventions") {
  Coords p(1, 3);
  p << 1.3, -0.4, 2.7;

  CameraModel cam;
  cam.azimuth_deg = 0.0;
  cam.elevation_deg = 0.0;
  Points2 q = project(p, cam);
  CHECK(q(0, 0) == doctest::Approx(1.3));
  CHECK(q(0, 1) == doctest::Approx(-0.4));

  // Elevation -90 deg: the image v axis picks up -z.
  cam.elevation_deg = -90.0;
  q = project(p, cam);
  CHECK(q(0, 0) == doctest::Approx(1.3));
  CHECK(q(0, 1) == doctest::Approx(-2.7));

  // A crystal in the y = -z plane viewed at -45 deg keeps its full width,
  // while one in the y = 0 plane appears compressed by sqrt(2).
  cam.elevation_deg = -45.0;
  Coords crystal(1, 3);
  const Real w = 0.9;
  crystal << 0.0, w / std::sqrt(2.0), -w / std::sqrt(2.0);  // radial extent w
  q = project(crystal, cam);
  CHECK(std::abs(q(0, 1)) == doctest::Approx(w).epsilon(1e-12));
  Coords flat(1, 3);
  flat << 0.0, w, 0.0;
  q = project(flat, cam);
  CHECK(std::abs(q(0, 1)) == doctest::Approx(w / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("projection is linear") {
  CameraModel cam;
  cam.azimuth_deg = -1.92;
  cam.elevation_deg = -44.5;
  Rng rng(4);
  Coords a(5, 3), b(5, 3);
  for (Index i = 0; i < 5; ++i)
    for (int k = 0; k < 3; ++k) {
      a(i, k) = rng.normal();
      b(i, k) = rng.normal();
    }
  const Points2 lhs = project(2.0 * a - 3.0 * b, cam);
  const Points2 rhs = 2.0 * project(a, cam) - 3.0 * project(b, cam);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("render conserves flux and places spots at projected positions") {
  CameraModel cam;
  cam.pixel_size = 1.0;
  cam.psf_sigma = 1.5;
  cam.width_px = 128;
  cam.height_px = 64;

  Coords p(3, 3);
  p << -20.0, 3.0, 0.0, 0.5, -2.0, 0.0, 21.0, 4.0, 0.0;
  Configuration c = Configuration::uniform(p);
  const IntegrationImage img = render(c, cam);

  CHECK(img.total_intensity() == doctest::Approx(3.0).epsilon(1e-6));

  const std::vector<SpotMetrics> spots = spot_metrics(img);
  REQUIRE(spots.size() == 3);
  const Points2 proj = project(p, cam);
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(spots[size_t(k)].centroid_u - proj(k, 0)) < 0.1);
    CHECK(std::abs(spots[size_t(k)].centroid_v - proj(k, 1)) < 0.1);
    // Static ion: width = psf_sigma within 2%.
    CHECK(spots[size_t(k)].width_u == doctest::Approx(1.5).epsilon(0.02));
    CHECK(spots[size_t(k)].width_v == doctest::Approx(1.5).epsilon(0.02));
    CHECK_FALSE(spots[size_t(k)].overlapping);
  }
}

TEST_CASE("dark ions deposit nothing") {
  CameraModel cam;
  cam.width_px = 64;
  cam.height_px = 64;
  cam.psf_sigma = 1.0;
  Coords p(2, 3);
  p << -5.0, 0.0, 0.0, 5.0, 0.0, 0.0;
  Configuration c = Configuration::uniform(p);
  c.species[1].bright = false;
  const IntegrationImage img = render(c, cam);
  CHECK(img.n_bright == 1);
  CHECK(img.total_intensity() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(spot_metrics(img).size() == 1);
}

TEST_CASE("rendering is invariant under sample reordering") {
  CameraModel cam;
  cam.width_px = 64;
  cam.height_px = 32;
  Coords a = Coords::Zero(1, 3), b = Coords::Zero(1, 3);
  a(0, 0) = -3.0;
  b(0, 0) = 4.0;
  const std::vector<IonSpecies> sp{IonSpecies::reference()};
  const IntegrationImage i1 = render(std::vector<Coords>{a, b, a}, sp, cam);
  const IntegrationImage i2 = render(std::vector<Coords>{a, a, b}, sp, cam);
  CHECK((i1.intensity - i2.intensity).abs().maxCoeff() < 1e-15);
}

TEST_CASE("harmonic oscillation widens the spot to A/sqrt(2)") {
  CameraModel cam;
  cam.pixel_size = 0.2;
  cam.psf_sigma = 0.2;  // one pixel
  cam.width_px = 256;
  cam.height_px = 128;

  const Real amplitude = 4.0;
  std::vector<Coords> frames;
  for (int k = 0; k < 800; ++k) {
    Coords p = Coords::Zero(1, 3);
    p(0, 0) = amplitude * std::cos(2.0 * constants::pi * k / 100.0);
    frames.push_back(p);
  }
  const IntegrationImage img = render(frames, {IonSpecies::reference()}, cam);
  const std::vector<SpotMetrics> spots = spot_metrics(img, 0.005);
  REQUIRE(spots.size() == 1);
  // RMS of a sinusoid: A/sqrt(2), psf in quadrature.
  const Real expected = std::sqrt(amplitude * amplitude / 2.0 + cam.psf_sigma * cam.psf_sigma);
  CHECK(spots[0].width_u == doctest::Approx(expected).epsilon(0.05));
  CHECK(spots[0].width_v == doctest::Approx(cam.psf_sigma).epsilon(0.05));
}

TEST_CASE("two ions ten sigma apart resolve into two spots") {
  CameraModel cam;
  cam.pixel_size = 1.0;
  cam.psf_sigma = 1.0;
  cam.width_px = 64;
  cam.height_px = 32;
  Coords p(2, 3);
  p << -5.0, 0.0, 0.0, 5.0, 0.0, 0.0;
  const IntegrationImage img = render(Configuration::uniform(p), cam);
  const std::vector<SpotMetrics> spots = spot_metrics(img);
  REQUIRE(spots.size() == 2);
  CHECK(std::abs(spots[0].centroid_u - -5.0) < 0.1);
  CHECK(std::abs(spots[1].centroid_u - 5.0) < 0.1);
}

TEST_CASE("pgm and metadata emission") {
  CameraModel cam;
  cam.width_px = 32;
  cam.height_px = 16;
  Coords p = Coords::Zero(1, 3);
  const IntegrationImage img = render(Configuration::uniform(p), cam);
  const std::string path = "/tmp/kinklab_test_image.pgm";
  write_pgm16(img, path);
  FILE* f = std::fopen(path.c_str(), "rb");
  REQUIRE(f != nullptr);
  char magic[3] = {};
  REQUIRE(std::fread(magic, 1, 2, f) == 2);
  std::fclose(f);
  CHECK(magic[0] == 'P');
  CHECK(magic[1] == '5');
  const std::string meta = image_metadata_json(img);
  CHECK(meta.find("pgm_normalization") != std::string::npos);
  std::remove(path.c_str());
}

namespace {

struct KinkImageAnalysis {
  Real median_width = 0.0;
  Real core_width_a = 0.0;  // the two ions with the largest |z| (kink core)
  Real core_width_b = 0.0;
};

// Thermal integration image of the N-ion kink at the experimental
// parameters, viewed onto the crystal plane; per-ion widths from fixed
// windows at the projected equilibrium positions (the blurred core tails
// overlap, so connected components would merge them).
KinkImageAnalysis thermal_kink_widths(Index n, std::uint64_t seed) {
  const Real gy = 121.0, ratio = 1.047;
  const PseudoTrap trap{gy, gy * ratio * ratio};
  const Configuration ks = make_seed(SeedSpec::odd_kink(n), trap, DofMask::full());
  const CriticalPoint kink = relax(ks, trap);
  const ModeSpectrum spec = normal_modes(kink, trap);
  const Real mg = 23.985041697 * constants::atomic_mass_unit;
  const UnitSystem units = UnitSystem::pseudopotential(mg, constants::elementary_charge,
                                                       2.0 * constants::pi * 56.7e3, 1.0026e-3);
  const State s0 = thermal_state(kink, spec, units, units.doppler_temperature(), seed);

  IntegrateOptions opts;
  opts.stride = 25;
  opts.record_energy = false;
  const Trajectory traj = integrate(s0, kink.config, trap, 600.0, opts);

  CameraModel cam;
  cam.elevation_deg = 0.0;
  cam.pixel_size = 0.04;
  cam.psf_sigma = 0.04;
  cam.width_px = 512;
  cam.height_px = 64;
  const IntegrationImage img = render(traj, kink.config.species, cam);

  const Points2 centers = project(kink.config.positions, cam);
  const std::vector<SpotMetrics> spots =
      spot_metrics_windows(img, centers, 0.9 * kink.config.lattice_spacing());

  std::vector<Real> ws;
  for (const auto& s : spots) ws.push_back(std::hypot(s.width_u, s.width_v));
  std::vector<Real> sorted = ws;
  std::nth_element(sorted.begin(), sorted.begin() + long(sorted.size() / 2), sorted.end());

  std::vector<Index> by_z(static_cast<size_t>(n), 0);
  for (Index i = 0; i < n; ++i) by_z[size_t(i)] = i;
  std::sort(by_z.begin(), by_z.end(), [&](Index a, Index b) {
    return std::abs(kink.config.positions(a, 2)) > std::abs(kink.config.positions(b, 2));
  });

  KinkImageAnalysis out;
  out.median_width = sorted[sorted.size() / 2];
  out.core_width_a = ws[size_t(by_z[0])];
  out.core_width_b = ws[size_t(by_z[1])];
  return out;
}

}  // namespace

TEST_CASE("thermal 50-ion kink image: both core spots blurred symmetrically") {
  const KinkImageAnalysis a = thermal_kink_widths(50, 12345);
  CHECK(a.core_width_a >= 1.5 * a.median_width);
  CHECK(a.core_width_b >= 1.5 * a.median_width);
  // Even-N pattern: symmetric cores.
  CHECK(std::abs(a.core_width_a - a.core_width_b) /
            std::max(a.core_width_a, a.core_width_b) <
        0.15);
}

TEST_CASE("thermal 51-ion kink image: asymmetric core blurring") {
  const KinkImageAnalysis a = thermal_kink_widths(51, 777);
  const Real wide = std::max(a.core_width_a, a.core_width_b);
  const Real narrow = std::min(a.core_width_a, a.core_width_b);
  // One core spot more blurred than its neighbour, which itself is still
  // clearly wider than the ions outside the core.
  CHECK(wide >= 1.2 * narrow);
  CHECK(narrow >= 1.5 * a.median_width);
}

TEST_CASE("kink-mode excitation at 2/3 T_D reproduces the thermal blurring pattern") {
  const Real gy = 121.0, ratio = 1.047;
  const PseudoTrap trap{gy, gy * ratio * ratio};
  const Configuration ks = make_seed(SeedSpec::odd_kink(50), trap, DofMask::full());
  const CriticalPoint kink = relax(ks, trap);
  const ModeSpectrum spec = normal_modes(kink, trap);
  const Real mg = 23.985041697 * constants::atomic_mass_unit;
  const UnitSystem units = UnitSystem::pseudopotential(mg, constants::elementary_charge,
                                                       2.0 * constants::pi * 56.7e3, 1.0026e-3);
  const State s0 =
      excite_mode(kink, spec, *spec.low_mode_index, (2.0 / 3.0) * units.doppler_energy());

  IntegrateOptions opts;
  opts.stride = 25;
  opts.record_energy = false;
  const Trajectory traj = integrate(s0, kink.config, trap, 600.0, opts);

  CameraModel cam;
  cam.elevation_deg = 0.0;
  cam.pixel_size = 0.04;
  cam.psf_sigma = 0.04;
  cam.width_px = 512;
  cam.height_px = 64;
  const IntegrationImage img = render(traj, kink.config.species, cam);
  const Points2 centers = project(kink.config.positions, cam);
  const std::vector<SpotMetrics> spots =
      spot_metrics_windows(img, centers, 0.9 * kink.config.lattice_spacing());

  std::vector<Real> ws;
  for (const auto& s : spots) ws.push_back(std::hypot(s.width_u, s.width_v));
  std::vector<Real> sorted = ws;
  std::nth_element(sorted.begin(), sorted.begin() + long(sorted.size() / 2), sorted.end());
  const Real med = sorted[sorted.size() / 2];

  // Spots are widest at the kink core, as in the thermal rendering.
  Index widest = 0;
  for (Index i = 1; i < 50; ++i)
    if (ws[size_t(i)] > ws[size_t(widest)]) widest = i;
  CHECK(std::abs(kink.config.positions(widest, 0)) < 2.0 * kink.config.lattice_spacing());
  CHECK(ws[size_t(widest)] >= 1.5 * med);
}
