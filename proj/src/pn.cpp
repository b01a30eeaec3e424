#include "kinklab/pn.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include <Eigen/Eigenvalues>

#include "kinklab/dynamics.hpp"
#include "kinklab/errors.hpp"
#include "kinklab/potential.hpp"

namespace kinklab {

const PNSite* PNLandscape::site(int offset) const {
  for (const PNSite& s : sites)
    if (s.offset == offset) return &s;
  return nullptr;
}

Real PNLandscape::to_doppler_units(Real energy_nd) const {
  if (!units) throw InvalidArgumentError("PNLandscape: no unit system attached");
  return energy_nd / units->doppler_energy();
}

Real TwoKinkAnalysis::barrier_in_doppler_units() const {
  if (!units) throw InvalidArgumentError("TwoKinkAnalysis: no unit system attached");
  return annihilation_barrier / units->doppler_energy();
}

namespace {

// Relax a seed and decide whether it converged to a stable kink pinned at
// the requested site (within 0.75 sites of the boundary position).
std::optional<CriticalPoint> settle_site(const Configuration& seed, const PseudoTrap& trap,
                                         const RelaxOptions& ropts,
                                         std::optional<Real> target_x = std::nullopt) {
  CriticalPoint cp;
  try {
    cp = relax(seed, trap, ropts);
  } catch (const ConvergenceError&) {
    return std::nullopt;
  } catch (const SingularGeometryError&) {
    return std::nullopt;
  }
  if (!cp.stable) return std::nullopt;
  if (target_x) {
    const Real site = seed.lattice_spacing();
    if (std::abs(domain_wall_position(cp.config) - *target_x) > 0.75 * site)
      return std::nullopt;
  }
  return cp;
}

bool is_kink_state(const CriticalPoint& cp, const CriticalPoint& ground, Real min_excess = 1e-6) {
  return cp.energy > ground.energy + min_excess;
}

// Distance between the two strongest axial-compression peaks, in site units.
Real two_core_separation(const Coords& positions, Real spacing) {
  const Index n = positions.rows();
  std::vector<Real> x(static_cast<size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i) x[size_t(i)] = positions(i, 0);
  std::sort(x.begin(), x.end());
  std::vector<Real> mid(size_t(n) - 1), comp(size_t(n) - 1);
  for (size_t k = 0; k + 1 < x.size(); ++k) {
    mid[k] = 0.5 * (x[k] + x[k + 1]);
    comp[k] = 1.0 / std::max(x[k + 1] - x[k], Real(1e-9));
  }
  size_t first = 0;
  for (size_t k = 1; k < comp.size(); ++k)
    if (comp[k] > comp[first]) first = k;
  size_t second = size_t(-1);
  for (size_t k = 0; k < comp.size(); ++k) {
    if (std::abs(int(k) - int(first)) < 2) continue;
    if (second == size_t(-1) || comp[k] > comp[second]) second = k;
  }
  if (second == size_t(-1)) return 0.0;
  return std::abs(mid[first] - mid[second]) / spacing;
}

}  // namespace

std::vector<Coords> string_path(const Configuration& a, const Configuration& b,
                                const PseudoTrap& trap, const StringOptions& opts) {
  if (a.n_ions() != b.n_ions())
    throw InvalidArgumentError("string_path: endpoint ion counts differ");
  const int ni = opts.n_images;
  std::vector<Coords> path(static_cast<size_t>(ni));
  for (int k = 0; k < ni; ++k) {
    const Real f = Real(k) / Real(ni - 1);
    path[size_t(k)] = (1.0 - f) * a.positions + f * b.positions;
  }
  Configuration work = a;

  auto grad_at = [&](const Coords& p) {
    work.positions = p;
    work.apply_mask();
    return gradient(work, trap);
  };

  for (int it = 0; it < opts.iterations; ++it) {
    // Steepest descent perpendicular to the local tangent.
    std::vector<Coords> next = path;
    for (int k = 1; k + 1 < ni; ++k) {
      Coords tau = path[size_t(k + 1)] - path[size_t(k - 1)];
      const Real tn = tau.norm();
      if (tn > 0.0) tau /= tn;
      Coords g = grad_at(path[size_t(k)]);
      const Real proj = (g.array() * tau.array()).sum();
      g -= proj * tau;
      next[size_t(k)] = path[size_t(k)] - opts.step * g;
    }
    // Reparametrize to equal arclength.
    std::vector<Real> arc(static_cast<size_t>(ni), 0.0);
    for (int k = 1; k < ni; ++k)
      arc[size_t(k)] = arc[size_t(k) - 1] + (next[size_t(k)] - next[size_t(k) - 1]).norm();
    std::vector<Coords> resampled(static_cast<size_t>(ni));
    resampled[0] = next[0];
    resampled[size_t(ni) - 1] = next[size_t(ni) - 1];
    for (int k = 1; k + 1 < ni; ++k) {
      const Real s = arc.back() * Real(k) / Real(ni - 1);
      const auto hi = std::upper_bound(arc.begin(), arc.end(), s);
      const size_t j = std::min(size_t(std::max<std::ptrdiff_t>(hi - arc.begin(), 1)),
                                size_t(ni) - 1);
      const Real denom = std::max(arc[j] - arc[j - 1], Real(1e-300));
      const Real f = (s - arc[j - 1]) / denom;
      resampled[size_t(k)] = next[j - 1] + f * (next[j] - next[j - 1]);
    }
    path = std::move(resampled);
  }
  return path;
}

CriticalPoint string_saddle(const Configuration& a, const Configuration& b,
                            const PseudoTrap& trap, const StringOptions& opts,
                            const NewtonOptions& newton) {
  const std::vector<Coords> path = string_path(a, b, trap, opts);
  Configuration work = a;

  // Newton-polish the maximum-energy image.
  Real best_e = -std::numeric_limits<Real>::infinity();
  size_t best_k = 1;
  for (size_t k = 0; k < path.size(); ++k) {
    work.positions = path[k];
    work.apply_mask();
    const Real e = potential_energy(work, trap);
    if (e > best_e) {
      best_e = e;
      best_k = k;
    }
  }
  work.positions = path[best_k];
  work.apply_mask();
  NewtonOptions nopts = newton;
  nopts.max_iterations = std::max(newton.max_iterations, 150);
  return newton_critical(work, trap, nopts);
}

PNLandscape pn_extract(const PseudoTrap& trap, Index n_ions, const PNOptions& opts) {
  PNLandscape land;
  land.trap = trap;
  land.n_ions = n_ions;
  land.units = opts.units;
  switch (opts.kink_kind) {
    case SeedSpec::Kind::OddKink: land.kink_type = "odd"; break;
    case SeedSpec::Kind::ExtendedKinkSeed: land.kink_type = "extended"; break;
    default: land.kink_type = "kink"; break;
  }

  const Configuration zz = make_seed(SeedSpec::zigzag(n_ions), trap, opts.mask);
  land.ground = relax(zz, trap, opts.relax);
  if (!land.ground.stable)
    throw ConvergenceError("pn_extract: zigzag ground state search failed");
  land.ground_energy = land.ground.energy;

  const int n_sites = 2 * opts.max_offset + 1;
  land.sites.assign(size_t(n_sites), PNSite{});
  auto settle_offset = [&](int idx) {
    const int offset = idx - opts.max_offset;
    PNSite site;
    site.offset = offset;
    SeedSpec spec = offset == 0 ? SeedSpec{opts.kink_kind, n_ions}
                                : SeedSpec::displaced_kink(n_ions, offset);
    Configuration seed;
    try {
      seed = make_seed(spec, trap, opts.mask);
    } catch (const InvalidArgumentError&) {
      land.sites[size_t(idx)] = site;
      return;
    }
    std::optional<CriticalPoint> cp =
        settle_site(seed, trap, opts.relax, kink_site_position(seed, offset));
    if (cp && is_kink_state(*cp, land.ground)) {
      site.exists = true;
      site.stable = cp->stable;
      site.energy = cp->energy - land.ground_energy;
      site.point = std::move(cp);
    }
    land.sites[size_t(idx)] = site;
  };
  if (opts.jobs > 1) {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(opts.jobs, n_sites); ++t)
      pool.emplace_back([&] {
        for (int idx = next.fetch_add(1); idx < n_sites; idx = next.fetch_add(1))
          settle_offset(idx);
      });
    for (auto& th : pool) th.join();
  } else {
    for (int idx = 0; idx < n_sites; ++idx) settle_offset(idx);
  }

  // Saddles between adjacent existing sites: interpolation midpoints with a
  // couple of fractions, string-method fallback.
  for (size_t k = 0; k + 1 < land.sites.size(); ++k) {
    const PNSite& lo = land.sites[k];
    const PNSite& hi = land.sites[k + 1];
    if (!lo.exists || !hi.exists) continue;
    PNBarrier barrier;
    barrier.site_lo = lo.offset;
    bool found = false;
    for (const Real f : {0.5, 0.35, 0.65}) {
      Configuration mid = lo.point->config;
      mid.positions = (1.0 - f) * lo.point->config.positions + f * hi.point->config.positions;
      mid.apply_mask();
      CriticalPoint sp;
      try {
        sp = newton_critical(mid, trap, opts.relax.newton);
      } catch (const ConvergenceError&) {
        continue;
      } catch (const SingularGeometryError&) {
        continue;
      }
      if (sp.n_negative == 1 && sp.energy >= std::max(lo.point->energy, hi.point->energy)) {
        barrier.saddle_energy = sp.energy - land.ground_energy;
        barrier.n_negative = sp.n_negative;
        barrier.point = std::move(sp);
        found = true;
        break;
      }
    }
    if (!found) {
      try {
        CriticalPoint sp = string_saddle(lo.point->config, hi.point->config, trap, {},
                                         opts.relax.newton);
        if (sp.n_negative >= 1 && sp.energy >= std::max(lo.point->energy, hi.point->energy)) {
          barrier.saddle_energy = sp.energy - land.ground_energy;
          barrier.n_negative = sp.n_negative;
          barrier.point = std::move(sp);
          found = true;
        }
      } catch (const ConvergenceError&) {
      }
    }
    if (found) land.barriers.push_back(std::move(barrier));
  }
  return land;
}

Real kink_rest_energy(const PseudoTrap& trap, Index n_ions, const PNOptions& opts) {
  const Configuration zz = make_seed(SeedSpec::zigzag(n_ions), trap, opts.mask);
  const CriticalPoint ground = relax(zz, trap, opts.relax);
  const Configuration kseed = make_seed(SeedSpec{opts.kink_kind, n_ions}, trap, opts.mask);
  const CriticalPoint kink = relax(kseed, trap, opts.relax);
  if (!kink.stable)
    throw ConvergenceError("kink_rest_energy: centred kink unstable at these parameters");
  if (!is_kink_state(kink, ground))
    throw ConvergenceError("kink_rest_energy: kink seed relaxed to the ground state");
  return kink.energy - ground.energy;
}

TwoKinkAnalysis two_kink_analysis(const PseudoTrap& trap, Index n_ions,
                                  const std::vector<int>& separations, const PNOptions& opts) {
  TwoKinkAnalysis out;
  out.units = opts.units;

  const Configuration zz = make_seed(SeedSpec::zigzag(n_ions), trap, opts.mask);
  const CriticalPoint ground = relax(zz, trap, opts.relax);
  out.kink_energy = kink_rest_energy(trap, n_ions, opts);

  std::optional<CriticalPoint> minimal;
  for (const int sep : separations) {
    TwoKinkSeparation s;
    s.separation = sep;
    Configuration seed;
    try {
      seed = make_seed(SeedSpec::two_kink(n_ions, sep), trap, opts.mask);
    } catch (const InvalidArgumentError&) {
      out.separations.push_back(s);
      continue;
    }
    std::optional<CriticalPoint> cp = settle_site(seed, trap, opts.relax);
    if (cp && is_kink_state(*cp, ground)) {
      s.exists = true;
      s.energy = cp->energy - ground.energy;
      s.interaction = s.energy - 2.0 * out.kink_energy;
      s.measured_separation =
          two_core_separation(cp->config.positions, cp->config.lattice_spacing());
      if (!minimal || cp->energy < minimal->energy) minimal = *cp;
      s.point = std::move(cp);
    }
    out.separations.push_back(std::move(s));
  }

  if (minimal) {
    // Symmetric collision channel: string from the two-kink state to the
    // zigzag, Newton-polished at the path maximum.
    const std::vector<Coords> path = string_path(minimal->config, ground.config, trap, {});
    Configuration work = minimal->config;
    size_t k_max = 0;
    Real e_max = -std::numeric_limits<Real>::infinity();
    std::vector<Real> image_energy(path.size());
    for (size_t k = 0; k < path.size(); ++k) {
      work.positions = path[k];
      work.apply_mask();
      image_energy[k] = potential_energy(work, trap);
      if (image_energy[k] > e_max) {
        e_max = image_energy[k];
        k_max = k;
      }
    }
    // Adiabatic repulsion curve: the kinks approach from the stable pair
    // (image 0) up to the transition image.
    const Real spacing = minimal->config.lattice_spacing();
    for (size_t k = 0; k <= k_max; ++k)
      out.approach_curve.push_back(
          {two_core_separation(path[k], spacing), image_energy[k] - ground.energy});

    work.positions = path[k_max];
    work.apply_mask();
    NewtonOptions nopts = opts.relax.newton;
    nopts.max_iterations = std::max(nopts.max_iterations, 150);
    CriticalPoint barrier_point = newton_critical(work, trap, nopts);
    out.annihilation_barrier = barrier_point.energy - minimal->energy;
    out.barrier_n_negative = barrier_point.n_negative;

    // If the transition point carries a second unstable direction, splitting
    // along it reaches the lower asymmetric index-1 channel.
    if (barrier_point.n_negative >= 2) {
      const Mat k = hessian(barrier_point.config, trap);
      Eigen::SelfAdjointEigenSolver<Mat> es(k);
      const Vec v2 = es.eigenvectors().col(1);
      Configuration seed = barrier_point.config;
      Vec x = seed.active_coords() + 0.03 * v2;
      seed.set_active_coords(x);
      try {
        CriticalPoint asym = newton_critical(seed, trap, opts.relax.newton);
        if (asym.n_negative == 1 && asym.energy > minimal->energy)
          out.asymmetric_channel_barrier = asym.energy - minimal->energy;
      } catch (const ConvergenceError&) {
      }
    }
    out.barrier_point = std::move(barrier_point);
  }
  return out;
}

MassDefectLandscape mass_defect_landscape(const PseudoTrap& trap, Index n_ions, Index dark_site,
                                          Real mass_from, Real mass_to, Real step,
                                          SeedSpec::Kind base, DofMask mask) {
  MassDefectLandscape out;
  IonSpecies dark;
  dark.mass_ratio = mass_from;
  dark.bright = false;
  const Configuration seed =
      make_seed(SeedSpec::dark_ion(n_ions, dark_site, dark, base), trap, mask);
  CriticalPoint start = relax(seed, trap);

  // All-bright reference ground state; its energy does not vary with the
  // defect mass, so compute it once.
  const Configuration zz = make_seed(SeedSpec::zigzag(n_ions), trap, mask);
  const CriticalPoint ground = relax(zz, trap);

  StepControl ctl;
  ctl.initial_step = std::abs(step);
  out.branch = trace_branch(start, trap, Parameter::mass_ratio(dark_site), mass_from, mass_to, ctl);

  for (const BranchSample& s : out.branch.samples) {
    MassDefectSample m;
    m.mass_ratio = s.parameter;
    m.stable = s.point.stable;
    m.kink_energy = s.point.energy - ground.energy;
    Real bright_extent = 0.0;
    for (Index i = 0; i < s.point.config.n_ions(); ++i) {
      const Real r = std::hypot(s.point.config.positions(i, 1), s.point.config.positions(i, 2));
      if (s.point.config.species[size_t(i)].bright)
        bright_extent = std::max(bright_extent, r);
      else
        m.dark_radial_displacement = r;
    }
    m.bright_radial_extent = bright_extent;
    out.samples.push_back(m);
  }
  return out;
}

}  // namespace kinklab
