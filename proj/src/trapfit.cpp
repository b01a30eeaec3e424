#include "kinklab/trapfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Eigenvalues>

#include "kinklab/assignment.hpp"
#include "kinklab/dynamics.hpp"
#include "kinklab/errors.hpp"
#include "kinklab/lm.hpp"
#include "kinklab/statics.hpp"
#include "kinklab/units.hpp"

namespace kinklab {

void Observation::validate() const {
  if (points.rows() < 2) throw InvalidArgumentError("Observation: need at least 2 ions");
  if (!points.allFinite()) throw InvalidArgumentError("Observation: non-finite coordinate");
}

Vec FitParams::to_vec() const {
  Vec v(6);
  v << a_x, a_y, a_yz, q, azimuth_deg, elevation_deg;
  return v;
}

FitParams FitParams::from_vec(const Vec& v) {
  if (v.size() != 6) throw InvalidArgumentError("FitParams: expected 6 parameters");
  return {v[0], v[1], v[2], v[3], v[4], v[5]};
}

namespace {

// Equilibrium in the principal (pseudopotential) frame, nondimensional, with
// a warm-start cache to keep the thousands of objective evaluations cheap.
class EquilibriumSolver {
 public:
  Configuration solve(const PseudoTrap& pseudo, Index n_ions, bool kink_frame,
                      std::optional<Index> dark_site, Real dark_mass,
                      const std::string& cache_key) {
    auto it = cache_.find(cache_key);
    if (it != cache_.end()) {
      Configuration seed = it->second;
      if (dark_site) set_dark(seed, *dark_site, dark_mass);
      try {
        NewtonOptions nopts;
        nopts.max_iterations = 60;
        Configuration out = newton_critical(seed, pseudo, nopts).config;
        const Real disp = (out.positions - seed.positions).rowwise().norm().maxCoeff();
        // Newton preserves the z = 0 subspace exactly, so a planar result
        // must be re-seeded when it is transversally unstable (quasi-3D
        // regime), or the model could never develop the out-of-plane
        // structure the data carries.
        if (disp < 0.5 * seed.lattice_spacing() && !(planar(out) && z_unstable(out, pseudo))) {
          cache_[cache_key] = out;
          return out;
        }
      } catch (const ConvergenceError&) {
      } catch (const SingularGeometryError&) {
      }
    }
    Configuration fresh = build_fresh(pseudo, n_ions, kink_frame, dark_site, dark_mass);
    cache_[cache_key] = fresh;
    return fresh;
  }

 private:
  static bool planar(const Configuration& c) {
    return c.positions.col(2).cwiseAbs().maxCoeff() < 1e-8;
  }

  static bool z_unstable(const Configuration& c, const PseudoTrap& pseudo) {
    const Index n = c.n_ions();
    Mat cz = Mat::Zero(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const Real r = (c.positions.row(i) - c.positions.row(j)).norm();
        const Real w = c.species[size_t(i)].charge_ratio * c.species[size_t(j)].charge_ratio /
                       (r * r * r);
        cz(i, i) += w / c.species[size_t(i)].mass_ratio;
        cz(i, j) -= w / c.species[size_t(i)].mass_ratio;
      }
    // Largest Coulomb softening vs the weakest-confined ion's gamma_z.
    Real min_trap = std::numeric_limits<Real>::infinity();
    for (const auto& s : c.species)
      min_trap = std::min(min_trap,
                          pseudo.gamma_z * s.charge_ratio * s.charge_ratio / s.mass_ratio /
                              s.mass_ratio);
    Eigen::SelfAdjointEigenSolver<Mat> es(cz);
    return es.eigenvalues()[n - 1] > min_trap;
  }

  static void set_dark(Configuration& c, Index site, Real mass) {
    const Index ion = c.axial_order()[size_t(site)];
    for (auto& s : c.species) s = IonSpecies::reference();
    c.species[size_t(ion)] = IonSpecies{mass, 1.0, false};
  }

  static Configuration build_fresh(const PseudoTrap& pseudo, Index n_ions, bool kink_frame,
                                   std::optional<Index> dark_site, Real dark_mass) {
    RelaxOptions ropts;
    ropts.schedule.friction = 0.8;
    ropts.schedule.duration = 300.0 * 2.0 * constants::pi;
    if (!dark_site) {
      const SeedSpec spec =
          kink_frame ? SeedSpec::odd_kink(n_ions) : SeedSpec::zigzag(n_ions);
      const Configuration seed = make_seed(spec, pseudo, DofMask::full());
      const CriticalPoint cp = relax(seed, pseudo, ropts);
      if (kink_frame && !cp.stable)
        throw ConvergenceError("no stable kink at these parameters");
      return cp.config;
    }
    IonSpecies dark{dark_mass, 1.0, false};
    const Configuration seed =
        make_seed(SeedSpec::dark_ion(n_ions, *dark_site, dark), pseudo, DofMask::full());
    return relax(seed, pseudo, ropts).config;
  }

  std::map<std::string, Configuration> cache_;
};

// The fit iterates in "secular space": the single-ion frequencies (units of
// Omega/2), the radial principal-axes angle, and the camera angles. The
// image depends on each of these directly, whereas the Mathieu parameters
// act through nearly-degenerate combinations (a_y is a sub-percent
// correction under q^2/2), which starves a least-squares iteration. The
// Mathieu parameters are recovered from the fitted frequencies afterwards.
struct SecularSpace {
  Real wx = 0.0, wy = 0.0, wz = 0.0;  // omega_x, omega_y', omega_z'
  Real psi = 0.0;                     // (y,z) = R(psi) (y',z')
  Real az_deg = 0.0, el_deg = 0.0;

  Vec to_vec() const {
    Vec v(6);
    v << wx, wy, wz, psi, az_deg, el_deg;
    return v;
  }
  static SecularSpace from_vec(const Vec& v) { return {v[0], v[1], v[2], v[3], v[4], v[5]}; }

  static SecularSpace from_params(const FitParams& p) {
    const SecularModes sec = pseudopotential_from_paul(p.trap());
    SecularSpace s;
    s.wx = sec.omega[0];
    s.wy = sec.omega[1];
    s.wz = sec.omega[2];
    s.psi = sec.axes_angle;
    s.az_deg = p.azimuth_deg;
    s.el_deg = p.elevation_deg;
    return s;
  }
};

// Invert (a_y, a_yz, q) -> (omega_y', omega_z', psi) by damped Newton on the
// Floquet map; a_x = omega_x^2 exactly.
FitParams mathieu_from_secular(const SecularSpace& s, const FitParams& guess) {
  FitParams out = guess;
  out.a_x = s.wx * s.wx;
  out.azimuth_deg = s.az_deg;
  out.elevation_deg = s.el_deg;

  Vec p(3);
  p << guess.a_y, guess.a_yz, guess.q;
  Vec target(3);
  target << s.wy, s.wz, s.psi;

  auto evaluate = [&](const Vec& v) -> std::optional<Vec> {
    PaulTrap trap{out.a_x, v[0], v[1], v[2]};
    try {
      const SecularModes sec = pseudopotential_from_paul(trap);
      Vec r(3);
      r << sec.omega[1], sec.omega[2], sec.axes_angle;
      return r;
    } catch (const FloquetInstabilityError&) {
      return std::nullopt;
    }
  };

  for (int it = 0; it < 60; ++it) {
    const auto f0 = evaluate(p);
    if (!f0) break;
    const Vec r = *f0 - target;
    if (r.cwiseAbs().maxCoeff() < 1e-12) break;
    Mat jac(3, 3);
    bool ok = true;
    for (int k = 0; k < 3 && ok; ++k) {
      Vec pk = p;
      const Real h = std::max(std::abs(p[k]), Real(1e-3)) * 1e-6;
      pk[k] += h;
      const auto fk = evaluate(pk);
      if (!fk) {
        ok = false;
        break;
      }
      jac.col(k) = (*fk - *f0) / h;
    }
    if (!ok) break;
    const Vec step = jac.partialPivLu().solve(-r);
    if (!step.allFinite()) break;
    p += step;
  }
  out.a_y = p[0];
  out.a_yz = p[1];
  out.q = p[2];
  return out;
}

struct ForwardModel {
  const FitOptions* opts;
  EquilibriumSolver* solver;

  // Projected bright ions (meters, centred) for one frame; empty on failure.
  std::optional<ModelCrystal> evaluate(const SecularSpace& s, Index n_ions, bool kink_frame,
                                       std::optional<Index> dark_site, Real dark_mass,
                                       Observation::Centering centering,
                                       const std::string& cache_key) const {
    if (!(s.wx > 0.0) || !(s.wy > s.wx) || !(s.wz > s.wx)) return std::nullopt;
    PseudoTrap pseudo;
    pseudo.gamma_y = (s.wy / s.wx) * (s.wy / s.wx);
    pseudo.gamma_z = (s.wz / s.wx) * (s.wz / s.wx);

    Configuration eq;
    try {
      eq = solver->solve(pseudo, n_ions, kink_frame, dark_site, dark_mass, cache_key);
    } catch (const ConvergenceError&) {
      return std::nullopt;
    } catch (const SingularGeometryError&) {
      return std::nullopt;
    }

    const Real omega_x_si = s.wx * 0.5 * opts->Omega_rf;
    const UnitSystem units =
        UnitSystem::pseudopotential(opts->mass_kg, opts->charge_C, omega_x_si);
    const Real d = units.length_unit();

    ModelCrystal out;
    Mat3 axes = Mat3::Identity();
    axes(1, 1) = std::cos(s.psi);
    axes(2, 1) = std::sin(s.psi);
    axes(1, 2) = -std::sin(s.psi);
    axes(2, 2) = std::cos(s.psi);
    out.lab_positions_m = (eq.positions * axes.transpose()) * d;

    CameraModel cam;
    cam.azimuth_deg = s.az_deg;
    cam.elevation_deg = s.el_deg;

    const Points2 proj_all = project(out.lab_positions_m, cam);
    Index n_bright = 0;
    for (const auto& sp : eq.species) n_bright += sp.bright ? 1 : 0;
    out.projected.resize(n_bright, 2);
    Index k = 0;
    for (Index i = 0; i < eq.positions.rows(); ++i)
      if (eq.species[size_t(i)].bright) out.projected.row(k++) = proj_all.row(i);
    if (centering == Observation::Centering::BrightCom) {
      const Eigen::RowVector2d com = out.projected.colwise().mean();
      out.projected.rowwise() -= com;
    }
    return out;
  }
};

Vec frame_residuals(const Points2& model, const Points2& observed) {
  const Index n = observed.rows();
  Mat cost(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) cost(i, j) = (model.row(i) - observed.row(j)).squaredNorm();
  const std::vector<int> match = min_cost_assignment(cost);
  Vec r(2 * n);
  for (Index i = 0; i < n; ++i) {
    r[2 * i] = model(i, 0) - observed(match[size_t(i)], 0);
    r[2 * i + 1] = model(i, 1) - observed(match[size_t(i)], 1);
  }
  return r;
}


}  // namespace

ModelCrystal model_crystal(const FitParams& params, Index n_ions, const FitOptions& options,
                           std::optional<Index> dark_site, Real dark_mass,
                           Observation::Centering centering, FrameKind kind) {
  EquilibriumSolver solver;
  ForwardModel model{&options, &solver};
  const SecularSpace s = SecularSpace::from_params(params);
  auto out = model.evaluate(s, n_ions, kind == FrameKind::OddKink, dark_site, dark_mass,
                            centering, "single");
  if (!out) throw ConvergenceError("model_crystal: no equilibrium at these parameters");
  out->secular = pseudopotential_from_paul(params.trap());
  return *out;
}

FitResult fit(const std::vector<Observation>& observations, const FitParams& guess,
              const FitOptions& options) {
  if (observations.empty()) throw InvalidArgumentError("fit: no observations");
  for (const auto& o : observations) o.validate();
  if (!(options.Omega_rf > 0.0) || !(options.mass_kg > 0.0))
    throw InvalidArgumentError("fit: Omega_rf and mass_kg must be set");

  Index total_points = 0;
  for (const auto& o : observations) total_points += o.n_ions();

  EquilibriumSolver solver;
  ForwardModel model{&options, &solver};

  const bool mathieu_frozen =
      options.freeze[0] || options.freeze[1] || options.freeze[2] || options.freeze[3];

  // Residuals as a function of the internal parameter vector, which is the
  // secular space by default, or the raw Mathieu space when one of the
  // Mathieu parameters is frozen (a frozen a_yz has no fixed secular image).
  auto residual_fn = [&](const Vec& v) -> Vec {
    SecularSpace s;
    if (mathieu_frozen) {
      const FitParams p = FitParams::from_vec(v);
      try {
        s = SecularSpace::from_params(p);
      } catch (const FloquetInstabilityError&) {
        return Vec::Constant(2 * total_points, options.penalty);
      }
    } else {
      s = SecularSpace::from_vec(v);
    }
    Vec r(2 * total_points);
    Index at = 0;
    for (size_t f = 0; f < observations.size(); ++f) {
      const Observation& obs = observations[f];
      const auto crystal =
          model.evaluate(s, obs.n_ions(), obs.kind == FrameKind::OddKink, std::nullopt, 1.0,
                         obs.centering, "frame" + std::to_string(f));
      if (!crystal) {
        r.segment(at, 2 * obs.n_ions()).setConstant(options.penalty);
      } else {
        r.segment(at, 2 * obs.n_ions()) = frame_residuals(crystal->projected, obs.points);
      }
      at += 2 * obs.n_ions();
    }
    return r;
  };

  Vec v0, scale, lower, upper;
  std::vector<bool> frozen(6, false);
  if (mathieu_frozen) {
    v0 = guess.to_vec();
    scale.resize(6);
    scale << std::max(std::abs(guess.a_x), 1e-4), std::max(std::abs(guess.a_y), 1e-4),
        std::max(std::abs(guess.a_yz), 5e-4), std::max(std::abs(guess.q), 0.05), 2.0, 2.0;
    lower.resize(6);
    upper.resize(6);
    for (Index k = 0; k < 4; ++k) {
      lower[k] = v0[k] - 5.0 * scale[k];
      upper[k] = v0[k] + 5.0 * scale[k];
    }
    for (Index k = 4; k < 6; ++k) {
      lower[k] = v0[k] - 20.0;
      upper[k] = v0[k] + 20.0;
    }
    frozen.assign(options.freeze.begin(), options.freeze.end());
  } else {
    const SecularSpace s0 = SecularSpace::from_params(guess);
    v0 = s0.to_vec();
    scale.resize(6);
    scale << std::max(0.1 * s0.wx, 1e-4), std::max(0.05 * s0.wy, 1e-4),
        std::max(0.05 * s0.wz, 1e-4), 0.05, 2.0, 2.0;
    lower.resize(6);
    upper.resize(6);
    lower << 0.3 * s0.wx, 0.5 * s0.wy, 0.5 * s0.wz, s0.psi - 0.6, s0.az_deg - 20.0,
        s0.el_deg - 20.0;
    upper << 3.0 * s0.wx, 1.5 * s0.wy, 1.5 * s0.wz, s0.psi + 0.6, s0.az_deg + 20.0,
        s0.el_deg + 20.0;
    frozen[4] = options.freeze[4];
    frozen[5] = options.freeze[5];
  }
  if (options.lower && options.upper) {
    lower = *options.lower;
    upper = *options.upper;
  }

  LMOptions lm;
  lm.max_iterations = options.max_iterations;

  // Staged minimization. The out-of-plane frequency acts only through the
  // quasi-3D structure: in the planar regime the objective is exactly flat
  // in omega_z', and near the onset the model bifurcates, so a joint descent
  // from a rough guess strands easily. Anchor the well-conditioned in-plane
  // parameters first, then line-search omega_z' alone, then polish jointly.
  LMResult lmres;
  if (!mathieu_frozen) {
    // Stage A: in-plane parameters, omega_z' frozen.
    std::vector<bool> freeze_wz = frozen;
    freeze_wz[2] = true;
    LMOptions lma = lm;
    lma.max_iterations = std::min(options.max_iterations, 60);
    const LMResult stage_a =
        levenberg_marquardt(residual_fn, v0, scale, lower, upper, freeze_wz, lma);
    Vec v = stage_a.params;

    // Stage B: grid + local refinement of omega_z' on the full objective.
    auto f_of_wz = [&](Real wz) {
      Vec vv = v;
      vv[2] = wz;
      return residual_fn(vv).squaredNorm();
    };
    Real best_wz = v[2];
    Real best_f = f_of_wz(best_wz);
    const Real wz_lo = v[1] * 1.002;
    const Real wz_hi = std::min(upper[2], v[1] * 1.4);
    const int n_grid = 36;
    for (int k = 0; k <= n_grid; ++k) {
      const Real wz = wz_lo + (wz_hi - wz_lo) * Real(k) / Real(n_grid);
      const Real f = f_of_wz(wz);
      if (f < best_f) {
        best_f = f;
        best_wz = wz;
      }
    }
    Real step = (wz_hi - wz_lo) / Real(n_grid);
    while (step > 1e-7 * best_wz) {
      bool moved = false;
      for (const Real cand : {best_wz - 0.5 * step, best_wz + 0.5 * step}) {
        if (cand <= wz_lo || cand >= wz_hi) continue;
        const Real f = f_of_wz(cand);
        if (f < best_f) {
          best_f = f;
          best_wz = cand;
          moved = true;
        }
      }
      if (!moved) step *= 0.5;
    }
    v[2] = best_wz;

    // Stage C: joint polish.
    lmres = levenberg_marquardt(residual_fn, v, scale, lower, upper, frozen, lm);
  } else {
    lmres = levenberg_marquardt(residual_fn, v0, scale, lower, upper, frozen, lm);
  }

  FitResult out;
  if (mathieu_frozen) {
    out.params = FitParams::from_vec(lmres.params);
  } else {
    out.params = mathieu_from_secular(SecularSpace::from_vec(lmres.params), guess);
  }
  out.objective = lmres.objective;
  out.converged = lmres.converged;
  out.iterations = lmres.iterations;
  out.n_evaluations = lmres.n_evaluations;

  // Per-ion distances at the solution.
  const Vec r = residual_fn(lmres.params);
  Index at = 0;
  Real sum = 0.0;
  Index count = 0;
  for (const auto& obs : observations) {
    Vec d(obs.n_ions());
    for (Index i = 0; i < obs.n_ions(); ++i) {
      d[i] = std::hypot(r[at + 2 * i], r[at + 2 * i + 1]);
      out.max_residual = std::max(out.max_residual, d[i]);
      sum += d[i];
      ++count;
    }
    out.residuals.push_back(std::move(d));
    at += 2 * obs.n_ions();
  }
  out.mean_residual = count ? sum / Real(count) : 0.0;

  try {
    const SecularModes sec = pseudopotential_from_paul(out.params.trap());
    for (int k = 0; k < 3; ++k)
      out.secular_freq_hz[size_t(k)] =
          sec.omega[size_t(k)] * 0.5 * options.Omega_rf / (2.0 * constants::pi);
    out.secular_ratio = sec.omega[1] > 0.0 ? sec.omega[2] / sec.omega[1] : 0.0;
  } catch (const FloquetInstabilityError&) {
  }
  return out;
}

DarkIonFitResult dark_ion_hypothesis_fit(const Observation& observation, Index total_ions,
                                         const FitParams& fitted,
                                         const std::vector<Real>& mass_ratios,
                                         const DarkIonFitOptions& options) {
  observation.validate();
  if (total_ions != observation.n_ions() + 1)
    throw InvalidArgumentError("dark_ion_hypothesis_fit: exactly one dark ion supported");
  if (mass_ratios.empty())
    throw InvalidArgumentError("dark_ion_hypothesis_fit: empty mass list");

  std::vector<Index> sites = options.candidate_sites;
  if (sites.empty())
    for (Index s = 0; s < total_ions; ++s) sites.push_back(s);

  EquilibriumSolver solver;
  ForwardModel model{&options.fit, &solver};
  const SecularSpace sec_space = SecularSpace::from_params(fitted);

  DarkIonFitResult out;
  out.best.mean_residual = std::numeric_limits<Real>::infinity();

  for (const Index site : sites) {
    for (const Real mu : mass_ratios) {
      const auto crystal =
          model.evaluate(sec_space, total_ions, false, site, mu, observation.centering,
                         "site" + std::to_string(site));
      DarkIonHypothesis h{site, mu, std::numeric_limits<Real>::infinity()};
      if (crystal && crystal->projected.rows() == observation.n_ions()) {
        const Vec r = frame_residuals(crystal->projected, observation.points);
        Real sum = 0.0;
        for (Index i = 0; i < observation.n_ions(); ++i)
          sum += std::hypot(r[2 * i], r[2 * i + 1]);
        h.mean_residual = sum / Real(observation.n_ions());
      }
      out.scan.push_back(h);
      if (h.mean_residual < out.best.mean_residual) out.best = h;
    }
  }
  out.converged = std::isfinite(out.best.mean_residual);
  if (!out.converged) return out;

  // Minimal mass at the winning site that meets the threshold ("at least"
  // semantics: the residual falls then plateaus with mass).
  out.minimal_mass_ratio = out.best.mass_ratio;
  for (const auto& h : out.scan)
    if (h.site == out.best.site && h.mean_residual < options.residual_threshold &&
        h.mass_ratio < out.minimal_mass_ratio)
      out.minimal_mass_ratio = h.mass_ratio;

  if (options.paul_verify) {
    try {
      const auto crystal = model.evaluate(sec_space, total_ions, false, out.best.site,
                                          out.best.mass_ratio, observation.centering, "verify");
      const UnitSystem paul_units = UnitSystem::paul(options.fit.mass_kg, options.fit.charge_C,
                                                     options.fit.Omega_rf);
      Configuration seed;
      seed.positions = crystal->lab_positions_m / paul_units.length_unit();
      seed.species.assign(size_t(total_ions), IonSpecies::reference());
      const Index dark_ion = seed.axial_order()[size_t(out.best.site)];
      seed.species[size_t(dark_ion)] = IonSpecies{out.best.mass_ratio, 1.0, false};

      const Coords averaged = paul_time_averaged_equilibrium(seed, fitted.trap());
      CameraModel cam;
      cam.azimuth_deg = fitted.azimuth_deg;
      cam.elevation_deg = fitted.elevation_deg;
      const Points2 proj_all = project(averaged * paul_units.length_unit(), cam);
      Points2 bright(observation.n_ions(), 2);
      Index k = 0;
      for (Index i = 0; i < total_ions; ++i)
        if (seed.species[size_t(i)].bright) bright.row(k++) = proj_all.row(i);
      const Vec r = frame_residuals(bright, observation.points);
      Real sum = 0.0;
      for (Index i = 0; i < observation.n_ions(); ++i)
        sum += std::hypot(r[2 * i], r[2 * i + 1]);
      out.paul_verified_residual = sum / Real(observation.n_ions());
    } catch (const std::exception&) {
      out.paul_verified_residual = -1.0;
    }
  }
  return out;
}

}  // namespace kinklab
