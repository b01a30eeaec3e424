// kinklab: a numerical laboratory for inhomogeneous trapped-ion Coulomb
// crystals. Subcommands cover relaxation, normal modes, branch continuation,
// the Peierls-Nabarro landscape, dynamics, image rendering, and trap-parameter
// fitting. Every run writes its artifacts plus a manifest that reproduces it.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "kinklab/continuation.hpp"
#include "kinklab/dynamics.hpp"
#include "kinklab/errors.hpp"
#include "kinklab/floquet.hpp"
#include "kinklab/imaging.hpp"
#include "kinklab/io.hpp"
#include "kinklab/modes.hpp"
#include "kinklab/pn.hpp"
#include "kinklab/statics.hpp"
#include "kinklab/trapfit.hpp"
#include "kinklab/units.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace kinklab;

namespace {

constexpr const char* kVersion = "0.1.0";

int default_jobs() {
  if (const char* env = std::getenv("KINKLAB_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

struct Manifest {
  std::string subcommand;
  std::vector<std::string> argv;
  json params = json::object();
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  long steps = 0;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

  void write(const fs::path& dir) const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json j = {{"subcommand", subcommand}, {"argv", argv},      {"params", params},
              {"outputs", outputs},       {"seed", seed},      {"version", kVersion},
              {"wall_seconds", wall},     {"steps", steps}};
    fs::create_directories(dir);
    write_text_file((dir / "manifest.json").string(), j.dump(2) + "\n");
  }
};

// The resolved option set (flags win over config-file values).
json resolved_params(const CLI::App* cmd) {
  json out = json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    const std::string name = opt->get_name();
    if (name.empty() || name == "--help") continue;
    if (opt->count())
      out[name] = opt->results().front();
    else if (!opt->get_default_str().empty())
      out[name] = opt->get_default_str();
  }
  return out;
}

void emit(const fs::path& dir, const std::string& name, const std::string& content,
          Manifest& manifest) {
  fs::create_directories(dir);
  write_text_file((dir / name).string(), content);
  manifest.outputs.push_back(name);
}

// Shared crystal-problem flags.
struct ProblemArgs {
  Index n = 31;
  Real gamma_y = 90.0;
  Real ratio = 0.0;  // 0: planar restriction
  std::string seed_kind = "odd_kink";
  int offset = 1;
  int separation = 4;
  Index dark_index = 0;
  Real dark_mass = 40.0 / 24.0;
  Real noise = 0.0;
  std::uint64_t noise_seed = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--n", n, "ion count")->check(CLI::PositiveNumber);
    cmd->add_option("--gamma-y", gamma_y, "radial anisotropy (omega_y/omega_x)^2")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--ratio", ratio,
                    "omega_z/omega_y; 0 restricts the crystal to the xy plane");
    cmd->add_option("--seed-kind", seed_kind,
                    "chain|zigzag|odd_kink|extended_kink|two_kink|displaced_kink|dark_ion");
    cmd->add_option("--offset", offset, "displaced-kink site offset");
    cmd->add_option("--separation", separation, "two-kink flipped-block width");
    cmd->add_option("--dark-index", dark_index, "dark-ion site (axial order)");
    cmd->add_option("--dark-mass", dark_mass, "dark-ion mass ratio");
    cmd->add_option("--noise", noise, "radial seed noise amplitude");
    cmd->add_option("--noise-seed", noise_seed, "seed for the radial noise");
  }

  DofMask mask() const { return ratio > 0.0 ? DofMask::full() : DofMask::planar_xy(); }
  PseudoTrap trap() const {
    return ratio > 0.0 ? PseudoTrap{gamma_y, gamma_y * ratio * ratio}
                       : PseudoTrap::planar(gamma_y);
  }
  SeedSpec spec() const {
    SeedSpec s;
    s.n_ions = n;
    if (seed_kind == "chain") s.kind = SeedSpec::Kind::Chain;
    else if (seed_kind == "zigzag") s.kind = SeedSpec::Kind::Zigzag;
    else if (seed_kind == "odd_kink") s.kind = SeedSpec::Kind::OddKink;
    else if (seed_kind == "extended_kink") s.kind = SeedSpec::Kind::ExtendedKinkSeed;
    else if (seed_kind == "two_kink") s.kind = SeedSpec::Kind::TwoKink;
    else if (seed_kind == "displaced_kink") s.kind = SeedSpec::Kind::DisplacedKink;
    else if (seed_kind == "dark_ion") s.kind = SeedSpec::Kind::DarkIon;
    else throw InvalidArgumentError("unknown seed kind: " + seed_kind);
    s.offset = offset;
    s.separation = separation;
    s.dark_index = dark_index;
    s.dark = IonSpecies{dark_mass, 1.0, false};
    s.noise = noise;
    s.noise_seed = noise_seed;
    return s;
  }
};

int cmd_relax(const ProblemArgs& prob, const fs::path& out, Manifest& manifest) {
  const PseudoTrap trap = prob.trap();
  const Configuration seed = make_seed(prob.spec(), trap, prob.mask());
  const CriticalPoint cp = relax(seed, trap);
  emit(out, "critical_point.json", critical_point_json(cp, trap), manifest);
  emit(out, "configuration.csv", to_csv(cp.config), manifest);
  std::cout << "relax: n=" << prob.n << " E=" << cp.energy << " stable=" << cp.stable
            << " n_negative=" << cp.n_negative << " -> "
            << (out / "critical_point.json").string() << "\n";
  return 0;
}

int cmd_modes(const ProblemArgs& prob, const fs::path& out, Manifest& manifest) {
  const PseudoTrap trap = prob.trap();
  const Configuration seed = make_seed(prob.spec(), trap, prob.mask());
  const CriticalPoint cp = relax(seed, trap);
  const ModeSpectrum spec = normal_modes(cp, trap);
  emit(out, "spectrum.csv", spectrum_csv(spec), manifest);
  emit(out, "modes.json", mode_vectors_json(spec), manifest);
  std::cout << "modes: n=" << prob.n << " omega_low="
            << (spec.low_mode_index ? spec.omega_low() : 0.0) << " -> "
            << (out / "spectrum.csv").string() << "\n";
  return 0;
}

int cmd_sweep(const ProblemArgs& prob, const std::string& param_name, Real from, Real to,
              Real step, const fs::path& out, Manifest& manifest) {
  Parameter param;
  if (param_name == "gamma_y")
    param = prob.ratio > 0.0 ? Parameter::gamma_y_at_ratio(prob.ratio) : Parameter::gamma_y();
  else if (param_name == "ratio_zy")
    param = Parameter::ratio_zy(prob.gamma_y);
  else if (param_name == "mass_ratio")
    param = Parameter::mass_ratio(prob.dark_index);
  else
    throw InvalidArgumentError("unknown sweep parameter: " + param_name);

  PseudoTrap trap0 = prob.trap();
  {
    Configuration dummy = Configuration::uniform(Coords::Zero(1, 3));
    if (param.kind != Parameter::Kind::MassRatio) param.apply(from, trap0, dummy);
  }

  const Configuration seed = make_seed(prob.spec(), trap0, prob.mask());
  const CriticalPoint start =
      prob.seed_kind == "chain" ? newton_critical(seed, trap0) : relax(seed, trap0);

  StepControl ctl;
  if (step > 0.0) ctl.initial_step = step;
  else if (param_name == "ratio_zy") ctl.initial_step = 0.002;
  const Branch branch = trace_branch(start, trap0, param, from, to, ctl);

  emit(out, "branch.csv", branch_csv(branch), manifest);
  emit(out, "branch.json", branch_json(branch), manifest);
  std::ostringstream line;
  line << "sweep: " << param.name() << " " << from << " -> " << to << ", "
       << branch.samples.size() << " samples, events:";
  for (const auto& ev : branch.events) line << " " << ev.parameter;
  if (branch.terminated_at_fold) line << " (fold)";
  std::cout << line.str() << " -> " << (out / "branch.csv").string() << "\n";
  return 0;
}

int cmd_pn(const ProblemArgs& prob, int max_offset, const std::vector<int>& separations,
           int jobs, const fs::path& out, Manifest& manifest) {
  PNOptions opts;
  opts.max_offset = max_offset;
  opts.kink_kind = prob.seed_kind == "extended_kink" ? SeedSpec::Kind::ExtendedKinkSeed
                                                     : SeedSpec::Kind::OddKink;
  opts.mask = prob.mask();
  opts.jobs = jobs;
  const PseudoTrap trap = prob.trap();
  const PNLandscape land = pn_extract(trap, prob.n, opts);
  emit(out, "pn_landscape.csv", pn_landscape_csv(land), manifest);
  emit(out, "pn_landscape.json", pn_landscape_json(land), manifest);

  std::ostringstream line;
  line << "pn: n=" << prob.n << " sites";
  for (const auto& s : land.sites)
    if (s.exists) line << " " << s.offset << ":" << s.energy;

  if (!separations.empty()) {
    const TwoKinkAnalysis two = two_kink_analysis(trap, prob.n, separations, opts);
    json j = {{"kink_energy", two.kink_energy},
              {"annihilation_barrier", two.annihilation_barrier},
              {"barrier_n_negative", two.barrier_n_negative}};
    if (two.asymmetric_channel_barrier)
      j["asymmetric_channel_barrier"] = *two.asymmetric_channel_barrier;
    json seps = json::array();
    for (const auto& sep : two.separations)
      seps.push_back({{"separation", sep.separation},
                      {"exists", sep.exists},
                      {"energy", sep.energy},
                      {"interaction", sep.interaction},
                      {"measured_separation", sep.measured_separation}});
    j["separations"] = seps;
    emit(out, "two_kink.json", j.dump(2) + "\n", manifest);
    line << " E_kink=" << two.kink_energy << " E_barrier=" << two.annihilation_barrier;
  }
  std::cout << line.str() << " -> " << (out / "pn_landscape.csv").string() << "\n";
  return 0;
}

int cmd_simulate(const ProblemArgs& prob, const std::string& mode, Real temperature_mk,
                 Index mode_index, Real energy_kbtd, Real duration, Real timestep, int stride,
                 Real damping, std::uint64_t seed, int ensemble, int jobs, bool paul,
                 const std::vector<Real>& paul_params, const fs::path& out, Manifest& manifest) {
  const PseudoTrap trap = prob.trap();
  const Real mg = 23.985041697 * constants::atomic_mass_unit;
  const UnitSystem units = UnitSystem::pseudopotential(mg, constants::elementary_charge,
                                                       2.0 * constants::pi * 56.7e3, 1.0026e-3);

  TrapModel model = trap;
  if (paul) {
    if (paul_params.size() != 4)
      throw InvalidArgumentError("--paul-params expects a_x,a_y,a_yz,q");
    model = PaulTrap{paul_params[0], paul_params[1], paul_params[2], paul_params[3]};
  }

  IntegrateOptions opts;
  opts.timestep = timestep;
  opts.stride = stride;
  opts.damping = damping;

  auto run_one = [&](std::uint64_t run_seed, const fs::path& dir, Manifest& mf) {
    Trajectory traj;
    if (mode == "release") {
      const ReleaseResult rel =
          release_displaced_kink(trap, prob.n, prob.offset, duration, opts);
      traj = std::move(rel.trajectory);
    } else {
      const Configuration cseed = make_seed(prob.spec(), trap, prob.mask());
      const CriticalPoint cp = relax(cseed, trap);
      const ModeSpectrum spec = normal_modes(cp, trap);
      State s0;
      if (mode == "thermal")
        s0 = thermal_state(cp, spec, units, temperature_mk * 1e-3, run_seed);
      else if (mode == "excite")
        s0 = excite_mode(cp, spec, mode_index, energy_kbtd * units.doppler_energy());
      else
        throw InvalidArgumentError("unknown simulate mode: " + mode);
      traj = integrate(s0, cp.config, model, duration, opts);
    }
    emit(dir, "trajectory.csv", trajectory_csv(traj), mf);
    return traj;
  };

  if (ensemble <= 1) {
    const Trajectory traj = run_one(seed, out, manifest);
    manifest.steps = long(traj.n_samples()) * traj.stride;
    std::cout << "simulate: " << mode << " n=" << prob.n << " samples=" << traj.n_samples()
              << " drift=" << traj.energy_drift() << " -> "
              << (out / "trajectory.csv").string() << "\n";
    return 0;
  }

  // Ensemble members run concurrently; outputs merge in member order.
  std::vector<Manifest> member_manifests(static_cast<size_t>(ensemble));
  std::vector<std::string> errors(static_cast<size_t>(ensemble));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < std::max(1, std::min(jobs, ensemble)); ++t)
    pool.emplace_back([&] {
      for (int k = next.fetch_add(1); k < ensemble; k = next.fetch_add(1)) {
        try {
          run_one(seed + std::uint64_t(k), out / ("member" + std::to_string(k)),
                  member_manifests[size_t(k)]);
        } catch (const std::exception& e) {
          errors[size_t(k)] = e.what();
        }
      }
    });
  for (auto& th : pool) th.join();
  for (int k = 0; k < ensemble; ++k) {
    if (!errors[size_t(k)].empty())
      throw ConvergenceError("ensemble member " + std::to_string(k) + ": " + errors[size_t(k)]);
    manifest.outputs.push_back("member" + std::to_string(k) + "/trajectory.csv");
  }
  std::cout << "simulate: ensemble of " << ensemble << " -> " << out.string() << "\n";
  return 0;
}

int cmd_render(const std::string& trajectory_path, const std::string& config_path,
               const CameraModel& camera, int stride, const fs::path& out, Manifest& manifest) {
  const Configuration config = configuration_from_csv(read_text_file(config_path));

  // Wide-row trajectory CSV: t,energy,x0,y0,z0,vx0,...
  std::istringstream is(read_text_file(trajectory_path));
  std::string line;
  std::vector<Coords> frames;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream ls(line);
    std::string cell;
    std::vector<Real> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    const Index n = Index((row.size() - 2) / 6);
    if (n != config.n_ions())
      throw InvalidArgumentError("render: trajectory/configuration ion count mismatch");
    Coords p(n, 3);
    for (Index i = 0; i < n; ++i)
      for (int a = 0; a < 3; ++a) p(i, a) = row[size_t(2 + 6 * size_t(i) + size_t(a))];
    frames.push_back(std::move(p));
  }
  std::vector<Coords> strided;
  for (size_t k = 0; k < frames.size(); k += size_t(std::max(stride, 1)))
    strided.push_back(frames[k]);

  const IntegrationImage img = render(strided, config.species, camera);
  fs::create_directories(out);
  write_pgm16(img, (out / "image.pgm").string());
  manifest.outputs.push_back("image.pgm");
  emit(out, "image.json", image_metadata_json(img), manifest);
  std::cout << "render: " << strided.size() << " samples, total intensity "
            << img.total_intensity() << " -> " << (out / "image.pgm").string() << "\n";
  return 0;
}

Points2 read_observation_csv(const std::string& path) {
  std::istringstream is(read_text_file(path));
  std::string line;
  std::vector<std::pair<Real, Real>> pts;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.find_first_not_of("0123456789+-.eE, \t\r") != std::string::npos) continue;
    std::istringstream ls(line);
    std::string a, b;
    if (!std::getline(ls, a, ',') || !std::getline(ls, b, ',')) continue;
    pts.push_back({std::stod(a), std::stod(b)});
  }
  Points2 out(Index(pts.size()), 2);
  for (size_t k = 0; k < pts.size(); ++k) {
    out(Index(k), 0) = pts[k].first * 1e-6;  // micrometres in
    out(Index(k), 1) = pts[k].second * 1e-6;
  }
  return out;
}

int cmd_fit(const std::vector<std::string>& frame_paths, const std::vector<std::string>& kinds,
            const std::vector<Real>& guess_vec, const std::vector<std::string>& freeze,
            Real omega_rf_mhz, Real mass_amu, const fs::path& out, Manifest& manifest) {
  if (guess_vec.size() != 6)
    throw InvalidArgumentError("--guess expects a_x,a_y,a_yz,q,azimuth,elevation");
  std::vector<Observation> observations;
  for (size_t k = 0; k < frame_paths.size(); ++k) {
    Observation obs;
    obs.points = read_observation_csv(frame_paths[k]);
    obs.label = frame_paths[k];
    if (k < kinds.size() && kinds[k] == "odd_kink") obs.kind = FrameKind::OddKink;
    observations.push_back(std::move(obs));
  }

  Vec g(6);
  for (int k = 0; k < 6; ++k) g[k] = guess_vec[size_t(k)];
  const FitParams guess = FitParams::from_vec(g);
  FitOptions options;
  options.Omega_rf = 2.0 * constants::pi * omega_rf_mhz * 1e6;
  options.mass_kg = mass_amu * constants::atomic_mass_unit;
  for (const std::string& f : freeze) {
    bool found = false;
    for (size_t k = 0; k < FitParams::names.size(); ++k)
      if (f == FitParams::names[k]) {
        options.freeze[k] = true;
        found = true;
      }
    if (f == "azimuth") {
      options.freeze[4] = true;
      found = true;
    }
    if (f == "elevation") {
      options.freeze[5] = true;
      found = true;
    }
    if (!found) throw InvalidArgumentError("unknown --freeze parameter: " + f);
  }

  const FitResult res = fit(observations, guess, options);
  emit(out, "fit.json", fit_result_json(res), manifest);
  std::cout << "fit: mean residual " << res.mean_residual * 1e6 << " um, a_x=" << res.params.a_x
            << " q=" << res.params.q << " -> " << (out / "fit.json").string() << "\n";
  return 0;
}

// Headline reproductions compared against the stored expectations.
int cmd_report(const std::string& suite, const std::vector<std::string>& only, int jobs,
               const fs::path& out, Manifest& manifest) {
  if (suite != "paper" && suite != "floquet")
    throw InvalidArgumentError("unknown report suite: " + suite);
  auto selected = [&](const std::string& key) {
    if (suite == "floquet") return key == "floquet";
    return only.empty() || std::find(only.begin(), only.end(), key) != only.end();
  };

  json report = json::object();
  bool all_ok = true;
  auto record = [&](const std::string& key, const std::string& name, Real value, Real expected,
                    Real tolerance) {
    const bool ok = std::abs(value - expected) <= tolerance;
    all_ok = all_ok && ok;
    report[key][name] = {{"value", value},
                         {"expected", expected},
                         {"tolerance", tolerance},
                         {"pass", ok}};
  };

  if (selected("floquet")) {
    const PaulTrap trap{0.000328, -0.0002, 0.0019, 0.286};
    const SecularModes sec = pseudopotential_from_paul(trap);
    const Real f_unit = 0.5 * 6.22e6;  // (Omega/2)/(2 pi) in Hz
    record("floquet", "axial_khz", sec.omega[0] * f_unit / 1e3, 56.7, 0.02 * 56.7);
    record("floquet", "radial_khz", sec.omega[1] * f_unit / 1e3, 623.3, 0.02 * 623.3);
    record("floquet", "ratio", sec.omega[2] / sec.omega[1], 1.047, 0.02 * 1.047);
  }

  if (selected("chain31")) {
    const Configuration chain =
        make_seed(SeedSpec::chain(31), PseudoTrap::planar(160.0), DofMask::planar_xy());
    const CriticalPoint start = newton_critical(chain, PseudoTrap::planar(160.0));
    const Branch b =
        trace_branch(start, PseudoTrap::planar(160.0), Parameter::gamma_y(), 160.0, 140.0);
    record("chain31", "zigzag_pitchfork", b.events.empty() ? 0.0 : b.events[0].parameter, 152.0,
           2.0);
  }

  if (selected("kink_window")) {
    const PseudoTrap trap = PseudoTrap::planar(90.0);
    const Configuration ks = make_seed(SeedSpec::odd_kink(31), trap, DofMask::planar_xy());
    const CriticalPoint kink = relax(ks, trap);
    const Branch up = trace_branch(kink, trap, Parameter::gamma_y(), 90.0, 110.0);
    Real c_event = 0.0;
    for (const auto& ev : up.events)
      if (std::abs(ev.parameter - 106.0) < 3.0) c_event = ev.parameter;
    record("kink_window", "upper_edge", c_event, 106.0, 1.5);
    const Branch dn = trace_branch(kink, trap, Parameter::gamma_y(), 90.0, 63.0);
    Real low_event = 0.0;
    for (const auto& ev : dn.events)
      if (std::abs(ev.parameter - 65.2) < 2.0) low_event = ev.parameter;
    record("kink_window", "lower_edge", low_event, 65.2, 0.015 * 65.2);
  }

  if (selected("two_kink")) {
    const Real gy = 121.0, ratio = 1.047;
    const PseudoTrap trap{gy, gy * ratio * ratio};
    PNOptions opts;
    opts.mask = DofMask::full();
    opts.jobs = jobs;
    const TwoKinkAnalysis two = two_kink_analysis(trap, 50, {4}, opts);
    record("two_kink", "E_kink", two.kink_energy, 0.1265, 0.02 * 0.1265);
    record("two_kink", "E_two_kink",
           two.separations.empty() || !two.separations[0].exists ? 0.0
                                                                 : two.separations[0].energy,
           0.27, 0.02 * 0.27);
    record("two_kink", "E_barrier", two.annihilation_barrier, 0.078, 0.05 * 0.078);
  }

  if (selected("omega_low")) {
    const Real gy = 121.0, ratio = 1.047;
    const PseudoTrap trap{gy, gy * ratio * ratio};
    const Configuration ks = make_seed(SeedSpec::odd_kink(50), trap, DofMask::full());
    const CriticalPoint kink = relax(ks, trap);
    const ModeSpectrum spec = normal_modes(kink, trap);
    record("omega_low", "omega_low", spec.omega_low(), 0.40, 0.05 * 0.40);
  }

  report["all_pass"] = all_ok;
  emit(out, "report.json", report.dump(2) + "\n", manifest);
  std::cout << "report: suite=" << suite << " all_pass=" << (all_ok ? "true" : "false")
            << " -> " << (out / "report.json").string() << "\n";
  return all_ok ? 0 : 1;
}

json error_json(const std::string& type, const std::string& what) {
  return json{{"error", type}, {"what", what}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kinklab: trapped-ion crystal statics, kinks, bifurcations and imaging"};
  app.set_version_flag("--version", kVersion);
  app.set_config("--config", "", "key=value configuration file (flags win)");
  app.require_subcommand(1);

  std::string out_dir = ".";
  int jobs = default_jobs();
  std::uint64_t seed = 0;
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  app.add_option("--jobs", jobs, "concurrent independent work items (env KINKLAB_JOBS)")
      ->capture_default_str();
  app.add_option("--seed", seed, "random seed for randomized commands")->capture_default_str();

  // relax
  auto* relax_cmd = app.add_subcommand("relax", "relax a seed to a critical point");
  ProblemArgs relax_prob;
  relax_prob.add_to(relax_cmd);

  // modes
  auto* modes_cmd = app.add_subcommand("modes", "normal-mode spectrum at a relaxed point");
  ProblemArgs modes_prob;
  modes_prob.add_to(modes_cmd);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "trace a branch against one trap parameter");
  ProblemArgs sweep_prob;
  sweep_prob.seed_kind = "chain";
  sweep_prob.add_to(sweep_cmd);
  std::string sweep_param = "gamma_y";
  Real sweep_from = 160.0, sweep_to = 20.0, sweep_step = 0.0;
  std::string sweep_branch;
  sweep_cmd->add_option("--param", sweep_param, "gamma_y|ratio_zy|mass_ratio");
  sweep_cmd->add_option("--from", sweep_from, "start value")->required();
  sweep_cmd->add_option("--to", sweep_to, "end value")->required();
  sweep_cmd->add_option("--step", sweep_step, "initial step (0: default)");
  sweep_cmd->add_option("--branch", sweep_branch, "alias for --seed-kind");

  // pn
  auto* pn_cmd = app.add_subcommand("pn", "Peierls-Nabarro landscape and two-kink analysis");
  ProblemArgs pn_prob;
  pn_prob.add_to(pn_cmd);
  int pn_max_offset = 2;
  std::vector<int> pn_separations;
  pn_cmd->add_option("--max-offset", pn_max_offset, "largest site offset to probe");
  pn_cmd->add_option("--two-kink-separations", pn_separations,
                     "two-kink seed separations to analyse")
      ->delimiter(',');

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "integrate the equations of motion");
  ProblemArgs sim_prob;
  sim_prob.ratio = 1.047;
  sim_prob.gamma_y = 121.0;
  sim_prob.n = 50;
  sim_prob.add_to(sim_cmd);
  std::string sim_mode = "thermal";
  Real sim_temperature = 1.0, sim_energy = 0.1, sim_duration = 100.0, sim_timestep = 0.0;
  Real sim_damping = 0.0;
  Index sim_mode_index = 0;
  int sim_stride = 10, sim_ensemble = 1;
  bool sim_paul = false;
  std::vector<Real> sim_paul_params;
  sim_cmd->add_option("--mode", sim_mode, "thermal|excite|release");
  sim_cmd->add_option("--temperature", sim_temperature, "thermal temperature (mK)");
  sim_cmd->add_option("--mode-index", sim_mode_index, "mode to excite");
  sim_cmd->add_option("--energy", sim_energy, "excitation energy (k_B T_D units)");
  sim_cmd->add_option("--duration", sim_duration, "integration time (nondimensional)");
  sim_cmd->add_option("--timestep", sim_timestep, "timestep (0: default)");
  sim_cmd->add_option("--stride", sim_stride, "store every stride-th step");
  sim_cmd->add_option("--damping", sim_damping, "friction coefficient");
  sim_cmd->add_option("--ensemble", sim_ensemble, "number of ensemble members");
  sim_cmd->add_flag("--paul", sim_paul, "integrate in the time-dependent Paul potential");
  sim_cmd->add_option("--paul-params", sim_paul_params, "a_x,a_y,a_yz,q for --paul")
      ->delimiter(',');

  // render
  auto* render_cmd = app.add_subcommand("render", "integration image from a trajectory");
  std::string render_traj, render_config;
  CameraModel camera;
  int render_stride = 1;
  render_cmd->add_option("--trajectory", render_traj, "trajectory CSV")->required();
  render_cmd->add_option("--configuration", render_config, "configuration CSV (species)")
      ->required();
  render_cmd->add_option("--azimuth", camera.azimuth_deg, "camera azimuth (deg)");
  render_cmd->add_option("--elevation", camera.elevation_deg, "camera elevation (deg)");
  render_cmd->add_option("--pixel-size", camera.pixel_size, "pixel size (input length units)");
  render_cmd->add_option("--psf", camera.psf_sigma, "Gaussian PSF sigma");
  render_cmd->add_option("--width", camera.width_px, "image width (px)");
  render_cmd->add_option("--height", camera.height_px, "image height (px)");
  render_cmd->add_option("--stride", render_stride, "render every stride-th sample");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit trap parameters to observed coordinates");
  std::vector<std::string> fit_frames, fit_kinds, fit_freeze;
  std::vector<Real> fit_guess;
  Real fit_omega_mhz = 6.22, fit_mass_amu = 23.985041697;
  fit_cmd->add_option("--frames", fit_frames, "observation CSVs (u,v in micrometres)")
      ->required()
      ->delimiter(',');
  fit_cmd->add_option("--kinds", fit_kinds, "frame kinds: zigzag|odd_kink (default zigzag)")
      ->delimiter(',');
  fit_cmd->add_option("--guess", fit_guess, "a_x,a_y,a_yz,q,azimuth,elevation")
      ->required()
      ->delimiter(',');
  fit_cmd->add_option("--freeze", fit_freeze, "parameters to hold fixed");
  fit_cmd->add_option("--omega-rf-mhz", fit_omega_mhz, "rf frequency (MHz)");
  fit_cmd->add_option("--mass-amu", fit_mass_amu, "ion mass (amu)");

  // report
  auto* report_cmd = app.add_subcommand("report", "regenerate the headline numbers");
  std::string report_suite = "paper";
  std::vector<std::string> report_only;
  report_cmd->add_option("--suite", report_suite, "paper|floquet");
  report_cmd->add_option("--only", report_only,
                         "restrict to keys: floquet chain31 kink_window two_kink omega_low")
      ->delimiter(',');

  // rerun
  auto* rerun_cmd = app.add_subcommand("rerun", "re-execute a run from its manifest");
  std::string rerun_manifest;
  rerun_cmd->add_option("manifest", rerun_manifest, "manifest.json path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
    std::cerr << error_json("usage", e.what()).dump() << "\n";
    return 2;
  }

  Manifest manifest;
  for (int k = 0; k < argc; ++k) manifest.argv.push_back(argv[k]);
  manifest.seed = seed;
  const fs::path out(out_dir);

  try {
    int rc = 0;
    if (rerun_cmd->parsed()) {
      const json m = json::parse(read_text_file(rerun_manifest));
      std::vector<std::string> stored = m.at("argv").get<std::vector<std::string>>();
      std::vector<char*> cargv;
      for (auto& s : stored) cargv.push_back(s.data());
      return main(int(cargv.size()), cargv.data());
    } else if (relax_cmd->parsed()) {
      manifest.subcommand = "relax";
      manifest.params = resolved_params(relax_cmd);
      rc = cmd_relax(relax_prob, out, manifest);
    } else if (modes_cmd->parsed()) {
      manifest.subcommand = "modes";
      manifest.params = resolved_params(modes_cmd);
      rc = cmd_modes(modes_prob, out, manifest);
    } else if (sweep_cmd->parsed()) {
      manifest.subcommand = "sweep";
      manifest.params = resolved_params(sweep_cmd);
      if (!sweep_branch.empty()) sweep_prob.seed_kind = sweep_branch;
      rc = cmd_sweep(sweep_prob, sweep_param, sweep_from, sweep_to, sweep_step, out, manifest);
    } else if (pn_cmd->parsed()) {
      manifest.subcommand = "pn";
      manifest.params = resolved_params(pn_cmd);
      rc = cmd_pn(pn_prob, pn_max_offset, pn_separations, jobs, out, manifest);
    } else if (sim_cmd->parsed()) {
      manifest.subcommand = "simulate";
      manifest.params = resolved_params(sim_cmd);
      rc = cmd_simulate(sim_prob, sim_mode, sim_temperature, sim_mode_index, sim_energy,
                        sim_duration, sim_timestep, sim_stride, sim_damping, seed, sim_ensemble,
                        jobs, sim_paul, sim_paul_params, out, manifest);
    } else if (render_cmd->parsed()) {
      manifest.subcommand = "render";
      manifest.params = resolved_params(render_cmd);
      rc = cmd_render(render_traj, render_config, camera, render_stride, out, manifest);
    } else if (fit_cmd->parsed()) {
      manifest.subcommand = "fit";
      manifest.params = resolved_params(fit_cmd);
      rc = cmd_fit(fit_frames, fit_kinds, fit_guess, fit_freeze, fit_omega_mhz, fit_mass_amu,
                   out, manifest);
    } else if (report_cmd->parsed()) {
      manifest.subcommand = "report";
      manifest.params = resolved_params(report_cmd);
      rc = cmd_report(report_suite, report_only, jobs, out, manifest);
    }
    manifest.write(out);
    return rc;
  } catch (const InvalidArgumentError& e) {
    std::cerr << error_json("invalid_argument", e.what()).dump() << "\n";
    return 2;
  } catch (const SingularGeometryError& e) {
    std::cerr << error_json("singular_geometry", e.what()).dump() << "\n";
    return 1;
  } catch (const FloquetInstabilityError& e) {
    std::cerr << error_json("floquet_instability", e.what()).dump() << "\n";
    return 1;
  } catch (const ConvergenceError& e) {
    std::cerr << error_json("convergence", e.what()).dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal", e.what()).dump() << "\n";
    return 1;
  }
}
