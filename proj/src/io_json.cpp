#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kinklab/errors.hpp"
#include "kinklab/io.hpp"

namespace kinklab {

using nlohmann::json;

namespace {

json coords_json(const Coords& p) {
  json rows = json::array();
  for (Index i = 0; i < p.rows(); ++i) rows.push_back({p(i, 0), p(i, 1), p(i, 2)});
  return rows;
}

json vec_json(const Vec& v) {
  json out = json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json config_json_obj(const Configuration& c) {
  json species = json::array();
  for (const auto& s : c.species)
    species.push_back({{"mass_ratio", s.mass_ratio},
                       {"charge_ratio", s.charge_ratio},
                       {"bright", s.bright}});
  return {{"positions", coords_json(c.positions)},
          {"species", species},
          {"dof_mask", {c.dof_mask.active[0], c.dof_mask.active[1], c.dof_mask.active[2]}}};
}

json units_json_obj(const UnitSystem& u) {
  return {{"kind", u.kind_name()},
          {"reference_mass_kg", u.reference_mass()},
          {"reference_charge_C", u.reference_charge()},
          {"reference_frequency_rad_s", u.reference_frequency()},
          {"doppler_temperature_K", u.doppler_temperature()},
          {"length_unit_m", u.length_unit()},
          {"time_unit_s", u.time_unit()},
          {"energy_unit_J", u.energy_unit()}};
}

json pseudo_json_obj(const PseudoTrap& t) {
  return {{"model", "pseudopotential"}, {"gamma_y", t.gamma_y}, {"gamma_z", t.gamma_z}};
}

json paul_json_obj(const PaulTrap& t) {
  return {{"model", "paul"}, {"a_x", t.a_x}, {"a_y", t.a_y},
          {"a_z", t.a_z()}, {"a_yz", t.a_yz}, {"q", t.q}};
}

json symmetry_json(const SymmetryFlags& f) {
  return {{"sym_x", f.sym_x}, {"sym_y", f.sym_y}, {"sym_z", f.sym_z},
          {"sym_xy_combined", f.sym_xy_combined}};
}

json critical_point_obj(const CriticalPoint& cp) {
  return {{"config", config_json_obj(cp.config)},
          {"energy", cp.energy},
          {"grad_norm", cp.grad_norm},
          {"eigenvalues", vec_json(cp.eigenvalues)},
          {"n_negative", cp.n_negative},
          {"local_index", cp.local_index},
          {"stable", cp.stable},
          {"at_bifurcation", cp.at_bifurcation},
          {"symmetry", symmetry_json(cp.symmetry)},
          {"zero_threshold", cp.zero_threshold},
          {"drifted_to_saddle", cp.drifted_to_saddle}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string configuration_json(const Configuration& c, const std::optional<PseudoTrap>& pseudo,
                               const std::optional<PaulTrap>& paul,
                               const std::optional<UnitSystem>& units) {
  json j = {{"configuration", config_json_obj(c)}};
  if (pseudo) j["trap"] = pseudo_json_obj(*pseudo);
  if (paul) j["trap"] = paul_json_obj(*paul);
  if (units) j["units"] = units_json_obj(*units);
  return dump(j);
}

std::string critical_point_json(const CriticalPoint& cp, const PseudoTrap& trap,
                                const std::optional<UnitSystem>& units) {
  json j = critical_point_obj(cp);
  j["trap"] = pseudo_json_obj(trap);
  if (units) j["units"] = units_json_obj(*units);
  return dump(j);
}

std::string branch_csv(const Branch& b) {
  std::ostringstream os;
  os.precision(17);
  os << "parameter,energy,n_negative,i0,min_eigenvalue\n";
  for (const BranchSample& s : b.samples)
    os << s.parameter << ',' << s.point.energy << ',' << s.point.n_negative << ','
       << s.point.local_index << ',' << s.point.min_eigenvalue() << '\n';
  return os.str();
}

std::string branch_json(const Branch& b) {
  json samples = json::array();
  for (const BranchSample& s : b.samples)
    samples.push_back({{"parameter", s.parameter}, {"point", critical_point_obj(s.point)}});
  json events = json::array();
  for (const BifurcationEvent& e : b.events) {
    const char* kind = e.kind == BifurcationKind::Pitchfork    ? "pitchfork"
                       : e.kind == BifurcationKind::SaddleNode ? "saddle_node"
                                                               : "unclassified";
    events.push_back({{"parameter", e.parameter},
                      {"bracket_width", e.bracket_width},
                      {"kind", kind},
                      {"two_mode", e.two_mode},
                      {"n_negative_left", e.n_negative_left},
                      {"n_negative_right", e.n_negative_right},
                      {"soft_mode", vec_json(e.soft_mode)},
                      {"soft_mode_odd", symmetry_json(e.soft_mode_odd)}});
  }
  return dump({{"parameter_name", b.parameter_name},
               {"samples", samples},
               {"events", events},
               {"terminated_at_fold", b.terminated_at_fold},
               {"termination", b.termination}});
}

std::string spectrum_csv(const ModeSpectrum& s) {
  std::ostringstream os;
  os.precision(17);
  os << "mode,lambda,omega,participation\n";
  for (Index j = 0; j < s.lambdas.size(); ++j)
    os << j << ',' << s.lambdas[j] << ',' << s.frequencies[j] << ',' << s.localization[j] << '\n';
  return os.str();
}

std::string mode_vectors_json(const ModeSpectrum& s) {
  json modes = json::array();
  for (Index j = 0; j < s.mode_matrix.cols(); ++j) modes.push_back(vec_json(s.mode_matrix.col(j)));
  return dump({{"lambdas", vec_json(s.lambdas)},
               {"frequencies", vec_json(s.frequencies)},
               {"participation", vec_json(s.localization)},
               {"mode_vectors", modes}});
}

std::string pn_landscape_csv(const PNLandscape& l) {
  std::ostringstream os;
  os.precision(17);
  os << "offset,E_min,E_saddle_left,E_saddle_right,stable\n";
  for (const PNSite& s : l.sites) {
    if (!s.exists) {
      os << s.offset << ",,,," << 0 << '\n';
      continue;
    }
    std::string left = "", right = "";
    for (const PNBarrier& b : l.barriers) {
      std::ostringstream e;
      e.precision(17);
      e << b.saddle_energy;
      if (b.site_lo == s.offset - 1) left = e.str();
      if (b.site_lo == s.offset) right = e.str();
    }
    os << s.offset << ',' << s.energy << ',' << left << ',' << right << ','
       << (s.stable ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string pn_landscape_json(const PNLandscape& l) {
  json sites = json::array();
  for (const PNSite& s : l.sites) {
    json js = {{"offset", s.offset}, {"exists", s.exists}, {"stable", s.stable}};
    if (s.exists) {
      js["energy"] = s.energy;
      if (l.units) js["energy_kbtd"] = l.to_doppler_units(s.energy);
    }
    sites.push_back(js);
  }
  json barriers = json::array();
  for (const PNBarrier& b : l.barriers) {
    json jb = {{"between", {b.site_lo, b.site_lo + 1}},
               {"saddle_energy", b.saddle_energy},
               {"n_negative", b.n_negative}};
    if (l.units) jb["saddle_energy_kbtd"] = l.to_doppler_units(b.saddle_energy);
    barriers.push_back(jb);
  }
  json j = {{"trap", pseudo_json_obj(l.trap)},
            {"n_ions", l.n_ions},
            {"kink_type", l.kink_type},
            {"ground_energy", l.ground_energy},
            {"sites", sites},
            {"barriers", barriers}};
  if (l.units) j["units"] = units_json_obj(*l.units);
  return dump(j);
}

std::string trajectory_csv(const Trajectory& t) {
  std::ostringstream os;
  os.precision(17);
  const Index n = t.positions.empty() ? 0 : t.positions.front().rows();
  os << "t,energy";
  for (Index i = 0; i < n; ++i)
    os << ",x" << i << ",y" << i << ",z" << i << ",vx" << i << ",vy" << i << ",vz" << i;
  os << '\n';
  for (size_t s = 0; s < t.times.size(); ++s) {
    os << t.times[s] << ',' << (s < t.energies.size() ? t.energies[s] : 0.0);
    for (Index i = 0; i < n; ++i) {
      const Coords& p = t.positions[s];
      const Coords& v = t.velocities[s];
      os << ',' << p(i, 0) << ',' << p(i, 1) << ',' << p(i, 2) << ',' << v(i, 0) << ','
         << v(i, 1) << ',' << v(i, 2);
    }
    os << '\n';
  }
  return os.str();
}

std::string fit_result_json(const FitResult& r) {
  json residuals = json::array();
  for (const Vec& v : r.residuals) residuals.push_back(vec_json(v));
  return dump({{"params",
                {{"a_x", r.params.a_x},
                 {"a_y", r.params.a_y},
                 {"a_yz", r.params.a_yz},
                 {"q", r.params.q},
                 {"azimuth_deg", r.params.azimuth_deg},
                 {"elevation_deg", r.params.elevation_deg}}},
               {"mean_residual_m", r.mean_residual},
               {"max_residual_m", r.max_residual},
               {"objective_m2", r.objective},
               {"converged", r.converged},
               {"iterations", r.iterations},
               {"n_evaluations", r.n_evaluations},
               {"per_ion_residuals_m", residuals},
               {"secular_freq_hz", {r.secular_freq_hz[0], r.secular_freq_hz[1],
                                    r.secular_freq_hz[2]}},
               {"secular_ratio", r.secular_ratio}});
}

std::string dark_fit_json(const DarkIonFitResult& r) {
  json scan = json::array();
  for (const auto& h : r.scan)
    scan.push_back({{"site", h.site}, {"mass_ratio", h.mass_ratio},
                    {"mean_residual_m", h.mean_residual}});
  return dump({{"best",
                {{"site", r.best.site},
                 {"mass_ratio", r.best.mass_ratio},
                 {"mean_residual_m", r.best.mean_residual}}},
               {"minimal_mass_ratio", r.minimal_mass_ratio},
               {"paul_verified_residual_m", r.paul_verified_residual},
               {"converged", r.converged},
               {"scan", scan}});
}

std::string image_metadata_json(const IntegrationImage& image) {
  return dump({{"camera",
                {{"azimuth_deg", image.camera.azimuth_deg},
                 {"elevation_deg", image.camera.elevation_deg},
                 {"pixel_size", image.camera.pixel_size},
                 {"psf_sigma", image.camera.psf_sigma},
                 {"width_px", image.camera.width_px},
                 {"height_px", image.camera.height_px}}},
               {"n_samples", image.n_samples},
               {"n_bright", image.n_bright},
               {"deposited_flux", image.deposited_flux},
               {"total_intensity", image.total_intensity()},
               {"pgm_normalization", "max intensity -> 65535"}});
}

std::string omega_low_curve_csv(const OmegaLowCurve& c) {
  std::ostringstream os;
  os.precision(17);
  os << "ratio,omega_low,participation,stable\n";
  for (const OmegaLowSample& s : c.samples)
    os << s.ratio << ',' << s.omega_low << ',' << s.participation << ',' << (s.stable ? 1 : 0)
       << '\n';
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgumentError("write_text_file: cannot open " + path);
  os << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgumentError("read_text_file: cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace kinklab
