#include "kinklab/configuration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "kinklab/errors.hpp"

namespace kinklab {

Configuration Configuration::uniform(const Coords& positions, DofMask mask) {
  Configuration c;
  c.positions = positions;
  c.species.assign(size_t(positions.rows()), IonSpecies::reference());
  c.dof_mask = mask;
  c.apply_mask();
  return c;
}

void Configuration::apply_mask() {
  for (int a = 0; a < 3; ++a)
    if (!dof_mask.active[a]) positions.col(a).setZero();
}

void Configuration::validate() const {
  if (positions.rows() != Index(species.size()))
    throw InvalidArgumentError("Configuration: species count != ion count");
  if (!positions.allFinite()) throw InvalidArgumentError("Configuration: non-finite position");
  for (const auto& s : species) s.validate();
  for (int a = 0; a < 3; ++a)
    if (!dof_mask.active[a] && positions.col(a).cwiseAbs().maxCoeff() != 0.0)
      throw InvalidArgumentError("Configuration: masked coordinate not zero");
  if (n_ions() > 1 && min_pair_distance() <= 0.0)
    throw SingularGeometryError("Configuration: coincident ions");
}

Vec Configuration::active_coords() const {
  Vec v(n_dof());
  Index k = 0;
  for (Index i = 0; i < n_ions(); ++i)
    for (int a = 0; a < 3; ++a)
      if (dof_mask.active[a]) v[k++] = positions(i, a);
  return v;
}

void Configuration::set_active_coords(const Vec& v) {
  if (v.size() != n_dof()) throw InvalidArgumentError("set_active_coords: size mismatch");
  Index k = 0;
  for (Index i = 0; i < n_ions(); ++i)
    for (int a = 0; a < 3; ++a)
      if (dof_mask.active[a]) positions(i, a) = v[k++];
}

Coords Configuration::expand(const Vec& v) const {
  if (v.size() != n_dof()) throw InvalidArgumentError("expand: size mismatch");
  Coords out = Coords::Zero(n_ions(), 3);
  Index k = 0;
  for (Index i = 0; i < n_ions(); ++i)
    for (int a = 0; a < 3; ++a)
      if (dof_mask.active[a]) out(i, a) = v[k++];
  return out;
}

Real Configuration::min_pair_distance() const {
  Real best = std::numeric_limits<Real>::infinity();
  for (Index i = 0; i < n_ions(); ++i)
    for (Index j = i + 1; j < n_ions(); ++j)
      best = std::min(best, (positions.row(i) - positions.row(j)).norm());
  return best;
}

Real Configuration::lattice_spacing() const {
  if (n_ions() < 2) return 1.0;
  std::vector<Index> order = axial_order();
  std::vector<Real> gaps;
  gaps.reserve(size_t(n_ions()) - 1);
  for (size_t k = 0; k + 1 < order.size(); ++k)
    gaps.push_back(positions(order[k + 1], 0) - positions(order[k], 0));
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  return gaps[gaps.size() / 2];
}

std::vector<Index> Configuration::axial_order() const {
  std::vector<Index> order(static_cast<size_t>(n_ions()), Index(0));
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return positions(a, 0) < positions(b, 0); });
  return order;
}

bool Configuration::all_reference_species() const {
  return std::all_of(species.begin(), species.end(), [](const IonSpecies& s) {
    return s.mass_ratio == 1.0 && s.charge_ratio == 1.0;
  });
}

std::string to_csv(const Configuration& c) {
  std::ostringstream os;
  os.precision(17);
  os << "index,x,y,z,mass_ratio,charge_ratio,bright\n";
  for (Index i = 0; i < c.n_ions(); ++i) {
    os << i << ',' << c.positions(i, 0) << ',' << c.positions(i, 1) << ',' << c.positions(i, 2)
       << ',' << c.species[size_t(i)].mass_ratio << ',' << c.species[size_t(i)].charge_ratio << ','
       << (c.species[size_t(i)].bright ? 1 : 0) << '\n';
  }
  return os.str();
}

Configuration configuration_from_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  std::vector<std::array<Real, 6>> rows;
  bool header_seen = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line.find("index") != std::string::npos) continue;  // header row
    }
    std::array<Real, 6> row{};
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');  // index column, ignored
    for (int k = 0; k < 6; ++k) {
      if (!std::getline(ls, cell, ','))
        throw InvalidArgumentError("configuration_from_csv: short row: " + line);
      row[size_t(k)] = std::stod(cell);
    }
    rows.push_back(row);
  }
  Configuration c;
  c.positions.resize(Index(rows.size()), 3);
  c.species.resize(rows.size());
  for (size_t i = 0; i < rows.size(); ++i) {
    c.positions(Index(i), 0) = rows[i][0];
    c.positions(Index(i), 1) = rows[i][1];
    c.positions(Index(i), 2) = rows[i][2];
    c.species[i] = IonSpecies{rows[i][3], rows[i][4], rows[i][5] != 0.0};
  }
  return c;
}

}  // namespace kinklab
