#include "kinklab/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include "kinklab/errors.hpp"

namespace kinklab {

void CameraModel::validate() const {
  if (!(pixel_size > 0.0)) throw InvalidArgumentError("CameraModel: pixel_size must be > 0");
  if (!(psf_sigma > 0.0)) throw InvalidArgumentError("CameraModel: psf_sigma must be > 0");
  if (width_px < 1 || height_px < 1)
    throw InvalidArgumentError("CameraModel: image extent must be positive");
}

Points2 project(const Coords& points, const CameraModel& camera) {
  const Real az = camera.azimuth_deg * constants::pi / 180.0;
  const Real el = camera.elevation_deg * constants::pi / 180.0;
  const Real ca = std::cos(az), sa = std::sin(az);
  const Real ce = std::cos(el), se = std::sin(el);
  Points2 out(points.rows(), 2);
  for (Index i = 0; i < points.rows(); ++i) {
    const Real x = ca * points(i, 0) - sa * points(i, 1);
    const Real y = sa * points(i, 0) + ca * points(i, 1);
    const Real z = points(i, 2);
    out(i, 0) = x;
    out(i, 1) = y * ce + z * se;
  }
  return out;
}

namespace {

inline Real normal_cdf(Real x) { return 0.5 * std::erfc(-x / std::sqrt(Real(2))); }

// Pixel centre (col, row) -> physical (u, v); the image centre is (0, 0) and
// rows count downward from v_max.
struct PixelGrid {
  const CameraModel& cam;
  Real u_of_col(Real col) const { return (col - 0.5 * (cam.width_px - 1)) * cam.pixel_size; }
  Real v_of_row(Real row) const { return (0.5 * (cam.height_px - 1) - row) * cam.pixel_size; }
  Real col_of_u(Real u) const { return u / cam.pixel_size + 0.5 * (cam.width_px - 1); }
  Real row_of_v(Real v) const { return 0.5 * (cam.height_px - 1) - v / cam.pixel_size; }
};

void deposit(Eigen::ArrayXXd& img, const CameraModel& cam, Real u, Real v) {
  const PixelGrid grid{cam};
  const Real sigma_px = cam.psf_sigma / cam.pixel_size;
  const int halo = int(std::ceil(6.0 * sigma_px)) + 1;
  const Real col_c = grid.col_of_u(u);
  const Real row_c = grid.row_of_v(v);
  const int col_lo = std::max(0, int(std::floor(col_c)) - halo);
  const int col_hi = std::min(cam.width_px - 1, int(std::ceil(col_c)) + halo);
  const int row_lo = std::max(0, int(std::floor(row_c)) - halo);
  const int row_hi = std::min(cam.height_px - 1, int(std::ceil(row_c)) + halo);
  if (col_lo > col_hi || row_lo > row_hi) return;

  // Pixel-integrated Gaussian: product of erf differences, exactly unit flux
  // over the infinite grid.
  std::vector<Real> wu(size_t(col_hi - col_lo + 1)), wv(size_t(row_hi - row_lo + 1));
  for (int c = col_lo; c <= col_hi; ++c) {
    const Real lo = (Real(c) - 0.5 - col_c) / sigma_px;
    const Real hi = (Real(c) + 0.5 - col_c) / sigma_px;
    wu[size_t(c - col_lo)] = normal_cdf(hi) - normal_cdf(lo);
  }
  for (int r = row_lo; r <= row_hi; ++r) {
    // Row index grows downward while v grows upward; the integral bounds swap.
    const Real lo = (grid.v_of_row(Real(r)) - 0.5 * cam.pixel_size - v) / cam.psf_sigma;
    const Real hi = (grid.v_of_row(Real(r)) + 0.5 * cam.pixel_size - v) / cam.psf_sigma;
    wv[size_t(r - row_lo)] = normal_cdf(hi) - normal_cdf(lo);
  }
  for (int r = row_lo; r <= row_hi; ++r)
    for (int c = col_lo; c <= col_hi; ++c)
      img(r, c) += wv[size_t(r - row_lo)] * wu[size_t(c - col_lo)];
}

}  // namespace

IntegrationImage render(const std::vector<Coords>& samples, const std::vector<IonSpecies>& species,
                        const CameraModel& camera) {
  camera.validate();
  if (samples.empty()) throw InvalidArgumentError("render: empty trajectory");
  IntegrationImage img;
  img.camera = camera;
  img.intensity = Eigen::ArrayXXd::Zero(camera.height_px, camera.width_px);
  img.n_samples = Index(samples.size());
  for (const IonSpecies& s : species)
    if (s.bright) ++img.n_bright;

  for (const Coords& frame : samples) {
    if (frame.rows() != Index(species.size()))
      throw InvalidArgumentError("render: frame/species size mismatch");
    const Points2 pts = project(frame, camera);
    for (Index i = 0; i < pts.rows(); ++i) {
      if (!species[size_t(i)].bright) continue;
      deposit(img.intensity, camera, pts(i, 0), pts(i, 1));
    }
  }
  img.deposited_flux = Real(img.n_samples) * Real(img.n_bright);
  return img;
}

IntegrationImage render(const Trajectory& trajectory, const std::vector<IonSpecies>& species,
                        const CameraModel& camera, int stride) {
  if (trajectory.positions.empty()) throw InvalidArgumentError("render: empty trajectory");
  std::vector<Coords> samples;
  for (size_t k = 0; k < trajectory.positions.size(); k += size_t(std::max(stride, 1)))
    samples.push_back(trajectory.positions[k]);
  return render(samples, species, camera);
}

IntegrationImage render(const Configuration& config, const CameraModel& camera) {
  return render(std::vector<Coords>{config.positions}, config.species, camera);
}

std::vector<SpotMetrics> spot_metrics(const IntegrationImage& image, Real rel_threshold) {
  const auto& img = image.intensity;
  const int h = int(img.rows()), w = int(img.cols());
  const Real thresh = img.maxCoeff() * rel_threshold;
  std::vector<int> label(size_t(h) * size_t(w), -1);
  auto at = [&](int r, int c) -> int& { return label[size_t(r) * size_t(w) + size_t(c)]; };

  int n_components = 0;
  std::vector<std::vector<std::pair<int, int>>> comps;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (img(r, c) <= thresh || at(r, c) != -1) continue;
      // flood fill
      std::vector<std::pair<int, int>> stack{{r, c}}, pixels;
      at(r, c) = n_components;
      while (!stack.empty()) {
        auto [pr, pc] = stack.back();
        stack.pop_back();
        pixels.push_back({pr, pc});
        const int dr[4] = {1, -1, 0, 0}, dc[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nr = pr + dr[k], nc = pc + dc[k];
          if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
          if (img(nr, nc) <= thresh || at(nr, nc) != -1) continue;
          at(nr, nc) = n_components;
          stack.push_back({nr, nc});
        }
      }
      comps.push_back(std::move(pixels));
      ++n_components;
    }

  const PixelGrid grid{image.camera};
  std::vector<SpotMetrics> spots;
  for (const auto& pixels : comps) {
    SpotMetrics s;
    Real flux = 0.0, su = 0.0, sv = 0.0;
    for (const auto& [r, c] : pixels) {
      const Real wgt = img(r, c);
      flux += wgt;
      su += wgt * grid.u_of_col(Real(c));
      sv += wgt * grid.v_of_row(Real(r));
    }
    if (flux <= 0.0) continue;
    s.flux = flux;
    s.centroid_u = su / flux;
    s.centroid_v = sv / flux;
    Real vu = 0.0, vv = 0.0;
    for (const auto& [r, c] : pixels) {
      const Real wgt = img(r, c);
      const Real du = grid.u_of_col(Real(c)) - s.centroid_u;
      const Real dv = grid.v_of_row(Real(r)) - s.centroid_v;
      vu += wgt * du * du;
      vv += wgt * dv * dv;
    }
    s.width_u = std::sqrt(vu / flux);
    s.width_v = std::sqrt(vv / flux);

    // Multiple well-separated peaks inside one component: overlapping spots.
    int peaks = 0;
    Real peak_max = 0.0;
    for (const auto& [r, c] : pixels) peak_max = std::max(peak_max, img(r, c));
    std::vector<std::pair<Real, Real>> peak_pos;
    for (const auto& [r, c] : pixels) {
      if (img(r, c) < 0.5 * peak_max) continue;
      bool is_peak = true;
      for (int dr = -1; dr <= 1 && is_peak; ++dr)
        for (int dc = -1; dc <= 1 && is_peak; ++dc) {
          const int nr = r + dr, nc = c + dc;
          if (nr < 0 || nr >= h || nc < 0 || nc >= w) continue;
          if (img(nr, nc) > img(r, c)) is_peak = false;
        }
      if (!is_peak) continue;
      const Real pu = grid.u_of_col(Real(c)), pv = grid.v_of_row(Real(r));
      bool distinct = true;
      for (const auto& [qu, qv] : peak_pos)
        if (std::hypot(pu - qu, pv - qv) < 3.0 * image.camera.psf_sigma) distinct = false;
      if (distinct) {
        peak_pos.push_back({pu, pv});
        ++peaks;
      }
    }
    s.overlapping = peaks > 1;
    spots.push_back(s);
  }
  std::sort(spots.begin(), spots.end(),
            [](const SpotMetrics& a, const SpotMetrics& b) { return a.centroid_u < b.centroid_u; });
  return spots;
}

std::vector<SpotMetrics> spot_metrics_windows(const IntegrationImage& image,
                                              const Points2& centers, Real window_radius) {
  const auto& img = image.intensity;
  const PixelGrid grid{image.camera};
  const Real r2 = window_radius * window_radius;
  std::vector<SpotMetrics> spots;
  for (Index c = 0; c < centers.rows(); ++c) {
    const Real u0 = centers(c, 0), v0 = centers(c, 1);
    const int col_lo = std::max(0, int(std::floor(grid.col_of_u(u0 - window_radius))));
    const int col_hi = std::min(int(img.cols()) - 1, int(std::ceil(grid.col_of_u(u0 + window_radius))));
    const int row_lo = std::max(0, int(std::floor(grid.row_of_v(v0 + window_radius))));
    const int row_hi = std::min(int(img.rows()) - 1, int(std::ceil(grid.row_of_v(v0 - window_radius))));
    SpotMetrics s;
    Real flux = 0.0, su = 0.0, sv = 0.0;
    for (int r = row_lo; r <= row_hi; ++r)
      for (int cc = col_lo; cc <= col_hi; ++cc) {
        const Real du = grid.u_of_col(Real(cc)) - u0;
        const Real dv = grid.v_of_row(Real(r)) - v0;
        if (du * du + dv * dv > r2) continue;
        const Real w = img(r, cc);
        flux += w;
        su += w * grid.u_of_col(Real(cc));
        sv += w * grid.v_of_row(Real(r));
      }
    if (flux > 0.0) {
      s.flux = flux;
      s.centroid_u = su / flux;
      s.centroid_v = sv / flux;
      Real vu = 0.0, vv = 0.0;
      for (int r = row_lo; r <= row_hi; ++r)
        for (int cc = col_lo; cc <= col_hi; ++cc) {
          const Real du = grid.u_of_col(Real(cc)) - u0;
          const Real dv = grid.v_of_row(Real(r)) - v0;
          if (du * du + dv * dv > r2) continue;
          const Real w = img(r, cc);
          vu += w * std::pow(grid.u_of_col(Real(cc)) - s.centroid_u, 2);
          vv += w * std::pow(grid.v_of_row(Real(r)) - s.centroid_v, 2);
        }
      s.width_u = std::sqrt(vu / flux);
      s.width_v = std::sqrt(vv / flux);
    }
    spots.push_back(s);
  }
  return spots;
}

void write_pgm16(const IntegrationImage& image, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgumentError("write_pgm16: cannot open " + path);
  const auto& img = image.intensity;
  const Real peak = std::max(img.maxCoeff(), Real(1e-300));
  os << "P5\n" << img.cols() << ' ' << img.rows() << "\n65535\n";
  for (Index r = 0; r < img.rows(); ++r)
    for (Index c = 0; c < img.cols(); ++c) {
      const unsigned v = unsigned(std::lround(img(r, c) / peak * 65535.0));
      os.put(char((v >> 8) & 0xff));
      os.put(char(v & 0xff));
    }
}

}  // namespace kinklab
