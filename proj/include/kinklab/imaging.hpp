#pragma once

#include <string>
#include <vector>

#include "kinklab/configuration.hpp"
#include "kinklab/dynamics.hpp"
#include "kinklab/types.hpp"

namespace kinklab {

// Orthographic camera. Points rotate by `azimuth` about the z axis, then the
// image-plane coordinates are u = x', v = y' cos(el) + z' sin(el); elevation
// is the viewing angle below the xy plane (0: looking along -z; -45 deg views
// a crystal in the y = -z plane top-on; -90 deg maps v to -z).
// Lengths (pixel_size, psf_sigma, input points) share one unit, nondimensional
// or meters.
struct CameraModel {
  Real azimuth_deg = 0.0;
  Real elevation_deg = 0.0;
  Real pixel_size = 1.0;
  Real psf_sigma = 1.0;  // same unit as pixel_size
  int width_px = 512;
  int height_px = 128;

  void validate() const;
};

Points2 project(const Coords& points, const CameraModel& camera);

// Time-integrated fluorescence image: every bright ion at every sample
// deposits one unit of flux as a pixel-integrated Gaussian of width
// psf_sigma centred on its projected position. Dark ions deposit nothing.
struct IntegrationImage {
  Eigen::ArrayXXd intensity;  // height x width, row 0 = top (v max)
  CameraModel camera;
  Index n_samples = 0;
  Index n_bright = 0;
  Real deposited_flux = 0.0;  // n_samples * n_bright

  Real total_intensity() const { return intensity.sum(); }
};

IntegrationImage render(const std::vector<Coords>& samples, const std::vector<IonSpecies>& species,
                        const CameraModel& camera);
IntegrationImage render(const Trajectory& trajectory, const std::vector<IonSpecies>& species,
                        const CameraModel& camera, int stride = 1);
IntegrationImage render(const Configuration& config, const CameraModel& camera);

// Connected-component spot analysis (4-connectivity above a relative
// threshold). Widths are the square roots of the intensity-weighted second
// moments along u and v, in the camera length unit.
struct SpotMetrics {
  Real centroid_u = 0.0;
  Real centroid_v = 0.0;
  Real width_u = 0.0;
  Real width_v = 0.0;
  Real flux = 0.0;
  bool overlapping = false;  // more than one well-separated peak inside
};
std::vector<SpotMetrics> spot_metrics(const IntegrationImage& image, Real rel_threshold = 0.02);

// Fixed-window variant: intensity moments inside a disc of the given radius
// around each supplied centre (camera length units). Robust when neighbouring
// spots' tails overlap, at the price of clipping the widest tails equally.
std::vector<SpotMetrics> spot_metrics_windows(const IntegrationImage& image,
                                              const Points2& centers, Real window_radius);

// 16-bit PGM (P5, big-endian), normalized to the maximum intensity, plus a
// JSON metadata sidecar describing the camera and the normalization.
void write_pgm16(const IntegrationImage& image, const std::string& path);
std::string image_metadata_json(const IntegrationImage& image);

}  // namespace kinklab
