#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "viewgrasp/geometry.hpp"

namespace viewgrasp {

namespace defaults {
/// l_g: side of the fixed projection plane used for grasp views (meters).
inline constexpr double grasp_plane_side = 0.45;
inline constexpr int grasp_bins = 64;
inline constexpr int recognition_bins = 32;
inline constexpr double camera_distance = 1.0;
}  // namespace defaults

enum class SetupKind { Orthographic, Orbit, Sphere };
enum class ProjectionMode { ScaleInvariant, FixedSize };

std::string_view to_string(SetupKind kind);
std::string_view to_string(ProjectionMode mode);
SetupKind parse_setup_kind(std::string_view text);
ProjectionMode parse_projection_mode(std::string_view text);

/// Camera rig description. Angular intervals are stored as counts so that
/// the "count" spelling (e.g. sphere 7 x 4) and the "interval" spelling
/// (alpha = 18 deg) share one representation.
class ViewSetup {
 public:
  static ViewSetup orthographic() { return ViewSetup(SetupKind::Orthographic, 0, 0, 0.0); }
  static ViewSetup orbit(double alpha_deg, double phi_deg) {
    return ViewSetup(SetupKind::Orbit, count_for(alpha_deg, 360.0, "alpha"), 1, phi_deg);
  }
  static ViewSetup orbit_counts(int azimuths, double phi_deg) {
    require(azimuths > 0, ErrorKind::Argument, "azimuth count must be positive");
    return ViewSetup(SetupKind::Orbit, azimuths, 1, phi_deg);
  }
  static ViewSetup sphere(double alpha_deg, double beta_deg) {
    return ViewSetup(SetupKind::Sphere, count_for(alpha_deg, 360.0, "alpha"),
                     count_for(beta_deg, 180.0, "beta"), 0.0);
  }
  static ViewSetup sphere_counts(int azimuths, int elevations) {
    require(azimuths > 0 && elevations > 0, ErrorKind::Argument, "view counts must be positive");
    return ViewSetup(SetupKind::Sphere, azimuths, elevations, 0.0);
  }

  SetupKind kind() const { return kind_; }
  int azimuth_count() const { return azimuths_; }
  int elevation_count() const { return elevations_; }
  double alpha_deg() const { return azimuths_ > 0 ? 360.0 / azimuths_ : 0.0; }
  double beta_deg() const { return kind_ == SetupKind::Sphere ? 180.0 / elevations_ : 0.0; }
  double phi_deg() const { return phi_deg_; }

  /// Closed-form view count: 3, 360/alpha, or (360/alpha)(180/beta).
  int view_count() const {
    switch (kind_) {
      case SetupKind::Orthographic: return 3;
      case SetupKind::Orbit: return azimuths_;
      case SetupKind::Sphere: return azimuths_ * elevations_;
    }
    return 0;
  }

 private:
  ViewSetup(SetupKind kind, int azimuths, int elevations, double phi)
      : kind_(kind), azimuths_(azimuths), elevations_(elevations), phi_deg_(phi) {}

  static int count_for(double interval_deg, double span_deg, const char* name) {
    require(interval_deg > 0 && interval_deg <= span_deg, ErrorKind::Argument,
            std::string(name) + " must lie in (0, " + std::to_string(static_cast<int>(span_deg)) + "]");
    const double ratio = span_deg / interval_deg;
    const double rounded = std::round(ratio);
    require(std::abs(ratio - rounded) <= 1e-9 * ratio, ErrorKind::Argument,
            std::string(name) + " = " + std::to_string(interval_deg) + " does not divide " +
                std::to_string(static_cast<int>(span_deg)));
    return static_cast<int>(rounded);
  }

  SetupKind kind_;
  int azimuths_;
  int elevations_;
  double phi_deg_;
};

/// Orthographic camera. pose.z() points from the camera origin toward the
/// object centre; the image plane is spanned by pose.x() (u) and pose.y() (v).
template <typename Scalar>
struct VirtualCamera {
  BasicReferenceFrame<Scalar> pose;
  Scalar plane_side = Scalar(0);
  int bins = 0;

  Scalar bin_size() const { return plane_side / static_cast<Scalar>(bins); }
};

/// k x k grid indexed (row, col) = (v, u). Depth is the distance from the
/// camera plane; 0 marks an empty bin.
template <typename Scalar>
struct DepthView {
  using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Grid grid;
  VirtualCamera<Scalar> camera;
  ProjectionMode mode = ProjectionMode::ScaleInvariant;

  int bins() const { return static_cast<int>(grid.rows()); }
  Eigen::Index occupied() const { return (grid.array() > Scalar(0)).count(); }
};

namespace detail {

// Camera looking back at the frame origin from direction (azimuth, elevation).
// The u axis is the azimuthal tangent, so rigs stay defined at the poles.
template <typename Scalar>
VirtualCamera<Scalar> camera_at(const BasicReferenceFrame<Scalar>& frame, double azimuth_rad,
                                double elevation_rad, Scalar distance, Scalar plane_side, int bins) {
  const Eigen::Vector3d dir(std::cos(elevation_rad) * std::cos(azimuth_rad),
                            std::cos(elevation_rad) * std::sin(azimuth_rad), std::sin(elevation_rad));
  const Eigen::Vector3d x(-std::sin(azimuth_rad), std::cos(azimuth_rad), 0.0);
  const Eigen::Vector3d z = -dir;
  Eigen::Matrix3d local;
  local.col(0) = x;
  local.col(1) = z.cross(x);
  local.col(2) = z;

  VirtualCamera<Scalar> cam;
  cam.pose.axes = frame.axes * local.cast<Scalar>();
  cam.pose.origin = frame.origin + distance * (frame.axes * dir.cast<Scalar>());
  cam.plane_side = plane_side;
  cam.bins = bins;
  return cam;
}

inline double deg2rad(double deg) { return deg * M_PI / 180.0; }

}  // namespace detail

/// Places cameras at a constant distance from frame.origin. Orthographic puts
/// one camera on each of +X, +Y, +Z; orbit circles Z at elevation phi; sphere
/// adds elevation rings centred in equal bands of [-90, 90] degrees.
template <typename Scalar>
std::vector<VirtualCamera<Scalar>> generate_cameras(const ViewSetup& setup,
                                                    const BasicReferenceFrame<Scalar>& frame,
                                                    Scalar distance, Scalar plane_side, int bins) {
  require(distance > 0, ErrorKind::Argument, "camera distance must be positive");
  require(bins > 0, ErrorKind::Argument, "bin count must be positive");
  std::vector<VirtualCamera<Scalar>> cams;
  cams.reserve(static_cast<std::size_t>(setup.view_count()));
  switch (setup.kind()) {
    case SetupKind::Orthographic:
      cams.push_back(detail::camera_at(frame, 0.0, 0.0, distance, plane_side, bins));
      cams.push_back(detail::camera_at(frame, M_PI / 2, 0.0, distance, plane_side, bins));
      cams.push_back(detail::camera_at(frame, 0.0, M_PI / 2, distance, plane_side, bins));
      break;
    case SetupKind::Orbit: {
      const double step = 2 * M_PI / setup.azimuth_count();
      const double elev = detail::deg2rad(setup.phi_deg());
      for (int a = 0; a < setup.azimuth_count(); ++a)
        cams.push_back(detail::camera_at(frame, a * step, elev, distance, plane_side, bins));
      break;
    }
    case SetupKind::Sphere: {
      const double step = 2 * M_PI / setup.azimuth_count();
      const double band = M_PI / setup.elevation_count();
      for (int e = 0; e < setup.elevation_count(); ++e) {
        const double elev = -M_PI / 2 + band * (e + 0.5);
        for (int a = 0; a < setup.azimuth_count(); ++a)
          cams.push_back(detail::camera_at(frame, a * step, elev, distance, plane_side, bins));
      }
      break;
    }
  }
  return cams;
}

/// l_p (largest bounding-box side) for recognition views, l_g for grasp views.
template <typename Scalar>
Scalar projection_plane_side(ProjectionMode mode, const BasicAabb<Scalar>& box,
                             Scalar fixed_side = Scalar(defaults::grasp_plane_side)) {
  if (mode == ProjectionMode::FixedSize) return fixed_side;
  const Scalar side = box.largest_side();
  require(side > Scalar(0), ErrorKind::DegenerateGeometry, "bounding box has zero extent");
  return side;
}

/// Bin index floor((coord + l/2) / (l/k)) clamped to k - 1; -1 if outside.
template <typename Scalar>
int bin_index(Scalar coord, Scalar plane_side, int bins) {
  const Scalar half = plane_side / 2;
  if (coord < -half || coord > half) return -1;
  const auto idx = static_cast<int>(std::floor((coord + half) / (plane_side / static_cast<Scalar>(bins))));
  return std::min(idx, bins - 1);
}

/// Z-buffered orthogonal projection: every in-window point in front of the
/// camera lands in one bin, which keeps the smallest depth.
template <typename Scalar>
DepthView<Scalar> project(const BasicPointCloud<Scalar>& cloud, const VirtualCamera<Scalar>& camera,
                          ProjectionMode mode = ProjectionMode::ScaleInvariant) {
  require(!cloud.empty(), ErrorKind::EmptyCloud, "projecting an empty cloud");
  require(camera.plane_side > Scalar(0), ErrorKind::DegenerateGeometry, "projection plane side is zero");
  require(camera.bins > 0, ErrorKind::Argument, "bin count must be positive");
  DepthView<Scalar> view;
  view.camera = camera;
  view.mode = mode;
  view.grid = DepthView<Scalar>::Grid::Zero(camera.bins, camera.bins);

  const Points3<Scalar> local =
      camera.pose.axes.transpose() * (cloud.points.colwise() - camera.pose.origin);
  for (Eigen::Index i = 0; i < local.cols(); ++i) {
    const Scalar depth = local(2, i);
    if (!(depth > Scalar(0))) continue;
    const int col = bin_index(local(0, i), camera.plane_side, camera.bins);
    const int row = bin_index(local(1, i), camera.plane_side, camera.bins);
    if (col < 0 || row < 0) continue;
    Scalar& cell = view.grid(row, col);
    if (cell == Scalar(0) || depth < cell) cell = depth;
  }
  return view;
}

struct RenderOptions {
  ProjectionMode mode = ProjectionMode::ScaleInvariant;
  int bins = defaults::recognition_bins;
  double distance = defaults::camera_distance;
  double fixed_side = defaults::grasp_plane_side;
};

/// Cloud re-expressed in its own reference frame plus one view per camera.
template <typename Scalar>
struct ObjectViews {
  BasicReferenceFrame<Scalar> frame;
  BasicPointCloud<Scalar> local_cloud;
  std::vector<DepthView<Scalar>> views;
};

/// Builds the object frame, moves the cloud into it and renders every view
/// of the setup. Cameras are expressed in the object frame.
template <typename Scalar>
ObjectViews<Scalar> render_views(const BasicPointCloud<Scalar>& cloud, const ViewSetup& setup,
                                 const RenderOptions& options = {}) {
  ObjectViews<Scalar> out;
  out.frame = local_reference_frame(cloud);
  out.local_cloud = transform_to_frame(cloud, out.frame);
  const Scalar side =
      projection_plane_side(options.mode, aabb(out.local_cloud), static_cast<Scalar>(options.fixed_side));
  const auto cams = generate_cameras(setup, BasicReferenceFrame<Scalar>{}, static_cast<Scalar>(options.distance),
                                     side, options.bins);
  out.views.reserve(cams.size());
  for (const auto& cam : cams) out.views.push_back(project(out.local_cloud, cam, options.mode));
  return out;
}

}  // namespace viewgrasp
