#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "viewgrasp/projection.hpp"

namespace viewgrasp {

namespace defaults {
/// Delta: radius of the neighbourhood whose minimum depth sets the grasp depth.
inline constexpr double grasp_delta = 0.025;
}  // namespace defaults

/// Two-finger parallel gripper. The default stroke matches a 140 mm gripper.
struct GripperGeometry {
  double max_width = 0.140;
  double finger_thickness = 0.02;
  double finger_depth = 0.04;

  void validate() const;
};

struct FitnessWeights {
  double coverage = 1.0 / 3.0;
  double stability = 1.0 / 3.0;
  double centering = 1.0 / 3.0;
};

/// <(u, v), phi, w, q>: u is the column and v the row of the grasp view.
/// rotation_rad = 0 closes along the view's u axis, counter-clockwise positive.
struct GraspCandidate {
  Eigen::Vector2i center_px = Eigen::Vector2i::Zero();
  double rotation_rad = 0.0;
  double width_m = 0.0;
  double quality = 0.0;
};

/// Per-pixel quality Q, rotation Phi and width W images, indexed (row, col).
struct GraspMap {
  Eigen::MatrixXd quality;
  Eigen::MatrixXd rotation;
  Eigen::MatrixXd width;

  int bins() const { return static_cast<int>(quality.rows()); }
};

struct GraspRect {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double angle_rad = 0.0;
  double width = 0.0;   // along the closing direction
  double height = 0.0;  // finger thickness

  std::array<Eigen::Vector2d, 4> corners() const;
};

/// Gripper pose. axes columns: closing direction, finger-plane normal,
/// approach direction (pointing into the object). position is the grasp
/// point on the object surface.
struct GraspPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  double width = 0.0;

  Eigen::Vector3d closing_axis() const { return axes.col(0); }
  Eigen::Vector3d approach_axis() const { return axes.col(2); }
  GraspPose transformed(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) const;
};

/// Half-space n . p >= offset is free space; points below it are the table.
struct TablePlane {
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
  double offset = 0.0;
};

struct AnnealSchedule {
  double t0 = 0.1;
  double cooling = 0.95;
  int iters = 300;
  std::uint64_t seed = 0;
  double sigma_rotation = 0.2;
  double sigma_width = 0.01;

  void validate() const;
};

struct FitnessTerms {
  double coverage = 0.0;
  double stability = 0.0;
  double centering = 0.0;
  double total = 0.0;
  Eigen::Index captured = 0;
};

/// argmax of Q over finite entries; ties go to the smallest row-major index.
GraspCandidate best_grasp(const GraspMap& map);

/// Minimum depth over occupied bins whose centre lies within delta (meters)
/// of the centre bin.
double grasp_depth(const DepthView<double>& view, const Eigen::Vector2i& center_px,
                   double delta = defaults::grasp_delta);

/// Continuous pixel coordinates (u, v) of a point; pixel i covers [i, i + 1).
Eigen::Vector2d to_pixel(const DepthView<double>& view, const Eigen::Vector3d& point);

/// Lifts a pixel grasp into the view's 3D frame: plane position of the bin
/// centre at grasp_depth, approach along the camera axis.
GraspPose back_project(const GraspCandidate& candidate, const DepthView<double>& view,
                       double delta = defaults::grasp_delta);

/// coverage: share of cloud points inside the closing volume; stability: mean
/// |cos| between captured normals and the closing axis; centering: linear
/// falloff of the pixel distance to the view centre.
FitnessTerms fitness_terms(const PointCloud& cloud, const GraspPose& pose, const GripperGeometry& grip,
                           const DepthView<double>& view, const FitnessWeights& weights = {});
double fitness(const PointCloud& cloud, const GraspPose& pose, const GripperGeometry& grip,
               const DepthView<double>& view, const FitnessWeights& weights = {});

/// Seeded uniform centres over occupied bins, rotations in [0, pi), widths
/// in (0, max_width].
std::vector<GraspCandidate> sample_candidates(const DepthView<double>& view, int count, std::uint64_t seed,
                                              const GripperGeometry& grip = {});

/// Metropolis search over rotation and width at a fixed centre. Returns the
/// best state visited with quality set to its fitness.
GraspCandidate anneal(const GraspCandidate& candidate, const PointCloud& cloud, const GripperGeometry& grip,
                      const DepthView<double>& view, const AnnealSchedule& schedule,
                      const FitnessWeights& weights = {});

struct GraspSynthesis {
  GraspMap map;
  std::vector<GraspCandidate> candidates;  // annealed, in sampling order
};

/// Anneals `budget` sampled candidates and rasterizes them; each pixel keeps
/// its highest-quality writer (earliest candidate on ties).
GraspSynthesis synthesize_grasps(const PointCloud& cloud, const DepthView<double>& view,
                                 const GripperGeometry& grip, int budget, std::uint64_t seed,
                                 const AnnealSchedule& schedule = {}, const FitnessWeights& weights = {});
GraspMap synthesize_grasp_map(const PointCloud& cloud, const DepthView<double>& view, const GripperGeometry& grip,
                              int budget, std::uint64_t seed, const AnnealSchedule& schedule = {},
                              const FitnessWeights& weights = {});

/// False when a cloud point lies inside a finger or the palm, or when any
/// gripper corner falls below the table.
bool collision_free(const GraspPose& pose, const PointCloud& cloud, const GripperGeometry& grip,
                    const std::optional<TablePlane>& table);
bool collision_free(const GraspPose& pose, const PointCloud& cloud, const GripperGeometry& grip,
                    double table_height);

/// Rectangle of a candidate in pixel units (width = opening, height = finger thickness).
GraspRect to_rect(const GraspCandidate& candidate, const DepthView<double>& view, const GripperGeometry& grip);

double rect_iou(const GraspRect& a, const GraspRect& b);
/// Orientation difference folded into [0, pi/2] (a grasp and its pi-rotation coincide).
double angle_difference(double a_rad, double b_rad);
/// IoU strictly above 25 % and orientation difference strictly below 30 degrees.
bool grasp_match(double iou, double angle_diff_rad);
bool iou_valid(const GraspRect& predicted, const GraspRect& ground_truth);

/// GMAP: header "GMAP <k>" then the Q, Phi and W blocks, k rows each.
void write_gmap(std::ostream& out, const GraspMap& map);
GraspMap read_gmap(std::istream& in);
/// CSV "u,v,rotation_rad,width_m,quality".
void write_grasp_csv(std::ostream& out, std::span<const GraspCandidate> grasps);
std::vector<GraspCandidate> read_grasp_csv(std::istream& in);

/// Stable per-index seed derived from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

}  // namespace viewgrasp
