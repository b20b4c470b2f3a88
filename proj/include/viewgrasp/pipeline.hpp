#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "viewgrasp/grasp.hpp"
#include "viewgrasp/learner.hpp"
#include "viewgrasp/view_selection.hpp"

namespace viewgrasp {

struct GraspPlanOptions {
  ViewSetup setup = ViewSetup::orthographic();
  int bins = defaults::grasp_bins;
  double plane_side = defaults::grasp_plane_side;
  double distance = defaults::camera_distance;
  double delta = defaults::grasp_delta;
  GripperGeometry grip;
  AnnealSchedule schedule;
  FitnessWeights weights;
  int budget = 64;
  std::uint64_t seed = 1;
  /// World z of the supporting table; no table check when unset.
  std::optional<double> table_height;
  int normal_neighbors = 10;
  EntropyMode entropy = EntropyMode::Depth;
};

struct GraspPlan {
  ObjectViews<double> rendered;
  std::vector<ViewScore> ranking;
  int selected_view = 0;
  GraspSynthesis synthesis;
  /// Highest-quality collision-free candidate, if any.
  std::optional<GraspCandidate> best;
  std::optional<GraspPose> pose_object;
  std::optional<GraspPose> pose_world;
  int rejected = 0;  // candidates ranked above `best` that collided

  const DepthView<double>& view() const { return rendered.views.at(static_cast<std::size_t>(selected_view)); }
};

/// Fixed-size render, max-entropy view, annealed grasp map, then the best
/// candidate that passes the collision test. Candidates are tried in
/// descending quality, ties broken like best_grasp.
GraspPlan plan_grasp(const PointCloud& cloud, const GraspPlanOptions& options = {});

struct Recognition {
  FeatureVector descriptor;
  Prediction prediction;
};

/// Scale-invariant render, pooled descriptor, Bayes classification.
Recognition recognize(const PointCloud& cloud, const KnowledgeBase& kb, const DescriptorOptions& options = {});

}  // namespace viewgrasp
