#include "viewgrasp/pipeline.hpp"

#include <algorithm>
#include <numeric>

namespace viewgrasp {

GraspPlan plan_grasp(const PointCloud& input, const GraspPlanOptions& options) {
  options.grip.validate();
  options.schedule.validate();
  require(options.budget > 0, ErrorKind::Argument, "grasp budget must be positive");
  const PointCloud cloud = input.has_normals() ? input : estimate_normals(input, options.normal_neighbors);

  GraspPlan plan;
  RenderOptions render;
  render.mode = ProjectionMode::FixedSize;
  render.bins = options.bins;
  render.distance = options.distance;
  render.fixed_side = options.plane_side;
  plan.rendered = render_views(cloud, options.setup, render);
  plan.ranking = rank_views(plan.rendered.views, options.entropy);
  plan.selected_view = plan.ranking.front().view_index;

  const auto& view = plan.view();
  plan.synthesis = synthesize_grasps(plan.rendered.local_cloud, view, options.grip, options.budget, options.seed,
                                     options.schedule, options.weights);

  const auto& cands = plan.synthesis.candidates;
  std::vector<std::size_t> order(cands.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const int k = view.bins();
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (cands[a].quality != cands[b].quality) return cands[a].quality > cands[b].quality;
    const auto pa = cands[a].center_px.y() * k + cands[a].center_px.x();
    const auto pb = cands[b].center_px.y() * k + cands[b].center_px.x();
    return pa < pb;
  });

  std::optional<TablePlane> table;
  if (options.table_height) table = TablePlane{Eigen::Vector3d::UnitZ(), *options.table_height};
  const auto& frame = plan.rendered.frame;
  for (std::size_t idx : order) {
    const GraspPose local = back_project(cands[idx], view, options.delta);
    const GraspPose world = local.transformed(frame.axes, frame.origin);
    if (!collision_free(world, cloud, options.grip, table)) {
      ++plan.rejected;
      continue;
    }
    plan.best = cands[idx];
    plan.pose_object = local;
    plan.pose_world = world;
    break;
  }
  return plan;
}

Recognition recognize(const PointCloud& cloud, const KnowledgeBase& kb, const DescriptorOptions& options) {
  Recognition out{object_descriptor(cloud, options), {}};
  out.prediction = kb.classify(out.descriptor);
  return out;
}

}  // namespace viewgrasp
