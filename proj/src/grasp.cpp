#include "viewgrasp/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "viewgrasp/depth_view_io.hpp"

namespace viewgrasp {

namespace {

constexpr double kSurfaceTolerance = 1e-9;

double wrap_rotation(double angle) {
  double r = std::fmod(angle, M_PI);
  if (r < 0) r += M_PI;
  if (r >= M_PI) r = 0.0;
  return r;
}

bool in_bounds(const DepthView<double>& view, const Eigen::Vector2i& px) {
  return px.x() >= 0 && px.y() >= 0 && px.x() < view.bins() && px.y() < view.bins();
}

// Axis-aligned box in the gripper frame.
struct Box {
  Eigen::Vector3d lo;
  Eigen::Vector3d hi;

  bool strictly_contains(const Eigen::Vector3d& p) const {
    return (p.array() > lo.array()).all() && (p.array() < hi.array()).all();
  }
};

std::array<Box, 3> gripper_boxes(const GraspPose& pose, const GripperGeometry& grip) {
  const double half = pose.width / 2;
  const double t = grip.finger_thickness;
  const double d = grip.finger_depth;
  return {{
      {{half, -t / 2, -kSurfaceTolerance}, {half + t, t / 2, d}},
      {{-half - t, -t / 2, -kSurfaceTolerance}, {-half, t / 2, d}},
      {{-half - t, -t / 2, -t}, {half + t, t / 2, -kSurfaceTolerance}},  // palm
  }};
}

}  // namespace

void GripperGeometry::validate() const {
  require(max_width > 0 && finger_thickness > 0 && finger_depth > 0, ErrorKind::Argument,
          "gripper dimensions must be positive");
}

void AnnealSchedule::validate() const {
  require(t0 > 0, ErrorKind::Argument, "initial temperature must be positive");
  require(cooling > 0 && cooling < 1, ErrorKind::Argument, "cooling factor must lie in (0, 1)");
  require(iters >= 0, ErrorKind::Argument, "iteration count must be non-negative");
  require(sigma_rotation >= 0 && sigma_width >= 0, ErrorKind::Argument, "proposal widths must be non-negative");
}

std::array<Eigen::Vector2d, 4> GraspRect::corners() const {
  const Eigen::Rotation2Dd rot(angle_rad);
  const Eigen::Vector2d hx = rot * Eigen::Vector2d(width / 2, 0);
  const Eigen::Vector2d hy = rot * Eigen::Vector2d(0, height / 2);
  return {center - hx - hy, center + hx - hy, center + hx + hy, center - hx + hy};
}

GraspPose GraspPose::transformed(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation) const {
  GraspPose out = *this;
  out.position = rotation * position + translation;
  out.axes = rotation * axes;
  return out;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finalizer over a golden-ratio stride.
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

GraspCandidate best_grasp(const GraspMap& map) {
  const auto& q = map.quality;
  require(q.size() > 0, ErrorKind::EmptyMap, "grasp map is empty");
  bool found = false;
  double best = 0.0;
  Eigen::Index best_r = 0, best_c = 0;
  for (Eigen::Index r = 0; r < q.rows(); ++r)
    for (Eigen::Index c = 0; c < q.cols(); ++c) {
      const double v = q(r, c);
      if (!std::isfinite(v)) continue;
      if (!found || v > best) {
        found = true;
        best = v;
        best_r = r;
        best_c = c;
      }
    }
  require(found, ErrorKind::EmptyMap, "grasp map has no finite quality");
  GraspCandidate g;
  g.center_px = {static_cast<int>(best_c), static_cast<int>(best_r)};
  g.quality = best;
  g.rotation_rad = map.rotation(best_r, best_c);
  g.width_m = map.width(best_r, best_c);
  return g;
}

double grasp_depth(const DepthView<double>& view, const Eigen::Vector2i& center_px, double delta) {
  require(in_bounds(view, center_px), ErrorKind::Argument, "grasp centre outside the view");
  require(delta >= 0, ErrorKind::Argument, "delta must be non-negative");
  const double bin = view.camera.bin_size();
  const int reach = static_cast<int>(std::floor(delta / bin));
  double best = std::numeric_limits<double>::infinity();
  for (int dv = -reach; dv <= reach; ++dv)
    for (int du = -reach; du <= reach; ++du) {
      const Eigen::Vector2i px = center_px + Eigen::Vector2i(du, dv);
      if (!in_bounds(view, px)) continue;
      if (std::hypot(du, dv) * bin > delta) continue;
      const double depth = view.grid(px.y(), px.x());
      if (depth > 0 && depth < best) best = depth;
    }
  require(std::isfinite(best), ErrorKind::EmptyNeighborhood, "no occupied bin within delta of the grasp centre");
  return best;
}

Eigen::Vector2d to_pixel(const DepthView<double>& view, const Eigen::Vector3d& point) {
  const auto& cam = view.camera;
  const Eigen::Vector3d local = cam.pose.to_local(point);
  const double half = cam.plane_side / 2;
  return {(local.x() + half) / cam.bin_size(), (local.y() + half) / cam.bin_size()};
}

GraspPose back_project(const GraspCandidate& candidate, const DepthView<double>& view, double delta) {
  const double depth = grasp_depth(view, candidate.center_px, delta);
  const auto& cam = view.camera;
  const double bin = cam.bin_size();
  const double half = cam.plane_side / 2;
  const Eigen::Vector3d local((candidate.center_px.x() + 0.5) * bin - half,
                              (candidate.center_px.y() + 0.5) * bin - half, depth);
  GraspPose pose;
  pose.position = cam.pose.to_parent(local);
  const Eigen::Vector3d approach = cam.pose.z();
  const Eigen::Vector3d closing =
      std::cos(candidate.rotation_rad) * cam.pose.x() + std::sin(candidate.rotation_rad) * cam.pose.y();
  pose.axes.col(0) = closing;
  pose.axes.col(1) = approach.cross(closing);
  pose.axes.col(2) = approach;
  pose.width = candidate.width_m;
  return pose;
}

FitnessTerms fitness_terms(const PointCloud& cloud, const GraspPose& pose, const GripperGeometry& grip,
                           const DepthView<double>& view, const FitnessWeights& weights) {
  require(cloud.has_normals(), ErrorKind::Argument, "fitness needs a cloud with normals");
  require(!cloud.empty(), ErrorKind::EmptyCloud, "fitness of an empty cloud");
  const Eigen::Matrix3Xd local = pose.axes.transpose() * (cloud.points.colwise() - pose.position);
  const double half = pose.width / 2;
  const double half_t = grip.finger_thickness / 2;
  const Eigen::Vector3d closing = pose.closing_axis();

  FitnessTerms terms;
  double alignment = 0.0;
  for (Eigen::Index i = 0; i < local.cols(); ++i) {
    const auto p = local.col(i);
    if (std::abs(p.x()) <= half && std::abs(p.y()) <= half_t && p.z() >= -kSurfaceTolerance &&
        p.z() <= grip.finger_depth) {
      ++terms.captured;
      alignment += std::abs(cloud.normals->col(i).dot(closing));
    }
  }
  terms.coverage = static_cast<double>(terms.captured) / static_cast<double>(cloud.size());
  terms.stability = terms.captured > 0 ? alignment / static_cast<double>(terms.captured) : 0.0;

  const double k = view.bins();
  const Eigen::Vector2d px = to_pixel(view, pose.position);
  const double dist = (px - Eigen::Vector2d(k / 2, k / 2)).norm();
  terms.centering = std::clamp(1.0 - dist / (k / std::sqrt(2.0)), 0.0, 1.0);

  terms.total = weights.coverage * terms.coverage + weights.stability * terms.stability +
                weights.centering * terms.centering;
  return terms;
}

double fitness(const PointCloud& cloud, const GraspPose& pose, const GripperGeometry& grip,
               const DepthView<double>& view, const FitnessWeights& weights) {
  return fitness_terms(cloud, pose, grip, view, weights).total;
}

std::vector<GraspCandidate> sample_candidates(const DepthView<double>& view, int count, std::uint64_t seed,
                                              const GripperGeometry& grip) {
  require(count > 0, ErrorKind::Argument, "candidate count must be positive");
  grip.validate();
  std::vector<Eigen::Vector2i> occupied;
  for (int r = 0; r < view.bins(); ++r)
    for (int c = 0; c < view.bins(); ++c)
      if (view.grid(r, c) > 0) occupied.emplace_back(c, r);
  require(!occupied.empty(), ErrorKind::EmptyView, "view has no occupied bins");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, occupied.size() - 1);
  std::uniform_real_distribution<double> angle(0.0, M_PI);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<GraspCandidate> out(static_cast<std::size_t>(count));
  for (auto& g : out) {
    g.center_px = occupied[pick(rng)];
    g.rotation_rad = angle(rng);
    g.width_m = grip.max_width * (1.0 - unit(rng));  // (0, max_width]
    g.quality = 0.0;
  }
  return out;
}

GraspCandidate anneal(const GraspCandidate& candidate, const PointCloud& cloud, const GripperGeometry& grip,
                      const DepthView<double>& view, const AnnealSchedule& schedule,
                      const FitnessWeights& weights) {
  schedule.validate();
  grip.validate();
  require(in_bounds(view, candidate.center_px), ErrorKind::Argument, "candidate centre outside the view");

  // The centre is fixed, so the base pose is computed once and only the
  // closing axis and opening change.
  const GraspPose base = back_project(candidate, view);
  const auto& cam = view.camera.pose;
  auto score = [&](double rotation, double width) {
    GraspPose pose = base;
    const Eigen::Vector3d closing = std::cos(rotation) * cam.x() + std::sin(rotation) * cam.y();
    pose.axes.col(0) = closing;
    pose.axes.col(1) = pose.axes.col(2).cross(closing);
    pose.width = width;
    return fitness(cloud, pose, grip, view, weights);
  };

  double rot = wrap_rotation(candidate.rotation_rad);
  double width = std::clamp(candidate.width_m, 0.0, grip.max_width);
  double current = score(rot, width);
  GraspCandidate best = candidate;
  best.rotation_rad = rot;
  best.width_m = width;
  best.quality = current;

  std::mt19937_64 rng(schedule.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double temperature = schedule.t0;
  for (int step = 0; step < schedule.iters; ++step) {
    const double next_rot = wrap_rotation(rot + schedule.sigma_rotation * gauss(rng));
    const double next_width = std::clamp(width + schedule.sigma_width * gauss(rng), 0.0, grip.max_width);
    const double proposed = score(next_rot, next_width);
    const double delta = proposed - current;
    if (delta >= 0 || unit(rng) < std::exp(delta / temperature)) {
      rot = next_rot;
      width = next_width;
      current = proposed;
      if (current > best.quality) {
        best.rotation_rad = rot;
        best.width_m = width;
        best.quality = current;
      }
    }
    temperature *= schedule.cooling;
  }
  return best;
}

GraspSynthesis synthesize_grasps(const PointCloud& cloud, const DepthView<double>& view,
                                 const GripperGeometry& grip, int budget, std::uint64_t seed,
                                 const AnnealSchedule& schedule, const FitnessWeights& weights) {
  require(budget > 0, ErrorKind::Argument, "grasp budget must be positive");
  const int k = view.bins();
  GraspSynthesis out;
  out.map.quality = Eigen::MatrixXd::Zero(k, k);
  out.map.rotation = Eigen::MatrixXd::Zero(k, k);
  out.map.width = Eigen::MatrixXd::Zero(k, k);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> written =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(k, k, false);

  const auto samples = sample_candidates(view, budget, seed, grip);
  out.candidates.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    AnnealSchedule local = schedule;
    local.seed = derive_seed(seed, i);
    GraspCandidate g = anneal(samples[i], cloud, grip, view, local, weights);
    const int r = g.center_px.y();
    const int c = g.center_px.x();
    if (!written(r, c) || g.quality > out.map.quality(r, c)) {
      written(r, c) = true;
      out.map.quality(r, c) = g.quality;
      out.map.rotation(r, c) = g.rotation_rad;
      out.map.width(r, c) = g.width_m;
    }
    out.candidates.push_back(g);
  }
  return out;
}

GraspMap synthesize_grasp_map(const PointCloud& cloud, const DepthView<double>& view, const GripperGeometry& grip,
                              int budget, std::uint64_t seed, const AnnealSchedule& schedule,
                              const FitnessWeights& weights) {
  return synthesize_grasps(cloud, view, grip, budget, seed, schedule, weights).map;
}

bool collision_free(const GraspPose& pose, const PointCloud& cloud, const GripperGeometry& grip,
                    const std::optional<TablePlane>& table) {
  const auto boxes = gripper_boxes(pose, grip);
  const Eigen::Matrix3Xd local = pose.axes.transpose() * (cloud.points.colwise() - pose.position);
  for (Eigen::Index i = 0; i < local.cols(); ++i) {
    const Eigen::Vector3d p = local.col(i);
    for (const auto& box : boxes)
      if (box.strictly_contains(p)) return false;
  }
  if (table) {
    for (const auto& box : boxes)
      for (int corner = 0; corner < 8; ++corner) {
        const Eigen::Vector3d c((corner & 1) ? box.hi.x() : box.lo.x(), (corner & 2) ? box.hi.y() : box.lo.y(),
                                (corner & 4) ? box.hi.z() : box.lo.z());
        const Eigen::Vector3d world = pose.position + pose.axes * c;
        if (table->normal.dot(world) < table->offset) return false;
      }
  }
  return true;
}

bool collision_free(const GraspPose& pose, const PointCloud& cloud, const GripperGeometry& grip,
                    double table_height) {
  return collision_free(pose, cloud, grip, TablePlane{Eigen::Vector3d::UnitZ(), table_height});
}

GraspRect to_rect(const GraspCandidate& candidate, const DepthView<double>& view, const GripperGeometry& grip) {
  const double bin = view.camera.bin_size();
  GraspRect rect;
  rect.center = candidate.center_px.cast<double>() + Eigen::Vector2d(0.5, 0.5);
  rect.angle_rad = candidate.rotation_rad;
  rect.width = candidate.width_m / bin;
  rect.height = grip.finger_thickness / bin;
  return rect;
}

namespace {

using Polygon = std::vector<Eigen::Vector2d>;

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

double polygon_area(const Polygon& poly) {
  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) twice += cross2(poly[i], poly[(i + 1) % poly.size()]);
  return std::abs(twice) / 2;
}

// Sutherland-Hodgman clip of a convex subject against a counter-clockwise
// convex clip polygon.
Polygon clip(Polygon subject, const Polygon& clipper) {
  for (std::size_t e = 0; e < clipper.size() && !subject.empty(); ++e) {
    const Eigen::Vector2d a = clipper[e];
    const Eigen::Vector2d b = clipper[(e + 1) % clipper.size()];
    auto side = [&](const Eigen::Vector2d& p) { return cross2(b - a, p - a); };
    Polygon out;
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Eigen::Vector2d p = subject[i];
      const Eigen::Vector2d q = subject[(i + 1) % subject.size()];
      const double sp = side(p);
      const double sq = side(q);
      if (sp >= 0) out.push_back(p);
      if ((sp >= 0) != (sq >= 0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace

double rect_iou(const GraspRect& a, const GraspRect& b) {
  require(a.width > 0 && a.height > 0 && b.width > 0 && b.height > 0, ErrorKind::Argument,
          "rectangles must have positive size");
  const auto ca = a.corners();
  const auto cb = b.corners();
  // corners() walks counter-clockwise for positive width and height.
  const Polygon pa(ca.begin(), ca.end());
  const Polygon pb(cb.begin(), cb.end());
  const double inter = polygon_area(clip(pa, pb));
  const double uni = a.width * a.height + b.width * b.height - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double angle_difference(double a_rad, double b_rad) {
  double d = std::fmod(std::abs(a_rad - b_rad), M_PI);
  return std::min(d, M_PI - d);
}

bool grasp_match(double iou, double angle_diff_rad) { return iou > 0.25 && angle_diff_rad < M_PI / 6; }

bool iou_valid(const GraspRect& predicted, const GraspRect& ground_truth) {
  return grasp_match(rect_iou(predicted, ground_truth), angle_difference(predicted.angle_rad, ground_truth.angle_rad));
}

void write_gmap(std::ostream& out, const GraspMap& map) {
  const int k = map.bins();
  out << "GMAP " << k << '\n';
  for (const Eigen::MatrixXd* block : {&map.quality, &map.rotation, &map.width}) {
    for (int r = 0; r < k; ++r) {
      for (int c = 0; c < k; ++c) {
        if (c) out << ' ';
        out << format_g9((*block)(r, c));
      }
      out << '\n';
    }
  }
}

GraspMap read_gmap(std::istream& in) {
  std::string magic;
  int k = 0;
  in >> magic >> k;
  require(in && magic == "GMAP" && k > 0, ErrorKind::Format, "GMAP: malformed header");
  GraspMap map;
  for (Eigen::MatrixXd* block : {&map.quality, &map.rotation, &map.width}) {
    block->resize(k, k);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c)
        require(static_cast<bool>(in >> (*block)(r, c)), ErrorKind::Format, "GMAP: truncated block");
  }
  return map;
}

void write_grasp_csv(std::ostream& out, std::span<const GraspCandidate> grasps) {
  out << "u,v,rotation_rad,width_m,quality\n";
  for (const auto& g : grasps) {
    out << g.center_px.x() << ',' << g.center_px.y() << ',' << format_g9(g.rotation_rad) << ','
        << format_g9(g.width_m) << ',' << format_g9(g.quality) << '\n';
  }
}

std::vector<GraspCandidate> read_grasp_csv(std::istream& in) {
  std::vector<GraspCandidate> out;
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line.rfind("u,v,", 0) == 0, ErrorKind::Format,
          "grasp CSV: missing header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    GraspCandidate g;
    require(static_cast<bool>(row >> g.center_px.x() >> g.center_px.y() >> g.rotation_rad >> g.width_m >> g.quality),
            ErrorKind::Format, "grasp CSV: malformed row '" + line + "'");
    out.push_back(g);
  }
  return out;
}

}  // namespace viewgrasp
