// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "viewgrasp/grasp.hpp"
#include "viewgrasp/learner.hpp"
#include "viewgrasp/pipeline.hpp"
#include "viewgrasp/protocol.hpp"
#include "viewgrasp/view_selection.hpp"

using namespace viewgrasp;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void check(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
};

int failures = 0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void criterion(int id, const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.ok = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (budget_s > 0 && secs >= budget_s) {
    out.ok = false;
    out.detail += (out.detail.empty() ? "" : "; ") + std::string("over time budget");
  }
  char timing[64];
  if (budget_s > 0) std::snprintf(timing, sizeof timing, "%.3f s / %.0f s", secs, budget_s);
  else std::snprintf(timing, sizeof timing, "%.3f s", secs);
  std::printf("AC%d %s %s (%s)%s%s\n", id, out.ok ? "PASS" : "FAIL", name, timing,
              out.detail.empty() ? "" : " : ", out.detail.c_str());
  std::fflush(stdout);
  if (!out.ok) ++failures;
}

DepthView<double> view_from(const Eigen::MatrixXd& grid) {
  DepthView<double> v;
  v.grid = grid;
  v.camera.bins = static_cast<int>(grid.rows());
  v.camera.plane_side = defaults::grasp_plane_side;
  return v;
}

Outcome entropy_oracle() {
  Outcome o;
  std::mt19937_64 rng(20240501);
  std::uniform_real_distribution<double> depth(0.05, 1.0);
  std::bernoulli_distribution occupied(0.6);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(8, 8);
    std::vector<double> flat;
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) {
        if (occupied(rng)) g(r, c) = depth(rng);
        flat.push_back(g(r, c));
      }
    if (g.sum() == 0) g(0, 0) = flat[0] = 0.5;
    worst = std::max(worst, std::abs(view_entropy(view_from(g)) - oracle::entropy_bits(flat)));
  }
  o.check(worst <= 1e-9, "max deviation " + num(worst));
  Eigen::MatrixXd point = Eigen::MatrixXd::Zero(8, 8);
  point(3, 4) = 0.7;
  o.check(view_entropy(view_from(point)) == 0.0, "point mass is not 0 bits");
  Eigen::MatrixXd four = Eigen::MatrixXd::Zero(8, 8);
  four(0, 0) = four(1, 1) = four(2, 2) = four(3, 3) = 0.25;
  o.check(view_entropy(view_from(four)) == 2.0, "uniform-4 is not 2 bits");
  Eigen::MatrixXd three = Eigen::MatrixXd::Zero(8, 8);
  three(0, 0) = 0.5;
  three(5, 5) = three(7, 1) = 0.25;
  o.check(view_entropy(view_from(three)) == 1.5, "(0.5, 0.25, 0.25) is not 1.5 bits");
  o.detail = o.ok ? "max |dH| = " + num(worst) : o.detail;
  return o;
}

Outcome camera_counts() {
  Outcome o;
  const BasicReferenceFrame<double> frame;
  auto count = [&](const ViewSetup& s) {
    return static_cast<int>(generate_cameras<double>(s, frame, 1.0, 0.45, 4).size());
  };
  o.check(count(ViewSetup::orthographic()) == 3, "orthographic != 3");
  o.check(count(ViewSetup::orbit(18.0, 60.0)) == 20, "orbit alpha 18 != 20");
  o.check(count(ViewSetup::sphere_counts(7, 4)) == 28, "sphere 7x4 != 28");
  std::vector<int> div360, div180;
  for (int a = 1; a <= 360; ++a)
    if (360 % a == 0) div360.push_back(a);
  for (int b = 1; b <= 180; ++b)
    if (180 % b == 0) div180.push_back(b);
  int checked = 0;
  for (int a : div360) {
    const auto orbit = ViewSetup::orbit(a, 60.0);
    o.check(orbit.view_count() == 360 / a && count(orbit) == 360 / a, "orbit alpha " + std::to_string(a));
    for (int b : div180) {
      const auto sphere = ViewSetup::sphere(a, b);
      o.check(sphere.view_count() == (360 / a) * (180 / b) && count(sphere) == sphere.view_count(),
              "sphere " + std::to_string(a) + "/" + std::to_string(b));
      ++checked;
    }
  }
  bool rejected = false;
  try {
    ViewSetup::orbit(7.0, 60.0);
  } catch (const Error& e) {
    rejected = e.kind() == ErrorKind::Argument;
  }
  o.check(rejected, "alpha = 7 accepted");
  if (o.ok) o.detail = std::to_string(div360.size()) + " orbit and " + std::to_string(checked) + " sphere setups";
  return o;
}

Outcome incremental_equals_batch() {
  Outcome o;
  const int d = 12;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<std::string, FeatureVector>> multiset;
  std::vector<std::pair<std::string, std::vector<double>>> plain;
  for (int i = 0; i < 60; ++i) {
    Eigen::VectorXd w(d);
    for (int j = 0; j < d; ++j) w(j) = unit(rng);
    auto f = FeatureVector::from_weights(w);
    const std::string label = "c" + std::to_string(i % 4);
    plain.emplace_back(label, std::vector<double>(f.values().data(), f.values().data() + d));
    multiset.emplace_back(label, std::move(f));
  }
  const auto truth = oracle::recount(plain);
  double worst = 0.0;
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::size_t> order(multiset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    KnowledgeBase kb;
    std::size_t i = 0;
    while (i < order.size()) {
      const auto& [label, f] = multiset[order[i]];
      if (kb.contains(label) && unit(rng) < 0.5) {
        kb.correct(label, f);
        ++i;
        continue;
      }
      // Batch teach of up to three consecutive instances sharing a label.
      std::vector<FeatureVector> batch{f};
      std::size_t j = i + 1;
      while (j < order.size() && batch.size() < 3 && multiset[order[j]].first == label && unit(rng) < 0.5)
        batch.push_back(multiset[order[j++]].second);
      kb.teach(label, batch);
      i = j;
    }
    long long total = 0;
    for (const auto& [label, t] : truth) {
      const auto& m = kb.category(label);
      o.check(m.count == t.count, "count mismatch for " + label);
      total += t.count;
      for (int j = 0; j < d; ++j) {
        worst = std::max(worst, std::abs(m.accumulator(j) - t.sum[static_cast<std::size_t>(j)]));
        const double lik = (t.sum[static_cast<std::size_t>(j)] + 0.01) / (static_cast<double>(t.count) + 0.01 * d);
        worst = std::max(worst, std::abs(kb.likelihood(label, j) - lik));
      }
    }
    o.check(kb.total_instances() == total && kb.category_count() == truth.size(), "N or K mismatch");
  }
  o.check(worst <= 1e-12, "max deviation " + num(worst));
  if (o.ok) o.detail = "max deviation " + num(worst);
  return o;
}

Outcome protocol_structure() {
  Outcome o;
  const ProtocolConfig defaults_cfg;
  o.check(defaults_cfg.tau == 0.75 && defaults_cfg.window_factor == 3 && defaults_cfg.breakpoint_iters == 100,
          "protocol defaults differ from tau 0.75, window 3n, breakpoint 100");

  const auto separable = fixtures::gaussian_clusters(5, 60, 16, 7);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ProtocolConfig c;
    c.seed = seed;
    const auto r = run_experiment(c, separable);
    o.check(r.alc == 5, "separable seed " + std::to_string(seed) + " alc " + std::to_string(r.alc));
    o.check(r.stop_reason == StopReason::LackOfData, "separable seed " + std::to_string(seed) + " not lack_of_data");
  }

  const auto flat = fixtures::constant_features(5, 400, 16);
  int max_alc = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ProtocolConfig c;
    c.seed = seed;
    const auto r = run_experiment(c, flat);
    max_alc = std::max(max_alc, r.alc);
    o.check(r.stop_reason == StopReason::Breakpoint, "constant seed " + std::to_string(seed) + " not breakpoint");
    // Replay the timeline: stop distance and every window accuracy (trailing 3n answers).
    int last_teach = 0, last_ask = 0;
    std::vector<bool> answers;
    std::vector<std::string> known;
    std::size_t check = 0;
    for (const auto& e : r.timeline) {
      if (e.event == EventKind::Teach) {
        last_teach = e.iteration;
        if (std::find(known.begin(), known.end(), e.label) == known.end()) known.push_back(e.label);
        answers.clear();
      }
      if (e.event != EventKind::Ask) continue;
      last_ask = e.iteration;
      answers.push_back(*e.correct);
      if (answers.size() < known.size()) continue;
      const double expect = oracle::window_accuracy(answers, 3 * known.size());
      o.check(check < r.window_accuracies.size() && std::abs(r.window_accuracies[check] - expect) < 1e-12,
              "window accuracy mismatch at check " + std::to_string(check));
      ++check;
    }
    o.check(last_ask - last_teach == 100, "constant seed " + std::to_string(seed) + " stopped " +
                                              std::to_string(last_ask - last_teach) + " asks after the last teach");
    o.check(check == r.window_accuracies.size(), "window check count mismatch");
  }
  if (o.ok) o.detail = "separable alc 5 x10, constant max alc " + std::to_string(max_alc);
  return o;
}

Outcome offline_recognition() {
  Outcome o;
  const auto cats = fixtures::primitive_categories();
  const int per = 40;
  const DescriptorOptions opts;  // orthographic, avg pooling, k = 32
  o.check(opts.setup.kind() == SetupKind::Orthographic && opts.pooling == Pooling::Avg && opts.bins == 32,
          "descriptor defaults");
  std::vector<std::pair<std::string, FeatureVector>> items;
  for (std::size_t c = 0; c < cats.size(); ++c)
    for (int i = 0; i < per; ++i)
      items.emplace_back(cats[c].label,
                         object_descriptor(fixtures::primitive_instance(cats[c], 1500, 1000 * c + i), opts));
  int correct = 0;
  for (int fold = 0; fold < 10; ++fold) {
    KnowledgeBase kb;
    for (std::size_t i = 0; i < items.size(); ++i)
      if (static_cast<int>(i % 10) != fold) kb.teach(items[i].first, items[i].second);
    for (std::size_t i = 0; i < items.size(); ++i)
      if (static_cast<int>(i % 10) == fold) correct += kb.classify(items[i].second).label == items[i].first;
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(items.size());
  o.check(acc >= 0.90, "accuracy " + num(acc));
  if (o.ok) o.detail = "10-fold accuracy " + num(acc);
  return o;
}

Outcome grasp_optimization() {
  Outcome o;
  const PointCloud cylinder = sample_primitive(Primitive::Cylinder, {0.03, 0.12, 0}, 200, 17);
  RenderOptions render;
  render.mode = ProjectionMode::FixedSize;
  render.bins = defaults::grasp_bins;
  const auto rendered = render_views(cylinder, ViewSetup::orthographic(), render);
  const auto ranking = rank_views(rendered.views);
  const auto& view = rendered.views[static_cast<std::size_t>(ranking.front().view_index)];
  const auto& cloud = rendered.local_cloud;
  const GripperGeometry grip;

  double grid_best = 0.0;
  for (int r = 0; r < view.bins(); ++r)
    for (int c = 0; c < view.bins(); ++c) {
      if (view.grid(r, c) <= 0) continue;
      GraspCandidate g;
      g.center_px = {c, r};
      for (int a = 0; a < 36; ++a)
        for (int w = 1; w <= 20; ++w) {
          g.rotation_rad = a * M_PI / 36;
          g.width_m = grip.max_width * w / 20;
          grid_best = std::max(grid_best, fitness(cloud, back_project(g, view), grip, view));
        }
    }

  const auto starts = sample_candidates(view, 50, 5, grip);
  double sa_best = 0.0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    AnnealSchedule s;
    s.seed = derive_seed(5, i);
    sa_best = std::max(sa_best, anneal(starts[i], cloud, grip, view, s).quality);
  }
  o.check(sa_best >= 0.95 * grid_best,
          "SA best " + num(sa_best) + " vs grid " + num(grid_best));

  std::mt19937_64 rng(123);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto x = sample_candidates(view, 1, rng(), grip).front();
    AnnealSchedule s;
    s.seed = rng();
    s.iters = 60;
    const double before = fitness(cloud, back_project(x, view), grip, view);
    const auto y = anneal(x, cloud, grip, view, s);
    const double after = fitness(cloud, back_project(y, view), grip, view);
    violations += after < before;
  }
  o.check(violations == 0, std::to_string(violations) + " annealing runs lost fitness");
  if (o.ok)
    o.detail = "SA " + num(sa_best) + " / grid " + num(grid_best) + ", 1000 monotone trials";
  return o;
}

Outcome iou_metric() {
  Outcome o;
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> pos(-3.0, 3.0), ang(0.0, M_PI), size(1.0, 8.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    GraspRect a{{pos(rng), pos(rng)}, ang(rng), size(rng), size(rng)};
    GraspRect b{{pos(rng), pos(rng)}, ang(rng), size(rng), size(rng)};
    const double mc = oracle::monte_carlo_iou({a.center.x(), a.center.y(), a.angle_rad, a.width, a.height},
                                              {b.center.x(), b.center.y(), b.angle_rad, b.width, b.height},
                                              100000, static_cast<std::uint64_t>(t));
    worst = std::max(worst, std::abs(rect_iou(a, b) - mc));
  }
  o.check(worst <= 0.01, "max |IoU - MC| = " + num(worst));
  const double deg = M_PI / 180;
  o.check(!grasp_match(0.25, 0.0), "IoU 0.25 accepted");
  o.check(grasp_match(0.2501, 29.9 * deg), "IoU 0.2501 at 29.9 deg rejected");
  o.check(!grasp_match(0.9, 30.0 * deg), "30 deg accepted");
  o.check(std::abs(angle_difference(0.0, 179.0 * deg) - 1.0 * deg) < 1e-12, "antipodal fold");
  GraspRect r{{0, 0}, 0.0, 1.0, 1.0};
  GraspRect s{{0.5, 0}, 0.0, 1.0, 1.0};
  o.check(std::abs(rect_iou(r, s) - 1.0 / 3.0) < 1e-12 && iou_valid(r, s), "offset squares");
  if (o.ok) o.detail = "max |IoU - MC| = " + num(worst);
  return o;
}

Outcome pipeline_latency() {
  Outcome o;
  const auto cats = fixtures::primitive_categories();
  KnowledgeBase kb;
  for (std::size_t c = 0; c < cats.size(); ++c)
    for (int i = 0; i < 3; ++i)
      kb.teach(cats[c].label, object_descriptor(fixtures::primitive_instance(cats[c], 800, 50 + 10 * c + i)));
  const PointCloud cloud = fixtures::primitive_instance(cats[1], 20000, 4242);

  auto once = [&] {
    RenderOptions render;  // scale-invariant, k = 32
    const auto rendered = render_views(cloud, ViewSetup::orthographic(), render);
    const auto ranking = rank_views(rendered.views);
    std::vector<FeatureVector> per_view;
    for (const auto& v : rendered.views) per_view.push_back(view_to_feature(v));
    const auto pred = kb.classify(pool_features(per_view, Pooling::Avg));
    return std::make_pair(ranking.size(), pred.label);
  };
  once();  // warm caches
  std::vector<double> ms;
  std::string label;
  for (int i = 0; i < 7; ++i) {
    const auto t = Clock::now();
    const auto [n, l] = once();
    ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t).count());
    label = l;
    o.check(n == 3, "ranking size");
  }
  std::sort(ms.begin(), ms.end());
  const double median = ms[ms.size() / 2];
  o.check(median < 50.0, "median " + num(median) + " ms");
  if (o.ok) o.detail = "median " + num(median) + " ms, predicted " + label;
  return o;
}

Outcome grasp_constants() {
  Outcome o;
  o.check(defaults::grasp_delta == 0.025, "delta default");
  o.check(defaults::grasp_plane_side == 0.45, "l_g default");
  const GraspPlanOptions plan;
  o.check(plan.delta == 0.025 && plan.plane_side == 0.45, "plan option defaults");
  o.check(projection_plane_side(ProjectionMode::FixedSize, BasicAabb<double>{{0, 0, 0}, {2, 3, 4}}) == 0.45,
          "fixed-size plane side");
  // l_g / k = 0.45 / 64: 3 bins (0.0211 m) are inside delta, 4 bins (0.0281 m) are not.
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(64, 64);
  g(32, 32) = 0.30;
  g(32, 33) = 0.28;
  g(33, 32) = 0.31;
  g(32, 35) = 0.27;
  g(32, 36) = 0.10;
  const auto view = view_from(g);
  o.check(grasp_depth(view, {32, 32}) == 0.27, "neighbourhood minimum within delta");
  g(32, 35) = 0;
  o.check(grasp_depth(view_from(g), {32, 32}) == 0.28, "{0.30, 0.28, 0.31} -> 0.28");
  if (o.ok) o.detail = "delta 0.025 m, l_g 0.45 m";
  return o;
}

}  // namespace

int main() {
  criterion(1, "entropy oracle", 1, entropy_oracle);
  criterion(2, "camera-count formulas", 1, camera_counts);
  criterion(3, "incremental equals batch", 10, incremental_equals_batch);
  criterion(4, "protocol structure", 30, protocol_structure);
  criterion(5, "offline recognition stand-in", 120, offline_recognition);
  criterion(6, "grasp optimization", 60, grasp_optimization);
  criterion(7, "IoU metric", 30, iou_metric);
  criterion(8, "pipeline latency", 0, pipeline_latency);
  criterion(9, "grasp-point constants", 0, grasp_constants);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
