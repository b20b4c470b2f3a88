#include <algorithm>
#include <numeric>
#include <random>

#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "test_util.hpp"
#include "viewgrasp/view_selection.hpp"

using namespace viewgrasp;
using testutil::kind_of;

namespace {

DepthView<double> view_of(int k, std::vector<double> values) {
  DepthView<double> v;
  v.grid.resize(k, k);
  for (int i = 0; i < k * k; ++i) v.grid(i / k, i % k) = values[static_cast<std::size_t>(i)];
  v.camera.bins = k;
  v.camera.plane_side = 1.0;
  return v;
}

std::vector<double> flat(const DepthView<double>& v) {
  std::vector<double> out;
  for (Eigen::Index r = 0; r < v.grid.rows(); ++r)
    for (Eigen::Index c = 0; c < v.grid.cols(); ++c) out.push_back(v.grid(r, c));
  return out;
}

DepthView<double> random_view(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> depth(0.5, 1.5);
  std::bernoulli_distribution occupied(0.4);
  std::vector<double> values(static_cast<std::size_t>(k * k), 0.0);
  for (auto& x : values)
    if (occupied(rng)) x = depth(rng);
  values[rng() % values.size()] = depth(rng);
  return view_of(k, values);
}

}  // namespace

TEST_CASE("normalize_view") {
  auto p = normalize_view(view_of(2, {0, 0.5, 0, 0}));
  CHECK(p(0, 1) == 1.0);
  CHECK(p.sum() == 1.0);
  p = normalize_view(view_of(3, std::vector<double>(9, 0.7)));
  for (int i = 0; i < 9; ++i) CHECK(p(i / 3, i % 3) == doctest::Approx(1.0 / 9).epsilon(1e-15));
  p = normalize_view(view_of(2, {0.2, 0.2, 0.6, 0}));
  CHECK(p(0, 0) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(p(1, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(p(1, 1) == 0.0);
  const auto occ = normalize_view(view_of(2, {0.2, 0.2, 0.6, 0}), EntropyMode::Occupancy);
  CHECK(occ(1, 0) == doctest::Approx(1.0 / 3));
  CHECK(kind_of([] { normalize_view(view_of(2, {0, 0, 0, 0})); }) == ErrorKind::EmptyView);
}

TEST_CASE("view_entropy") {
  CHECK(view_entropy(view_of(2, {0, 0, 0.4, 0})) == 0.0);
  CHECK(view_entropy(view_of(2, {1, 1, 1, 1})) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(view_entropy(view_of(2, {0.5, 0.25, 0.25, 0})) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(view_entropy(view_of(2, {0.9, 0.1, 0.3, 0}), EntropyMode::Occupancy) ==
        doctest::Approx(std::log2(3.0)));
  CHECK(kind_of([] { view_entropy(view_of(1, {0})); }) == ErrorKind::EmptyView);
}

TEST_CASE("entropy properties against the direct-sum oracle") {
  std::mt19937_64 rng(99);
  for (int t = 0; t < 500; ++t) {
    const int k = 2 + static_cast<int>(rng() % 15);
    const auto v = random_view(rng, k);
    const double h = view_entropy(v);
    CHECK(std::abs(h - oracle::entropy_bits(flat(v))) < 1e-12);
    CHECK(h >= 0.0);
    CHECK(h <= std::log2(static_cast<double>(v.occupied())) + 1e-12);
    CHECK(h <= std::log2(static_cast<double>(k * k)) + 1e-12);

    auto values = flat(v);
    std::shuffle(values.begin(), values.end(), rng);
    CHECK(std::abs(view_entropy(view_of(k, values)) - h) < 1e-12);

    const double c = std::uniform_real_distribution<double>(1e-3, 1e3)(rng);
    auto scaled = v;
    scaled.grid *= c;
    CHECK(std::abs(view_entropy(scaled) - h) < 1e-9);
  }
}

TEST_CASE("rank_views") {
  const auto point = view_of(2, {0, 0, 1, 0});
  const auto uniform = view_of(2, {1, 1, 1, 1});
  auto r = rank_views(std::vector{point, uniform});
  CHECK(r[0].view_index == 1);
  CHECK(r[1].view_index == 0);

  r = rank_views(std::vector{uniform, uniform});
  CHECK(r[0].view_index == 0);
  CHECK(r[1].view_index == 1);

  CHECK(kind_of([] { rank_views(std::vector<DepthView<double>>{}); }) == ErrorKind::Argument);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) {
    std::vector<DepthView<double>> views;
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) views.push_back(rng() % 4 == 0 && i > 0 ? views[rng() % views.size()] : random_view(rng, 6));
    const auto ranked = rank_views(views);
    std::vector<int> idx;
    for (const auto& s : ranked) idx.push_back(s.view_index);
    std::vector<int> sorted = idx;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> expect(static_cast<std::size_t>(n));
    std::iota(expect.begin(), expect.end(), 0);
    CHECK(sorted == expect);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      CHECK(ranked[i - 1].entropy_bits >= ranked[i].entropy_bits);
      if (ranked[i - 1].entropy_bits == ranked[i].entropy_bits) CHECK(ranked[i - 1].view_index < ranked[i].view_index);
    }
  }
}

TEST_CASE("elongated box ranks the largest face first") {
  PointCloud box = sample_primitive(Primitive::Box, {0.3, 0.1, 0.04}, 6000, 4);
  std::mt19937_64 rng(8);
  box = rigid_transform<double>(box, random_rotation<double>(rng), Eigen::Vector3d(0.1, 0.2, 0.3));
  RenderOptions opt;
  opt.mode = ProjectionMode::FixedSize;
  opt.bins = 64;
  const auto r = render_views(box, ViewSetup::orthographic(), opt);
  const auto ranked = rank_views(r.views);
  // Camera 2 looks along the object Z axis, the normal of the 0.3 x 0.1 face.
  CHECK(ranked[0].view_index == 2);
  for (const auto& s : ranked)
    CHECK(std::abs(s.entropy_bits - oracle::entropy_bits(flat(r.views[static_cast<std::size_t>(s.view_index)]))) <
          1e-12);
}
