#include <algorithm>
#include <random>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "test_util.hpp"
#include "viewgrasp/representation.hpp"

using namespace viewgrasp;
using testutil::kind_of;

namespace {

DepthView<double> view_of(int k, std::vector<double> values) {
  DepthView<double> v;
  v.grid.resize(k, k);
  for (int i = 0; i < k * k; ++i) v.grid(i / k, i % k) = values[static_cast<std::size_t>(i)];
  return v;
}

FeatureVector fv(std::vector<double> w) { return FeatureVector::from_weights(Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()))); }

std::map<std::string, FeatureVector> embeddings(const std::string& text) {
  std::istringstream in(text);
  return read_embeddings(in);
}

void check_distribution(const FeatureVector& f) {
  CHECK(f.values().minCoeff() >= 0.0);
  CHECK(std::abs(f.values().sum() - 1.0) <= 1e-9);
}

FeatureVector random_feature(std::mt19937_64& rng, int d) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd w(d);
  for (int i = 0; i < d; ++i) w(i) = u(rng) < 0.3 ? 0.0 : u(rng);
  w(static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(d))) += 0.1;
  return FeatureVector::from_weights(w);
}

}  // namespace

TEST_CASE("view_to_feature") {
  CHECK(view_to_feature(view_of(2, {1, 1, 1, 1})).values() == Eigen::Vector4d::Constant(0.25));
  CHECK(view_to_feature(view_of(2, {0, 0, 0.3, 0})).values() == Eigen::Vector4d(0, 0, 1, 0));
  CHECK(view_to_feature(view_of(2, {1, 1, 2, 0})).values() == Eigen::Vector4d(0.25, 0.25, 0.5, 0));
  CHECK(kind_of([] { view_to_feature(view_of(2, {0, 0, 0, 0})); }) == ErrorKind::EmptyView);
}

TEST_CASE("feature vector construction") {
  CHECK(fv({-1, 3}).values() == Eigen::Vector2d(0, 1));
  CHECK(fv({2, 2}).values() == Eigen::Vector2d(0.5, 0.5));
  CHECK(kind_of([] { fv({0, 0}); }) == ErrorKind::EmptyFeature);
  CHECK(kind_of([] { fv({-2, -2}); }) == ErrorKind::EmptyFeature);
  CHECK(kind_of([] { fv({}); }) == ErrorKind::EmptyFeature);
  CHECK(kind_of([] { FeatureVector::from_distribution(Eigen::Vector2d(0.5, 0.6)); }) == ErrorKind::Argument);
  CHECK(kind_of([] { FeatureVector::from_distribution(Eigen::Vector2d(-0.5, 1.5)); }) == ErrorKind::Argument);
  CHECK(FeatureVector::from_distribution(Eigen::Vector2d(0.25, 0.75)).values() == Eigen::Vector2d(0.25, 0.75));
}

TEST_CASE("pool_features") {
  const auto a = fv({0.6, 0.4}), b = fv({0.2, 0.8});
  const std::vector single{a};
  CHECK(pool_features(single, Pooling::Max) == a);
  CHECK(pool_features(single, Pooling::Avg) == a);
  CHECK(pool_features(single, Pooling::Append) == a);

  const std::vector ortho{fv({1, 0}), fv({0, 1})};
  CHECK(pool_features(ortho, Pooling::Avg).values() == Eigen::Vector2d(0.5, 0.5));

  const std::vector ab{a, b};
  const auto m = pool_features(ab, Pooling::Max);
  CHECK(m[0] == doctest::Approx(0.6 / 1.4).epsilon(1e-12));
  CHECK(m[0] == doctest::Approx(0.4286).epsilon(1e-4));
  CHECK(m[1] == doctest::Approx(0.5714).epsilon(1e-4));
  const auto app = pool_features(ab, Pooling::Append);
  CHECK(app.dim() == 4);
  CHECK(app.values() == Eigen::Vector4d(0.3, 0.2, 0.1, 0.4));

  CHECK(kind_of([] { pool_features(std::vector<FeatureVector>{}, Pooling::Avg); }) == ErrorKind::Argument);
  CHECK(kind_of([&] { pool_features(std::vector{a, fv({1, 1, 1})}, Pooling::Max); }) == ErrorKind::Argument);
  CHECK(parse_pooling("append") == Pooling::Append);
  CHECK(to_string(Pooling::Max) == "max");
  CHECK(kind_of([] { parse_pooling("sum"); }) == ErrorKind::Argument);
}

TEST_CASE("pooling properties") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 300; ++t) {
    const int d = 1 + static_cast<int>(rng() % 20);
    const int n = 1 + static_cast<int>(rng() % 6);
    std::vector<FeatureVector> fs;
    for (int i = 0; i < n; ++i) fs.push_back(random_feature(rng, d));
    auto shuffled = fs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (auto mode : {Pooling::Max, Pooling::Avg, Pooling::Append}) {
      const auto p = pool_features(fs, mode);
      check_distribution(p);
      CHECK(p.dim() == (mode == Pooling::Append ? d * n : d));
      const auto q = pool_features(shuffled, mode);
      if (mode != Pooling::Append) CHECK((p.values() - q.values()).cwiseAbs().maxCoeff() < 1e-15);
    }
    // Append is order sensitive: swapping two distinct inputs changes the result.
    if (n >= 2 && !(fs[0] == fs[1])) {
      std::vector<FeatureVector> swapped = fs;
      std::swap(swapped[0], swapped[1]);
      CHECK_FALSE(pool_features(fs, Pooling::Append) == pool_features(swapped, Pooling::Append));
    }
  }
}

TEST_CASE("embedding csv") {
  auto e = embeddings("obj1,2,2\n");
  CHECK(e.at("obj1").values() == Eigen::Vector2d(0.5, 0.5));
  e = embeddings("id,v1,v2\nneg,-1,3\npos,1,3\n");
  CHECK(e.at("neg").values() == Eigen::Vector2d(0, 1));
  CHECK(e.at("pos").values() == Eigen::Vector2d(0.25, 0.75));
  CHECK(kind_of([] { embeddings("a,1,2\nb,1,2,3\n"); }) == ErrorKind::Parse);
  try {
    embeddings("a,1,2\nb,1,2,3\n");
  } catch (const Error& err) {
    CHECK(std::string(err.what()).find("row 2") != std::string::npos);
  }
  CHECK(kind_of([] { embeddings("a,0,0\n"); }) == ErrorKind::EmptyFeature);
  CHECK(kind_of([] { embeddings("a,1,x\n"); }) == ErrorKind::Parse);
  CHECK(kind_of([] { embeddings("a,1,2\na,3,4\n"); }) == ErrorKind::Parse);
}

TEST_CASE("descriptor dump round trip") {
  std::mt19937_64 rng(3);
  std::vector<LabeledFeature> rows;
  for (int i = 0; i < 20; ++i) rows.emplace_back("obj" + std::to_string(i), random_feature(rng, 9));
  std::ostringstream out;
  write_descriptors(out, rows);
  std::istringstream in(out.str());
  const auto back = read_feature_rows(in);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].first == rows[i].first);
    CHECK((back[i].second.values() - rows[i].second.values()).cwiseAbs().maxCoeff() < 1e-15);
  }
  std::istringstream ragged("id,d,values\nx,3,0.5,0.5\n");
  CHECK(kind_of([&] { read_feature_rows(ragged); }) == ErrorKind::Parse);
}

TEST_CASE("descriptors are rotation robust") {
  std::mt19937_64 rng(31);
  for (const auto& cat : fixtures::primitive_categories()) {
    const auto cloud = sample_primitive(cat.shape, cat.params, 1500, rng());
    for (int t = 0; t < 4; ++t) {
      const auto rotated =
          rigid_transform<double>(cloud, random_rotation<double>(rng), Eigen::Vector3d(0.3, -0.1, 0.7));
      DescriptorOptions opt;
      opt.bins = 16;
      // Per-view descriptors, sorted, match within 1e-6.
      RenderOptions render;
      render.bins = opt.bins;
      const auto a = render_views(cloud, opt.setup, render);
      const auto b = render_views(rotated, opt.setup, render);
      std::vector<std::vector<double>> fa, fb;
      for (std::size_t i = 0; i < 3; ++i) {
        const auto va = view_to_feature(a.views[i]).values(), vb = view_to_feature(b.views[i]).values();
        fa.emplace_back(va.data(), va.data() + va.size());
        fb.emplace_back(vb.data(), vb.data() + vb.size());
      }
      std::sort(fa.begin(), fa.end());
      std::sort(fb.begin(), fb.end());
      double worst = 0.0;
      for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < fa[i].size(); ++j) worst = std::max(worst, std::abs(fa[i][j] - fb[i][j]));
      CHECK(worst < 1e-6);
      const auto pa = object_descriptor(cloud, opt), pb = object_descriptor(rotated, opt);
      CHECK((pa.values() - pb.values()).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("descriptor of every pooling mode is a distribution") {
  const auto cloud = fixtures::primitive_instance(fixtures::primitive_categories()[4], 800, 6);
  for (auto mode : {Pooling::Max, Pooling::Avg, Pooling::Append}) {
    DescriptorOptions opt;
    opt.pooling = mode;
    opt.setup = ViewSetup::orbit(90, 30);
    const auto f = object_descriptor(cloud, opt);
    check_distribution(f);
    CHECK(f.dim() == (mode == Pooling::Append ? 4 * 32 * 32 : 32 * 32));
  }
}
