#pragma once

// Seeded synthetic data shared by unit, acceptance and CLI tests.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "viewgrasp/geometry.hpp"
#include "viewgrasp/protocol.hpp"

namespace fixtures {

using namespace viewgrasp;

/// Well separated Gaussian clusters on the simplex: category c puts most of
/// its mass on a private block of dimensions.
inline DatasetHandle gaussian_clusters(int categories, int per_category, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.01);
  const int block = std::max(1, d / categories);
  DatasetHandle data;
  for (int c = 0; c < categories; ++c) {
    const std::string label = "cat" + std::to_string(c);
    auto& items = data.categories[label];
    for (int i = 0; i < per_category; ++i) {
      Eigen::VectorXd w = Eigen::VectorXd::Constant(d, 0.02);
      for (int j = 0; j < block; ++j) w((c * block + j) % d) += 1.0;
      for (int j = 0; j < d; ++j) w(j) = std::max(0.0, w(j) + noise(rng));
      items.push_back({label + "/" + std::to_string(i), FeatureVector::from_weights(w)});
    }
  }
  return data;
}

/// Every instance of every category carries the same uniform feature.
inline DatasetHandle constant_features(int categories, int per_category, int d) {
  DatasetHandle data;
  const auto f = FeatureVector::from_weights(Eigen::VectorXd::Ones(d));
  for (int c = 0; c < categories; ++c) {
    const std::string label = "cat" + std::to_string(c);
    auto& items = data.categories[label];
    for (int i = 0; i < per_category; ++i) items.push_back({label + "/" + std::to_string(i), f});
  }
  return data;
}

struct PrimitiveCategory {
  std::string label;
  Primitive shape;
  PrimitiveParams params;
};

/// Five household-scale shapes built from three primitives.
inline std::vector<PrimitiveCategory> primitive_categories() {
  return {
      {"ball", Primitive::Sphere, {0.05, 0, 0}},
      {"brick", Primitive::Box, {0.15, 0.10, 0.05}},
      {"can", Primitive::Cylinder, {0.035, 0.12, 0}},
      {"plate", Primitive::Box, {0.20, 0.20, 0.015}},
      {"rod", Primitive::Cylinder, {0.012, 0.25, 0}},
  };
}

/// Randomly posed, size-jittered, noisy surface sample of a category.
inline PointCloud primitive_instance(const PrimitiveCategory& cat, int points, std::uint64_t seed,
                                     double jitter = 0.1, double noise_rel = 0.01) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> scale(1.0 - jitter, 1.0 + jitter);
  PrimitiveParams p = cat.params;
  p.a *= scale(rng);
  p.b *= scale(rng);
  p.c *= scale(rng);
  PointCloud cloud = sample_primitive(cat.shape, p, points, rng());
  const double size = std::max({p.a, p.b, p.c});
  std::normal_distribution<double> gauss(0.0, noise_rel * size);
  for (Eigen::Index i = 0; i < cloud.size(); ++i)
    for (int k = 0; k < 3; ++k) cloud.points(k, i) += gauss(rng);
  std::uniform_real_distribution<double> shift(-0.5, 0.5);
  const Eigen::Matrix3d R = random_rotation<double>(rng);
  const Eigen::Vector3d t(shift(rng), shift(rng), shift(rng));
  return rigid_transform(cloud, R, t);
}

}  // namespace fixtures
