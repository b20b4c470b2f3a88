#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "viewgrasp/projection.hpp"
#include "viewgrasp/view_selection.hpp"

namespace viewgrasp {

/// Non-negative vector summing to one; the only input type the learner takes.
class FeatureVector {
 public:
  static constexpr double kSumTolerance = 1e-9;

  /// Validates an existing distribution (min >= 0, sum within 1e-9 of 1).
  static FeatureVector from_distribution(Eigen::VectorXd values);
  /// Shifts by the minimum when any entry is negative, then divides by the sum.
  static FeatureVector from_weights(Eigen::VectorXd weights);

  const Eigen::VectorXd& values() const { return values_; }
  Eigen::Index dim() const { return values_.size(); }
  double operator[](Eigen::Index i) const { return values_(i); }

  bool operator==(const FeatureVector& other) const { return values_ == other.values_; }

 private:
  explicit FeatureVector(Eigen::VectorXd values) : values_(std::move(values)) {}
  Eigen::VectorXd values_;
};

enum class Pooling { Max, Avg, Append };

std::string_view to_string(Pooling mode);
Pooling parse_pooling(std::string_view text);

/// Row-major flattening of the normalized view (d = k^2).
template <typename Scalar>
FeatureVector view_to_feature(const DepthView<Scalar>& view) {
  const auto probs = normalize_view(view);
  Eigen::VectorXd flat(probs.size());
  Eigen::Index idx = 0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r)
    for (Eigen::Index c = 0; c < probs.cols(); ++c) flat(idx++) = static_cast<double>(probs(r, c));
  return FeatureVector::from_weights(std::move(flat));
}

/// max: elementwise max then renormalize; avg: elementwise mean;
/// append: concatenation in input order then renormalize.
FeatureVector pool_features(std::span<const FeatureVector> features, Pooling mode);

struct DescriptorOptions {
  ViewSetup setup = ViewSetup::orthographic();
  Pooling pooling = Pooling::Avg;
  int bins = defaults::recognition_bins;
  double distance = defaults::camera_distance;
};

/// Scale-invariant multi-view descriptor of a cloud: object frame, one view
/// per camera, pooled.
template <typename Scalar>
FeatureVector object_descriptor(const BasicPointCloud<Scalar>& cloud, const DescriptorOptions& options = {}) {
  RenderOptions render;
  render.mode = ProjectionMode::ScaleInvariant;
  render.bins = options.bins;
  render.distance = options.distance;
  const auto rendered = render_views(cloud, options.setup, render);
  std::vector<FeatureVector> per_view;
  per_view.reserve(rendered.views.size());
  for (const auto& view : rendered.views) per_view.push_back(view_to_feature(view));
  return pool_features(per_view, options.pooling);
}

using LabeledFeature = std::pair<std::string, FeatureVector>;

/// Embedding CSV "id,v_1,...,v_d": constant d, optional header row whose
/// second field is not numeric. Rows are shift-normalized.
std::map<std::string, FeatureVector> read_embeddings(std::istream& in);
std::map<std::string, FeatureVector> load_embeddings(const std::filesystem::path& path);

/// Descriptor dump: header "id,d,values" then rows "id,d,v_1,...,v_d" at 17
/// significant digits.
void write_descriptors(std::ostream& out, std::span<const LabeledFeature> rows);

/// Reads either a descriptor dump or an embedding CSV, in file order.
std::vector<LabeledFeature> read_feature_rows(std::istream& in);
std::vector<LabeledFeature> load_feature_rows(const std::filesystem::path& path);

}  // namespace viewgrasp
