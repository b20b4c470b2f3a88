#pragma once

#include <Eigen/Dense>

#include <map>
#include <span>
#include <string>

#include "json.hpp"

#include "viewgrasp/representation.hpp"

namespace viewgrasp {

/// Per-category sufficient statistics: instance count n_k and the running sum
/// a_k of every absorbed feature vector.
struct CategoryModel {
  std::string label;
  long long count = 0;
  Eigen::VectorXd accumulator;
};

struct Prediction {
  std::string label;
  std::map<std::string, double> log_scores;
};

/// Incremental naive-Bayes category memory. Instances are folded into the
/// accumulators and not retained. Writers (teach/correct) need external
/// serialization; const members are safe to call concurrently.
class KnowledgeBase {
 public:
  static constexpr int kSchemaVersion = 1;
  static constexpr double kDefaultSmoothing = 0.01;

  explicit KnowledgeBase(double smoothing = kDefaultSmoothing);

  /// Creates the category when absent and absorbs every instance. The first
  /// taught instance fixes the feature dimension.
  void teach(const std::string& label, std::span<const FeatureVector> instances);
  void teach(const std::string& label, const FeatureVector& instance) { teach(label, std::span(&instance, 1)); }
  /// Same arithmetic as a one-instance teach, but only for known labels.
  void correct(const std::string& label, const FeatureVector& instance);

  /// Laplace-smoothed P(x_i | C_k) = (a_ik + lambda) / (n_k + lambda d); i is 0-based.
  double likelihood(const std::string& label, Eigen::Index i) const;
  /// n_k / N.
  double prior(const std::string& label) const;

  /// argmax_k log P(C_k) + sum_i x_i log P(x_i | C_k); ties go to the
  /// lexicographically smallest label.
  Prediction classify(const FeatureVector& x) const;

  bool empty() const { return categories_.empty(); }
  bool contains(const std::string& label) const { return categories_.count(label) != 0; }
  std::size_t category_count() const { return categories_.size(); }
  long long total_instances() const { return total_; }
  Eigen::Index dimension() const { return dim_; }
  double smoothing() const { return smoothing_; }
  const std::map<std::string, CategoryModel>& categories() const { return categories_; }
  const CategoryModel& category(const std::string& label) const;

  nlohmann::json to_json() const;
  static KnowledgeBase from_json(const nlohmann::json& doc);

  bool operator==(const KnowledgeBase& other) const;

 private:
  void absorb(CategoryModel& model, const FeatureVector& instance);
  void check_dimension(const FeatureVector& instance);

  double smoothing_;
  Eigen::Index dim_ = 0;
  long long total_ = 0;
  std::map<std::string, CategoryModel> categories_;
};

/// JSON document {version, d, lambda, N, categories: [{label, n, a}]}.
std::string save_kb(const KnowledgeBase& kb);
KnowledgeBase load_kb(const std::string& document);

/// SHA-256 of the serialized knowledge base, hex encoded.
std::string kb_digest(const KnowledgeBase& kb);

}  // namespace viewgrasp
