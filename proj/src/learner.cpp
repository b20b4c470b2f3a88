#include "viewgrasp/learner.hpp"

#include <cmath>
#include <limits>

#include "viewgrasp/digest.hpp"

namespace viewgrasp {

using json = nlohmann::json;

KnowledgeBase::KnowledgeBase(double smoothing) : smoothing_(smoothing) {
  require(smoothing > 0.0 && std::isfinite(smoothing), ErrorKind::Argument, "smoothing must be positive");
}

void KnowledgeBase::check_dimension(const FeatureVector& instance) {
  if (dim_ == 0) {
    dim_ = instance.dim();
    return;
  }
  require(instance.dim() == dim_, ErrorKind::Argument,
          "feature dimension " + std::to_string(instance.dim()) + " does not match knowledge base dimension " +
              std::to_string(dim_));
}

void KnowledgeBase::absorb(CategoryModel& model, const FeatureVector& instance) {
  model.accumulator += instance.values();
  ++model.count;
  ++total_;
}

void KnowledgeBase::teach(const std::string& label, std::span<const FeatureVector> instances) {
  require(!label.empty(), ErrorKind::Argument, "category label is empty");
  require(!instances.empty(), ErrorKind::Argument, "teach needs at least one instance");
  // Validate everything before mutating so a bad batch leaves the KB intact.
  const Eigen::Index saved_dim = dim_;
  for (const auto& x : instances) {
    try {
      check_dimension(x);
    } catch (...) {
      dim_ = saved_dim;
      throw;
    }
  }
  auto [it, inserted] = categories_.try_emplace(label);
  if (inserted) {
    it->second.label = label;
    it->second.accumulator = Eigen::VectorXd::Zero(dim_);
  }
  for (const auto& x : instances) absorb(it->second, x);
}

void KnowledgeBase::correct(const std::string& label, const FeatureVector& instance) {
  auto it = categories_.find(label);
  require(it != categories_.end(), ErrorKind::UnknownCategory, "unknown category '" + label + "'");
  check_dimension(instance);
  absorb(it->second, instance);
}

const CategoryModel& KnowledgeBase::category(const std::string& label) const {
  auto it = categories_.find(label);
  require(it != categories_.end(), ErrorKind::UnknownCategory, "unknown category '" + label + "'");
  return it->second;
}

double KnowledgeBase::likelihood(const std::string& label, Eigen::Index i) const {
  const auto& model = category(label);
  require(i >= 0 && i < dim_, ErrorKind::Argument, "feature index out of range");
  return (model.accumulator(i) + smoothing_) /
         (static_cast<double>(model.count) + smoothing_ * static_cast<double>(dim_));
}

double KnowledgeBase::prior(const std::string& label) const {
  return static_cast<double>(category(label).count) / static_cast<double>(total_);
}

Prediction KnowledgeBase::classify(const FeatureVector& x) const {
  require(!categories_.empty(), ErrorKind::NoKnowledge, "no categories have been taught");
  require(x.dim() == dim_, ErrorKind::Argument, "query dimension does not match knowledge base");
  Prediction out;
  double best = -std::numeric_limits<double>::infinity();
  const double n_total = static_cast<double>(total_);
  for (const auto& [label, model] : categories_) {
    const double n = static_cast<double>(model.count);
    const double denom = std::log(n + smoothing_ * static_cast<double>(dim_));
    const double log_like = x.values().dot(((model.accumulator.array() + smoothing_).log() - denom).matrix());
    const double score = std::log(n / n_total) + log_like;
    out.log_scores.emplace(label, score);
    if (out.label.empty() || score > best) {
      best = score;
      out.label = label;
    }
  }
  return out;
}

bool KnowledgeBase::operator==(const KnowledgeBase& other) const {
  if (smoothing_ != other.smoothing_ || dim_ != other.dim_ || total_ != other.total_ ||
      categories_.size() != other.categories_.size())
    return false;
  auto a = categories_.begin();
  auto b = other.categories_.begin();
  for (; a != categories_.end(); ++a, ++b) {
    if (a->first != b->first || a->second.count != b->second.count ||
        a->second.accumulator != b->second.accumulator)
      return false;
  }
  return true;
}

json KnowledgeBase::to_json() const {
  json cats = json::array();
  for (const auto& [label, model] : categories_) {
    cats.push_back({{"label", label},
                    {"n", model.count},
                    {"a", std::vector<double>(model.accumulator.data(),
                                              model.accumulator.data() + model.accumulator.size())}});
  }
  return {{"version", kSchemaVersion}, {"d", dim_}, {"lambda", smoothing_}, {"N", total_}, {"categories", cats}};
}

KnowledgeBase KnowledgeBase::from_json(const json& doc) {
  try {
    require(doc.is_object(), ErrorKind::Format, "knowledge base document is not an object");
    const int version = doc.at("version").get<int>();
    require(version == kSchemaVersion, ErrorKind::Format,
            "unsupported knowledge base version " + std::to_string(version));
    KnowledgeBase kb(doc.at("lambda").get<double>());
    kb.dim_ = doc.at("d").get<Eigen::Index>();
    require(kb.dim_ >= 0, ErrorKind::Format, "negative dimension");
    long long total = 0;
    for (const auto& c : doc.at("categories")) {
      CategoryModel model;
      model.label = c.at("label").get<std::string>();
      model.count = c.at("n").get<long long>();
      const auto a = c.at("a").get<std::vector<double>>();
      require(static_cast<Eigen::Index>(a.size()) == kb.dim_, ErrorKind::Format,
              "accumulator of '" + model.label + "' has the wrong length");
      require(model.count >= 1, ErrorKind::Format, "category '" + model.label + "' has no instances");
      model.accumulator = Eigen::Map<const Eigen::VectorXd>(a.data(), kb.dim_);
      total += model.count;
      const std::string label = model.label;
      require(kb.categories_.emplace(label, std::move(model)).second, ErrorKind::Format,
              "duplicate category '" + label + "'");
    }
    kb.total_ = doc.at("N").get<long long>();
    require(kb.total_ == total, ErrorKind::Format, "N does not equal the sum of category counts");
    return kb;
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("malformed knowledge base: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Format) throw;
    fail(ErrorKind::Format, std::string("malformed knowledge base: ") + e.what());
  }
}

std::string save_kb(const KnowledgeBase& kb) { return kb.to_json().dump(2) + "\n"; }

KnowledgeBase load_kb(const std::string& document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& e) {
    fail(ErrorKind::Format, std::string("knowledge base is not valid JSON: ") + e.what());
  }
  return KnowledgeBase::from_json(doc);
}

std::string kb_digest(const KnowledgeBase& kb) { return sha256_hex(kb.to_json().dump()); }

}  // namespace viewgrasp
