#include "viewgrasp/representation.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace viewgrasp {

FeatureVector FeatureVector::from_distribution(Eigen::VectorXd values) {
  require(values.size() > 0, ErrorKind::EmptyFeature, "feature vector has no components");
  require(values.allFinite(), ErrorKind::Argument, "feature vector has non-finite components");
  require(values.minCoeff() >= 0.0, ErrorKind::Argument, "feature vector has negative components");
  require(std::abs(values.sum() - 1.0) <= kSumTolerance, ErrorKind::Argument,
          "feature vector does not sum to 1");
  return FeatureVector(std::move(values));
}

FeatureVector FeatureVector::from_weights(Eigen::VectorXd weights) {
  require(weights.size() > 0, ErrorKind::EmptyFeature, "feature vector has no components");
  require(weights.allFinite(), ErrorKind::Argument, "feature vector has non-finite components");
  const double lo = weights.minCoeff();
  if (lo < 0.0) weights.array() -= lo;
  const double total = weights.sum();
  require(total > 0.0, ErrorKind::EmptyFeature, "feature vector has zero mass");
  return FeatureVector(weights / total);
}

std::string_view to_string(Pooling mode) {
  switch (mode) {
    case Pooling::Max: return "max";
    case Pooling::Avg: return "avg";
    case Pooling::Append: return "append";
  }
  return "?";
}

Pooling parse_pooling(std::string_view text) {
  if (text == "max") return Pooling::Max;
  if (text == "avg") return Pooling::Avg;
  if (text == "append" || text == "appending") return Pooling::Append;
  fail(ErrorKind::Argument, "unknown pooling mode '" + std::string(text) + "'");
}

FeatureVector pool_features(std::span<const FeatureVector> features, Pooling mode) {
  require(!features.empty(), ErrorKind::Argument, "pooling needs at least one feature");
  const Eigen::Index d = features.front().dim();
  for (const auto& f : features)
    require(f.dim() == d, ErrorKind::Argument, "pooled features differ in dimension");

  switch (mode) {
    case Pooling::Max: {
      Eigen::VectorXd acc = features.front().values();
      for (const auto& f : features.subspan(1)) acc = acc.cwiseMax(f.values());
      return FeatureVector::from_weights(std::move(acc));
    }
    case Pooling::Avg: {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(d);
      for (const auto& f : features) acc += f.values();
      return FeatureVector::from_weights(acc / static_cast<double>(features.size()));
    }
    case Pooling::Append: {
      Eigen::VectorXd acc(d * static_cast<Eigen::Index>(features.size()));
      for (std::size_t i = 0; i < features.size(); ++i)
        acc.segment(static_cast<Eigen::Index>(i) * d, d) = features[i].values();
      return FeatureVector::from_weights(std::move(acc));
    }
  }
  fail(ErrorKind::Argument, "unknown pooling mode");
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool try_number(std::string_view token, double& value) {
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  return ec == std::errc{} && ptr == end && std::isfinite(value);
}

double number_at(std::string_view token, std::size_t row) {
  double v = 0.0;
  if (!try_number(token, v)) {
    fail(ErrorKind::Parse, "row " + std::to_string(row) + ": invalid number '" + std::string(token) + "'");
  }
  return v;
}

std::vector<LabeledFeature> parse_rows(std::istream& in, bool require_unique) {
  std::vector<LabeledFeature> rows;
  std::string line;
  std::size_t row = 0;
  bool descriptor_format = false;
  Eigen::Index dim = -1;
  std::map<std::string, bool> seen;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv(line);
    if (rows.empty() && dim < 0) {
      double probe = 0.0;
      if (fields.size() >= 2 && !try_number(fields[1], probe)) {
        // Header row.
        descriptor_format = fields.size() >= 2 && fields[0] == "id" && fields[1] == "d";
        dim = -2;
        continue;
      }
    }
    std::size_t first_value = 1;
    if (descriptor_format) {
      require(fields.size() >= 3, ErrorKind::Parse, "row " + std::to_string(row) + ": too few fields");
      const double declared = number_at(fields[1], row);
      require(declared == static_cast<double>(fields.size() - 2), ErrorKind::Parse,
              "row " + std::to_string(row) + ": declared dimension does not match values");
      first_value = 2;
    }
    require(fields.size() > first_value, ErrorKind::Parse, "row " + std::to_string(row) + ": no values");
    const auto d = static_cast<Eigen::Index>(fields.size() - first_value);
    if (dim < 0) dim = d;
    require(d == dim, ErrorKind::Parse,
            "row " + std::to_string(row) + ": ragged row with " + std::to_string(d) + " values, expected " +
                std::to_string(dim));
    Eigen::VectorXd values(d);
    for (Eigen::Index i = 0; i < d; ++i) values(i) = number_at(fields[first_value + static_cast<std::size_t>(i)], row);
    std::string id(fields[0]);
    require(!id.empty(), ErrorKind::Parse, "row " + std::to_string(row) + ": empty id");
    if (require_unique) {
      require(!seen[id], ErrorKind::Parse, "row " + std::to_string(row) + ": duplicate id '" + id + "'");
      seen[id] = true;
    }
    try {
      rows.emplace_back(std::move(id), FeatureVector::from_weights(std::move(values)));
    } catch (const Error& e) {
      throw Error(e.kind(), "row " + std::to_string(row) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace

std::map<std::string, FeatureVector> read_embeddings(std::istream& in) {
  std::map<std::string, FeatureVector> out;
  for (auto& [id, f] : parse_rows(in, true)) out.emplace(std::move(id), std::move(f));
  return out;
}

std::map<std::string, FeatureVector> load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  try {
    return read_embeddings(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void write_descriptors(std::ostream& out, std::span<const LabeledFeature> rows) {
  out << "id,d,values\n";
  char buf[40];
  for (const auto& [id, f] : rows) {
    out << id << ',' << f.dim();
    for (Eigen::Index i = 0; i < f.dim(); ++i) {
      const int len = std::snprintf(buf, sizeof buf, ",%.17g", f[i]);
      out.write(buf, len);
    }
    out << '\n';
  }
}

std::vector<LabeledFeature> read_feature_rows(std::istream& in) { return parse_rows(in, false); }

std::vector<LabeledFeature> load_feature_rows(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::Io, "cannot open " + path.string());
  try {
    return read_feature_rows(in);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace viewgrasp
