#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "viewgrasp/projection.hpp"

namespace viewgrasp {

/// Depth weighting uses the pixel values; Occupancy treats every occupied
/// bin as 1.
enum class EntropyMode { Depth, Occupancy };

struct ViewScore {
  int view_index = 0;
  double entropy_bits = 0.0;
};

template <typename Scalar>
typename DepthView<Scalar>::Grid normalize_view(const DepthView<Scalar>& view,
                                                EntropyMode mode = EntropyMode::Depth) {
  using Grid = typename DepthView<Scalar>::Grid;
  Grid weights = mode == EntropyMode::Occupancy
                     ? Grid((view.grid.array() > Scalar(0)).template cast<Scalar>())
                     : view.grid;
  const Scalar total = weights.sum();
  require(total > Scalar(0), ErrorKind::EmptyView, "view has no occupied bins");
  return weights / total;
}

/// Shannon entropy in bits with 0 log 0 = 0.
template <typename Derived>
double entropy_bits(const Eigen::DenseBase<Derived>& probabilities) {
  double h = 0.0;
  for (Eigen::Index j = 0; j < probabilities.cols(); ++j)
    for (Eigen::Index i = 0; i < probabilities.rows(); ++i) {
      const double p = static_cast<double>(probabilities(i, j));
      if (p > 0.0) h -= p * std::log2(p);
    }
  return h;
}

template <typename Scalar>
double view_entropy(const DepthView<Scalar>& view, EntropyMode mode = EntropyMode::Depth) {
  return entropy_bits(normalize_view(view, mode));
}

/// Views sorted by descending entropy; equal entropies keep index order.
template <typename Scalar>
std::vector<ViewScore> rank_views(const std::vector<DepthView<Scalar>>& views,
                                  EntropyMode mode = EntropyMode::Depth) {
  require(!views.empty(), ErrorKind::Argument, "no views to rank");
  std::vector<ViewScore> scores;
  scores.reserve(views.size());
  for (std::size_t i = 0; i < views.size(); ++i)
    scores.push_back({static_cast<int>(i), view_entropy(views[i], mode)});
  std::stable_sort(scores.begin(), scores.end(),
                   [](const ViewScore& a, const ViewScore& b) { return a.entropy_bits > b.entropy_bits; });
  return scores;
}

}  // namespace viewgrasp
