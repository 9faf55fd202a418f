// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "tilescore/error.hpp"
#include "tilescore/geometry.hpp"

namespace tilescore {

/// Dense I x J matrix of pairwise Jaccard indices, row-major.
class JaccardMatrix {
 public:
  JaccardMatrix() = default;
  JaccardMatrix(std::span<const BBox> rows, std::span<const BBox> cols)
      : rows_(rows.size()), cols_(cols.size()), values_(rows.size() * cols.size()) {
    for (std::size_t i = 0; i < rows_; ++i) {
      for (std::size_t j = 0; j < cols_; ++j) values_[i * cols_ + j] = jaccard(rows[i], cols[j]);
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

inline JaccardMatrix jaccard_matrix(std::span<const BBox> annotations, std::span<const BBox> detections) {
  return JaccardMatrix(annotations, detections);
}

struct MatchPair {
  std::size_t annotation = 0;  // index into the annotation list
  std::size_t detection = 0;   // index into the detection list
  double jaccard = 0.0;

  friend bool operator==(const MatchPair&, const MatchPair&) = default;
};

/// One-to-one assignment between annotations and detections.
/// `pairs` are the TP set in selection order (non-increasing Jaccard);
/// the unmatched lists (FN, FP) are in ascending index order.
struct MatchResult {
  std::vector<MatchPair> pairs;
  std::vector<std::size_t> unmatched_annotations;
  std::vector<std::size_t> unmatched_detections;

  friend bool operator==(const MatchResult&, const MatchResult&) = default;
};

inline constexpr double kDefaultMatchThreshold = 0.25;

namespace detail {
// Widens the sweep window past rounding in x_max - x_min.
inline constexpr double kEdgeSlack = 1e-6;
}  // namespace detail

/// Greedy matching in descending Jaccard order: repeatedly take the largest
/// remaining entry, record the pair if strictly above `threshold` and retire
/// its row and column. Equal entries resolve by lowest annotation index, then
/// lowest detection index.
///
/// Only entries above the threshold can ever be selected, so the matrix is
/// never materialized: candidates come from an x-sorted sweep over
/// overlapping pairs and are sorted once.
inline MatchResult greedy_match(std::span<const BBox> annotations, std::span<const BBox> detections,
                                double threshold = kDefaultMatchThreshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("match threshold must lie in [0,1]");

  std::vector<std::size_t> by_x(detections.size());
  std::iota(by_x.begin(), by_x.end(), std::size_t{0});
  std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].x_min() < detections[b].x_min() ||
           (detections[a].x_min() == detections[b].x_min() && a < b);
  });
  double max_width = 0.0;
  for (const auto& d : detections) max_width = std::max(max_width, d.width());

  std::vector<MatchPair> candidates;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const BBox& a = annotations[i];
    // Overlap requires d.x_min in (a.x_min - max_width, a.x_max).
    const double reach = a.x_min() - max_width - detail::kEdgeSlack;
    auto it = std::lower_bound(by_x.begin(), by_x.end(), reach,
                               [&](std::size_t k, double v) { return detections[k].x_min() < v; });
    for (; it != by_x.end() && detections[*it].x_min() < a.x_max(); ++it) {
      const double j = jaccard(a, detections[*it]);
      if (j > threshold) candidates.push_back({i, *it, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const MatchPair& l, const MatchPair& r) {
    if (l.jaccard != r.jaccard) return l.jaccard > r.jaccard;
    if (l.annotation != r.annotation) return l.annotation < r.annotation;
    return l.detection < r.detection;
  });

  std::vector<bool> a_used(annotations.size(), false);
  std::vector<bool> d_used(detections.size(), false);
  MatchResult result;
  for (const auto& c : candidates) {
    if (a_used[c.annotation] || d_used[c.detection]) continue;
    a_used[c.annotation] = true;
    d_used[c.detection] = true;
    result.pairs.push_back(c);
  }
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    if (!a_used[i]) result.unmatched_annotations.push_back(i);
  }
  for (std::size_t j = 0; j < detections.size(); ++j) {
    if (!d_used[j]) result.unmatched_detections.push_back(j);
  }
  return result;
}

inline MatchResult greedy_match(const std::vector<BBox>& annotations, const std::vector<BBox>& detections,
                                double threshold = kDefaultMatchThreshold) {
  return greedy_match(std::span<const BBox>(annotations), std::span<const BBox>(detections), threshold);
}

}  // namespace tilescore
