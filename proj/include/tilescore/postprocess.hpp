// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tilescore/detection.hpp"
#include "tilescore/error.hpp"
#include "tilescore/geometry.hpp"

namespace tilescore {

enum class NmsMode {
  class_agnostic,  // one suppression pass over all labels
  per_class,       // boxes only suppress boxes of the same label
};

struct PostprocessConfig {
  double confidence_threshold = 0.7;
  double nms_threshold = 0.25;
  NmsMode nms_mode = NmsMode::class_agnostic;

  void validate() const {
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
      throw ConfigError("confidence threshold must lie in [0,1]");
    }
    if (!(nms_threshold >= 0.0 && nms_threshold <= 1.0)) {
      throw ConfigError("NMS threshold must lie in [0,1]");
    }
  }
};

// Keeps detections with confidence >= threshold, in input order.
template <typename Det>
std::vector<Det> filter_confidence(std::span<const Det> dets, double threshold) {
  std::vector<Det> out;
  out.reserve(dets.size());
  for (const auto& d : dets) {
    if (d.confidence >= threshold) out.push_back(d);
  }
  return out;
}

template <typename Det>
std::vector<Det> filter_confidence(const std::vector<Det>& dets, double threshold) {
  return filter_confidence(std::span<const Det>(dets), threshold);
}

/// Greedy hard NMS; returns indices of kept detections, highest confidence
/// first. Equal confidences keep input order. A candidate is dropped when
/// its Jaccard with an already-kept box is strictly above `threshold`.
template <typename Det>
std::vector<std::size_t> nms_indices(std::span<const Det> dets, double threshold,
                                     NmsMode mode = NmsMode::class_agnostic) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

  std::vector<std::size_t> kept;
  for (const std::size_t cand : order) {
    const auto& box = dets[cand].box;
    bool suppressed = false;
    for (const std::size_t k : kept) {
      if (mode == NmsMode::per_class && dets[k].label != dets[cand].label) continue;
      if (jaccard(dets[k].box, box) > threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(cand);
  }
  return kept;
}

template <typename Det>
std::vector<Det> nms(std::span<const Det> dets, double threshold, NmsMode mode = NmsMode::class_agnostic) {
  std::vector<Det> out;
  for (const std::size_t k : nms_indices(dets, threshold, mode)) out.push_back(dets[k]);
  return out;
}

template <typename Det>
std::vector<Det> nms(const std::vector<Det>& dets, double threshold, NmsMode mode = NmsMode::class_agnostic) {
  return nms(std::span<const Det>(dets), threshold, mode);
}

// Confidence filter followed by NMS.
template <typename Det>
std::vector<Det> postprocess(const std::vector<Det>& dets, const PostprocessConfig& cfg) {
  return nms(filter_confidence(dets, cfg.confidence_threshold), cfg.nms_threshold, cfg.nms_mode);
}

}  // namespace tilescore
