// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "tilescore/detection.hpp"
#include "tilescore/error.hpp"
#include "tilescore/matching.hpp"
#include "tilescore/tiling.hpp"

namespace tilescore {

struct MergeConfig {
  double merge_threshold = kDefaultMatchThreshold;
  std::vector<TilingScheme> schemes = default_schemes();

  void validate() const {
    if (!(merge_threshold >= 0.0 && merge_threshold <= 1.0)) {
      throw ConfigError("merge threshold must lie in [0,1]");
    }
    if (schemes.empty()) throw ConfigError("at least one tiling scheme is required");
    for (const auto& s : schemes) s.validate();
  }
};

/// Drops every detection that touches or crosses an inner edge of the tile
/// it was detected in. Boxes must already be in image frame and carry tile
/// provenance; `tiles` may hold the tiles of several schemes.
inline std::vector<Detection> filter_integral(std::span<const Detection> dets, std::span<const Tile> tiles,
                                              const ImageDims& dims) {
  std::map<std::tuple<int, int, int>, const Tile*> lookup;
  for (const auto& t : tiles) lookup[{t.scheme_id, t.row, t.col}] = &t;

  std::vector<Detection> out;
  for (const auto& d : dets) {
    if (!d.has_provenance()) throw GeometryError("detection without tile provenance");
    const auto it = lookup.find({*d.tiling_id, d.tile->row, d.tile->col});
    if (it == lookup.end()) {
      throw GeometryError("detection references unknown tile " + std::to_string(*d.tiling_id) + ":" +
                          std::to_string(d.tile->row) + "," + std::to_string(d.tile->col));
    }
    if (intersection_area(d.box, it->second->rect) <= 0.0) {
      throw GeometryError("detection does not overlap its tile");
    }
    if (!is_edge_incident(d.box, *it->second, dims)) out.push_back(d);
  }
  return out;
}

inline std::vector<Detection> filter_integral(const std::vector<Detection>& dets, const std::vector<Tile>& tiles,
                                              const ImageDims& dims) {
  return filter_integral(std::span<const Detection>(dets), std::span<const Tile>(tiles), dims);
}

// Outcome of folding one incoming scheme into the accumulator.
struct MergeStep {
  std::vector<Detection> merged;
  MatchResult match;       // accumulator rows vs incoming columns
  std::size_t replaced = 0;  // matched pairs where the incoming box was larger
};

/// Folds `incoming` into `accumulated`: matched pairs keep the larger box
/// (the accumulator's on an exact tie), unmatched incoming detections are
/// appended in their input order.
inline MergeStep merge_pair(const std::vector<Detection>& accumulated, const std::vector<Detection>& incoming,
                            double threshold) {
  MergeStep step;
  step.match = greedy_match(boxes_of(accumulated), boxes_of(incoming), threshold);
  step.merged = accumulated;
  for (const auto& p : step.match.pairs) {
    const auto& in = incoming[p.detection];
    if (in.box.area() > accumulated[p.annotation].box.area()) {
      step.merged[p.annotation] = in;
      ++step.replaced;
    }
  }
  for (const std::size_t j : step.match.unmatched_detections) step.merged.push_back(incoming[j]);
  return step;
}

/// Fuses per-scheme detection sets of one image. `per_scheme[k]` belongs to
/// `config.schemes[k]`; sets are folded in ascending scheme id. Each set must
/// already be NMS'd, integral-filtered and in image frame.
inline std::vector<Detection> merge_tilings(const std::vector<std::vector<Detection>>& per_scheme,
                                            const MergeConfig& config) {
  config.validate();
  if (per_scheme.size() != config.schemes.size()) {
    throw ConfigError("got " + std::to_string(per_scheme.size()) + " detection sets for " +
                      std::to_string(config.schemes.size()) + " tiling schemes");
  }
  std::vector<std::size_t> order(per_scheme.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return config.schemes[a].id < config.schemes[b].id; });

  std::vector<Detection> acc = per_scheme[order.front()];
  for (std::size_t k = 1; k < order.size(); ++k) {
    acc = merge_pair(acc, per_scheme[order[k]], config.merge_threshold).merged;
  }
  return acc;
}

}  // namespace tilescore
