// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

// Test-only generators and brute-force oracles. Nothing here calls into the
// code paths it is used to check.

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "tilescore/detection.hpp"
#include "tilescore/geometry.hpp"

namespace tilescore::testing {

// Integer-cornered random box inside [0, extent]^2 with sides in [min_side, max_side].
inline BBox random_box(std::mt19937_64& rng, int extent, int min_side = 1, int max_side = 40) {
  std::uniform_int_distribution<int> side(min_side, max_side);
  const int w = side(rng);
  const int h = side(rng);
  std::uniform_int_distribution<int> px(0, extent - w);
  std::uniform_int_distribution<int> py(0, extent - h);
  const int x = px(rng);
  const int y = py(rng);
  return BBox(x, y, x + w, y + h);
}

// Real-valued corners, so Jaccard ties are practically impossible.
inline BBox random_real_box(std::mt19937_64& rng, double extent, double min_side = 2.0, double max_side = 40.0) {
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(rng);
  const double h = side(rng);
  std::uniform_real_distribution<double> px(0.0, extent - w);
  std::uniform_real_distribution<double> py(0.0, extent - h);
  const double x = px(rng);
  const double y = py(rng);
  return BBox(x, y, x + w, y + h);
}

inline Detection det(const BBox& b, double conf, std::string label = "mango", std::string image = "img") {
  return Detection{std::move(image), b, std::move(label), conf, std::nullopt, std::nullopt};
}

inline Annotation ann(const BBox& b, std::string label = "mango", std::string image = "img", std::size_t id = 0) {
  return Annotation{std::move(image), b, std::move(label), id};
}

// Jaccard from first principles: overlap lengths per axis.
inline double oracle_jaccard(const BBox& a, const BBox& b) {
  const double ox = std::max(0.0, std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min()));
  const double oy = std::max(0.0, std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min()));
  const double inter = ox * oy;
  const double uni = (a.x_max() - a.x_min()) * (a.y_max() - a.y_min()) +
                     (b.x_max() - b.x_min()) * (b.y_max() - b.y_min()) - inter;
  return inter / uni;
}

struct TracePair {
  std::size_t a;
  std::size_t p;
  double j;
};

// Greedy matching by repeated full scans of a dense matrix: at each step the
// largest surviving entry (ties: lowest row, then lowest column) is taken if
// strictly above the threshold.
inline std::vector<TracePair> brute_force_greedy(const std::vector<BBox>& as, const std::vector<BBox>& ps,
                                                 double threshold) {
  std::vector<std::vector<double>> m(as.size(), std::vector<double>(ps.size()));
  for (std::size_t i = 0; i < as.size(); ++i) {
    for (std::size_t j = 0; j < ps.size(); ++j) m[i][j] = oracle_jaccard(as[i], ps[j]);
  }
  std::vector<bool> row_alive(as.size(), true), col_alive(ps.size(), true);
  std::vector<TracePair> out;
  while (true) {
    std::optional<TracePair> best;
    for (std::size_t i = 0; i < as.size(); ++i) {
      if (!row_alive[i]) continue;
      for (std::size_t j = 0; j < ps.size(); ++j) {
        if (!col_alive[j]) continue;
        if (!best || m[i][j] > best->j) best = TracePair{i, j, m[i][j]};
      }
    }
    if (!best || !(best->j > threshold)) break;
    out.push_back(*best);
    row_alive[best->a] = false;
    col_alive[best->p] = false;
  }
  return out;
}

// Maximum number of one-to-one pairs above the threshold, by exhaustive
// search. Exponential; for tiny instances only.
inline std::size_t brute_force_max_pairs(const std::vector<BBox>& as, const std::vector<BBox>& ps, double threshold) {
  std::size_t best = 0;
  std::vector<bool> used(ps.size(), false);
  auto rec = [&](auto&& self, std::size_t i, std::size_t count) -> void {
    if (i == as.size()) {
      best = std::max(best, count);
      return;
    }
    self(self, i + 1, count);
    for (std::size_t j = 0; j < ps.size(); ++j) {
      if (!used[j] && oracle_jaccard(as[i], ps[j]) > threshold) {
        used[j] = true;
        self(self, i + 1, count + 1);
        used[j] = false;
      }
    }
  };
  rec(rec, 0, 0);
  return best;
}

}  // namespace tilescore::testing
