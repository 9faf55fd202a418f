// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "tilescore/error.hpp"

namespace tilescore {

/// Axis-aligned box in pixel coordinates, corner-pair convention.
///
/// A BBox always has finite, non-negative coordinates and strictly positive
/// area; the constructor throws GeometryError otherwise, so every BBox in
/// circulation is valid.
class BBox {
 public:
  BBox(double x_min, double y_min, double x_max, double y_max)
      : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
    if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
        !std::isfinite(y_max)) {
      throw GeometryError("non-finite box coordinate");
    }
    if (x_min < 0.0 || y_min < 0.0) {
      throw GeometryError("negative box coordinate");
    }
    if (!(x_min < x_max) || !(y_min < y_max)) {
      throw GeometryError("empty box");
    }
  }

  double x_min() const noexcept { return x_min_; }
  double y_min() const noexcept { return y_min_; }
  double x_max() const noexcept { return x_max_; }
  double y_max() const noexcept { return y_max_; }

  double width() const noexcept { return x_max_ - x_min_; }
  double height() const noexcept { return y_max_ - y_min_; }
  double area() const noexcept { return width() * height(); }

  // Throws GeometryError if the result would leave the positive quadrant.
  BBox translated(double dx, double dy) const {
    return BBox(x_min_ + dx, y_min_ + dy, x_max_ + dx, y_max_ + dy);
  }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x_min_;
  double y_min_;
  double x_max_;
  double y_max_;
};

inline std::ostream& operator<<(std::ostream& os, const BBox& b) {
  return os << '(' << b.x_min() << ',' << b.y_min() << ',' << b.x_max() << ',' << b.y_max() << ')';
}

inline double area(const BBox& b) noexcept { return b.area(); }

// Zero for disjoint and edge-touching boxes.
inline double intersection_area(const BBox& a, const BBox& b) noexcept {
  const double w = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double h = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

inline double union_area(const BBox& a, const BBox& b) noexcept {
  return a.area() + b.area() - intersection_area(a, b);
}

/// Jaccard index (intersection over union) of two boxes, in [0, 1].
inline double jaccard(const BBox& a, const BBox& b) noexcept {
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  return inter / (a.area() + b.area() - inter);
}

}  // namespace tilescore
