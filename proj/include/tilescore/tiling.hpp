// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tilescore/detection.hpp"
#include "tilescore/error.hpp"
#include "tilescore/geometry.hpp"

namespace tilescore {

// Coordinate equality tolerance for edge incidence, in pixels.
inline constexpr double kEdgeTolerance = 1e-9;

struct ImageDims {
  double width = 0.0;
  double height = 0.0;

  void validate() const {
    if (!(width > 0.0) || !(height > 0.0) || !std::isfinite(width) || !std::isfinite(height)) {
      throw ConfigError("image dimensions must be positive");
    }
  }

  friend bool operator==(const ImageDims&, const ImageDims&) = default;
};

/// One way of cutting the image: a regular grid of `tile_size` cells whose
/// first interior boundary sits at (offset_x, offset_y). A nonzero offset
/// produces a narrower leading strip [0, offset).
struct TilingScheme {
  double tile_size = 500.0;
  double offset_x = 0.0;
  double offset_y = 0.0;
  int id = 0;

  void validate() const {
    if (!(tile_size > 0.0) || !std::isfinite(tile_size)) throw ConfigError("tile size must be positive");
    if (!(offset_x >= 0.0 && offset_x < tile_size) || !(offset_y >= 0.0 && offset_y < tile_size)) {
      throw ConfigError("tile offsets must lie in [0, tile_size)");
    }
  }

  friend bool operator==(const TilingScheme&, const TilingScheme&) = default;
};

struct Tile {
  int scheme_id = 0;
  int row = 0;
  int col = 0;
  BBox rect;  // image frame, clipped to the image bounds
};

namespace detail {

// Cut positions along one axis: 0, interior boundaries, extent.
inline std::vector<double> axis_cuts(double extent, double tile_size, double offset) {
  std::vector<double> cuts{0.0};
  const double first = offset > 0.0 ? offset : tile_size;
  for (std::size_t k = 0;; ++k) {
    const double cut = first + static_cast<double>(k) * tile_size;
    if (cut >= extent) break;
    cuts.push_back(cut);
  }
  cuts.push_back(extent);
  return cuts;
}

}  // namespace detail

/// Grid view of one scheme over one image. Tiles are half-open cells
/// [cut_i, cut_{i+1}) so every image point belongs to exactly one tile.
class TileGrid {
 public:
  TileGrid(const ImageDims& dims, const TilingScheme& scheme) : dims_(dims), scheme_(scheme) {
    dims.validate();
    scheme.validate();
    xs_ = detail::axis_cuts(dims.width, scheme.tile_size, scheme.offset_x);
    ys_ = detail::axis_cuts(dims.height, scheme.tile_size, scheme.offset_y);
  }

  int rows() const noexcept { return static_cast<int>(ys_.size()) - 1; }
  int cols() const noexcept { return static_cast<int>(xs_.size()) - 1; }
  const ImageDims& dims() const noexcept { return dims_; }
  const TilingScheme& scheme() const noexcept { return scheme_; }

  Tile tile(int row, int col) const {
    if (row < 0 || row >= rows() || col < 0 || col >= cols()) {
      throw GeometryError("tile index (" + std::to_string(row) + "," + std::to_string(col) +
                          ") outside scheme " + std::to_string(scheme_.id));
    }
    return Tile{scheme_.id, row, col, BBox(xs_[col], ys_[row], xs_[col + 1], ys_[row + 1])};
  }

  // Row-major.
  std::vector<Tile> tiles() const {
    std::vector<Tile> out;
    out.reserve(static_cast<std::size_t>(rows()) * static_cast<std::size_t>(cols()));
    for (int r = 0; r < rows(); ++r) {
      for (int c = 0; c < cols(); ++c) out.push_back(tile(r, c));
    }
    return out;
  }

  // Tile holding the point under half-open semantics; points on the far
  // image border map to the last row/column.
  TileIndex locate(double x, double y) const noexcept {
    return TileIndex{locate_axis(ys_, y), locate_axis(xs_, x)};
  }

 private:
  static int locate_axis(const std::vector<double>& cuts, double v) noexcept {
    const auto it = std::upper_bound(cuts.begin() + 1, cuts.end() - 1, v);
    return static_cast<int>(it - cuts.begin()) - 1;
  }

  ImageDims dims_;
  TilingScheme scheme_;
  std::vector<double> xs_;
  std::vector<double> ys_;
};

inline std::vector<Tile> enumerate_tiles(const ImageDims& dims, const TilingScheme& scheme) {
  return TileGrid(dims, scheme).tiles();
}

namespace detail {

inline bool within_extent(const BBox& box, double width, double height) noexcept {
  return box.x_max() <= width + kEdgeTolerance && box.y_max() <= height + kEdgeTolerance;
}

}  // namespace detail

/// Tile-frame box -> image-frame box. Throws if the box leaves the tile.
inline BBox to_image_frame(const BBox& box, const Tile& tile) {
  if (!detail::within_extent(box, tile.rect.width(), tile.rect.height())) {
    throw GeometryError("box outside tile extents");
  }
  return box.translated(tile.rect.x_min(), tile.rect.y_min());
}

/// Image-frame box -> tile-frame box. Throws if the box leaves the tile.
inline BBox to_tile_frame(const BBox& box, const Tile& tile) {
  const auto& r = tile.rect;
  if (box.x_min() < r.x_min() - kEdgeTolerance || box.y_min() < r.y_min() - kEdgeTolerance ||
      box.x_max() > r.x_max() + kEdgeTolerance || box.y_max() > r.y_max() + kEdgeTolerance) {
    throw GeometryError("box outside tile extents");
  }
  const double x0 = std::max(0.0, box.x_min() - r.x_min());
  const double y0 = std::max(0.0, box.y_min() - r.y_min());
  return BBox(x0, y0, box.x_max() - r.x_min(), box.y_max() - r.y_min());
}

/// True when the box touches or crosses a tile boundary that is not also a
/// border of the native image. Image borders are exempt: no other tiling can
/// hold a border object more completely.
inline bool is_edge_incident(const BBox& box, const Tile& tile, const ImageDims& dims) noexcept {
  const auto& r = tile.rect;
  const bool left_inner = r.x_min() > kEdgeTolerance;
  const bool top_inner = r.y_min() > kEdgeTolerance;
  const bool right_inner = r.x_max() < dims.width - kEdgeTolerance;
  const bool bottom_inner = r.y_max() < dims.height - kEdgeTolerance;
  return (left_inner && box.x_min() <= r.x_min() + kEdgeTolerance) ||
         (top_inner && box.y_min() <= r.y_min() + kEdgeTolerance) ||
         (right_inner && box.x_max() >= r.x_max() - kEdgeTolerance) ||
         (bottom_inner && box.y_max() >= r.y_max() - kEdgeTolerance);
}

/// For each tile, the indices of objects whose box overlaps it with positive
/// area. Result is parallel to `tiles`.
template <typename Range>
std::vector<std::vector<std::size_t>> assign_to_tiles(const Range& objects, const std::vector<Tile>& tiles) {
  std::vector<std::vector<std::size_t>> out(tiles.size());
  std::size_t k = 0;
  for (const auto& o : objects) {
    for (std::size_t t = 0; t < tiles.size(); ++t) {
      if (intersection_area(o.box, tiles[t].rect) > 0.0) out[t].push_back(k);
    }
    ++k;
  }
  return out;
}

/// The four offsets used for full-image reporting: (0,0), (0,250), (250,0), (250,250)
/// at 500 px, with ids 0..3 in that order.
inline std::vector<TilingScheme> default_schemes(double tile_size = 500.0) {
  const double h = tile_size / 2.0;
  return {{tile_size, 0.0, 0.0, 0}, {tile_size, 0.0, h, 1}, {tile_size, h, 0.0, 2}, {tile_size, h, h, 3}};
}

namespace detail {

inline double parse_number(std::string_view s, const char* what) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end || !std::isfinite(v)) {
    throw ConfigError(std::string("invalid ") + what + " '" + std::string(s) + "'");
  }
  return v;
}

inline std::pair<double, double> parse_pair(std::string_view s, const char* what) {
  const auto x = s.find('x');
  if (x == std::string_view::npos) {
    throw ConfigError(std::string("invalid ") + what + " '" + std::string(s) + "', expected AxB");
  }
  return {parse_number(s.substr(0, x), what), parse_number(s.substr(x + 1), what)};
}

}  // namespace detail

// "6000x4000" -> width 6000, height 4000.
inline ImageDims parse_image_dims(std::string_view text) {
  const auto [w, h] = detail::parse_pair(text, "image size");
  ImageDims d{w, h};
  d.validate();
  return d;
}

// "0x0,0x250,250x0,250x250" -> schemes with ids assigned in list order.
inline std::vector<TilingScheme> parse_schemes(std::string_view offsets, double tile_size) {
  std::vector<TilingScheme> out;
  std::size_t start = 0;
  while (start <= offsets.size()) {
    const auto comma = offsets.find(',', start);
    const auto item = offsets.substr(start, comma == std::string_view::npos ? offsets.npos : comma - start);
    const auto [ox, oy] = detail::parse_pair(item, "offset");
    TilingScheme s{tile_size, ox, oy, static_cast<int>(out.size())};
    s.validate();
    out.push_back(s);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace tilescore
