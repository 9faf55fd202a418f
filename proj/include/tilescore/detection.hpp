// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tilescore/error.hpp"
#include "tilescore/geometry.hpp"

namespace tilescore {

/// Ordered, duplicate-free list of class names. The order fixes the row and
/// column order of confusion matrices for the whole run.
class ClassSet {
 public:
  explicit ClassSet(std::vector<std::string> names) : names_(std::move(names)) {
    if (names_.empty()) throw ConfigError("class set is empty");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const auto& n = names_[i];
      if (n.empty()) throw ConfigError("empty class name");
      if (n.find_first_of(",\"\r\n") != std::string::npos) {
        throw ConfigError("class name '" + n + "' contains a reserved character");
      }
      for (std::size_t j = 0; j < i; ++j) {
        if (names_[j] == n) throw ConfigError("duplicate class name '" + n + "'");
      }
    }
  }

  // Comma-separated list, e.g. "Kent,Keitt,Bdh".
  static ClassSet parse(std::string_view text) {
    std::vector<std::string> names;
    std::size_t start = 0;
    while (true) {
      const auto comma = text.find(',', start);
      names.emplace_back(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return ClassSet(std::move(names));
  }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i] == name) return i;
    }
    return std::nullopt;
  }

  bool contains(std::string_view name) const { return index_of(name).has_value(); }
  std::size_t size() const noexcept { return names_.size(); }
  const std::string& operator[](std::size_t i) const { return names_[i]; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  friend bool operator==(const ClassSet&, const ClassSet&) = default;

 private:
  std::vector<std::string> names_;
};

// Expert annotation. `id` is the per-image ordinal assigned at load time.
struct Annotation {
  std::string image_id;
  BBox box;
  std::string label;
  std::size_t id = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct TileIndex {
  int row = 0;
  int col = 0;

  friend bool operator==(const TileIndex&, const TileIndex&) = default;
  friend auto operator<=>(const TileIndex&, const TileIndex&) = default;
};

// Detector output. Tile provenance (tiling_id + tile) is either fully present
// or fully absent; detections read from a tiled detector carry it.
struct Detection {
  std::string image_id;
  BBox box;
  std::string label;
  double confidence = 0.0;
  std::optional<int> tiling_id;
  std::optional<TileIndex> tile;

  bool has_provenance() const noexcept { return tiling_id.has_value() && tile.has_value(); }

  friend bool operator==(const Detection&, const Detection&) = default;
};

template <typename Range>
std::vector<BBox> boxes_of(const Range& objects) {
  std::vector<BBox> out;
  out.reserve(std::size(objects));
  for (const auto& o : objects) out.push_back(o.box);
  return out;
}

}  // namespace tilescore
