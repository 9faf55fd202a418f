// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "tilescore/dataset_io.hpp"
#include "tilescore/detection.hpp"
#include "tilescore/error.hpp"
#include "tilescore/geometry.hpp"
#include "tilescore/matching.hpp"
#include "tilescore/merging.hpp"
#include "tilescore/metrics.hpp"
#include "tilescore/parallel.hpp"
#include "tilescore/postprocess.hpp"
#include "tilescore/random.hpp"
#include "tilescore/tiling.hpp"

namespace tilescore {

// ---------------------------------------------------------------------------
// Dataset evaluation

struct EvalConfig {
  PostprocessConfig post;
  double match_threshold = kDefaultMatchThreshold;
  double alpha = 0.0;
  std::optional<ClassSet> classes;  // enables the confusion table
  unsigned threads = 1;

  void validate() const {
    post.validate();
    if (!(match_threshold >= 0.0 && match_threshold <= 1.0)) throw ConfigError("match threshold must lie in [0,1]");
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
  }

  ReportConfig echo() const { return {post.confidence_threshold, post.nms_threshold, match_threshold}; }
};

// Full-image reporting from tiled detections.
struct TiledConfig {
  ImageDims dims{6000.0, 4000.0};
  MergeConfig merge;
};

struct Evaluation {
  ScoreReport report;
  JaccardTerms terms;
};

// image_id -> indices, ordered by image_id.
template <typename Range>
std::map<std::string, std::vector<std::size_t>> group_by_image(const Range& objects) {
  std::map<std::string, std::vector<std::size_t>> out;
  std::size_t k = 0;
  for (const auto& o : objects) out[o.image_id].push_back(k++);
  return out;
}

template <typename T>
std::vector<T> select(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (const auto i : idx) out.push_back(items[i]);
  return out;
}

/// Matches final (already post-processed) detections against annotations
/// image by image and reduces counts and area terms over the dataset.
/// Ratios are computed once from the summed counts, never averaged.
inline Evaluation score_dataset(const std::vector<Annotation>& annotations, const std::vector<Detection>& detections,
                                const EvalConfig& cfg) {
  cfg.validate();
  const auto ann_groups = group_by_image(annotations);
  const auto det_groups = group_by_image(detections);
  std::vector<std::string> images;
  for (const auto& [id, _] : ann_groups) images.push_back(id);
  for (const auto& [id, _] : det_groups) {
    if (!ann_groups.count(id)) images.push_back(id);
  }
  std::sort(images.begin(), images.end());

  struct Partial {
    Counts counts;
    JaccardTerms terms;
    std::optional<ConfusionTally> tally;
  };
  std::vector<Partial> partial(images.size());
  static const std::vector<std::size_t> kNone;
  parallel_for(images.size(), cfg.threads, [&](std::size_t k) {
    const auto a_it = ann_groups.find(images[k]);
    const auto d_it = det_groups.find(images[k]);
    const auto anns = select(annotations, a_it == ann_groups.end() ? kNone : a_it->second);
    const auto dets = select(detections, d_it == det_groups.end() ? kNone : d_it->second);
    const auto a_boxes = boxes_of(anns);
    const auto d_boxes = boxes_of(dets);
    const MatchResult m = greedy_match(a_boxes, d_boxes, cfg.match_threshold);
    partial[k].counts = counts_of(m);
    partial[k].terms = jaccard_terms(m, a_boxes, d_boxes);
    if (cfg.classes) partial[k].tally = confusion_tally(m, anns, dets, *cfg.classes);
  });

  Counts counts;
  JaccardTerms terms;
  std::optional<ConfusionTally> tally;
  if (cfg.classes) tally.emplace(cfg.classes->size());
  for (const auto& p : partial) {
    counts += p.counts;
    terms += p.terms;
    if (tally) *tally += *p.tally;
  }
  Evaluation ev{make_report(counts, terms, cfg.alpha, cfg.echo()), terms};
  if (tally) {
    ev.report.confusion = ConfusionMatrix::from_counts(*cfg.classes, std::move(tally->counts), std::move(tally->annotated));
  }
  return ev;
}

// Confidence filter + NMS, applied per image. Output keeps image order
// (by id) and, within an image, NMS order.
inline std::vector<Detection> postprocess_by_image(const std::vector<Detection>& detections,
                                                   const PostprocessConfig& post) {
  std::vector<Detection> out;
  for (const auto& [id, idx] : group_by_image(detections)) {
    for (auto& d : postprocess(select(detections, idx), post)) out.push_back(std::move(d));
  }
  return out;
}

/// Tile-frame detections (with provenance) -> merged image-frame detections.
/// Per tile: confidence filter and NMS; then translation to the image frame
/// and the integral filter; then the cross-tiling merge per image.
inline std::vector<Detection> merge_tiled_detections(const std::vector<Detection>& raw, const PostprocessConfig& post,
                                                     const TiledConfig& tiled, unsigned threads = 1) {
  post.validate();
  tiled.dims.validate();
  tiled.merge.validate();
  std::vector<TileGrid> grids;
  std::map<int, std::size_t> scheme_slot;
  for (std::size_t s = 0; s < tiled.merge.schemes.size(); ++s) {
    grids.emplace_back(tiled.dims, tiled.merge.schemes[s]);
    if (!scheme_slot.emplace(tiled.merge.schemes[s].id, s).second) throw ConfigError("duplicate tiling scheme id");
  }
  for (const auto& d : raw) {
    if (!d.has_provenance()) throw GeometryError("detection in image '" + d.image_id + "' has no tile provenance");
    if (!scheme_slot.count(*d.tiling_id)) {
      throw GeometryError("detection references unknown tiling " + std::to_string(*d.tiling_id));
    }
  }

  const auto groups = group_by_image(raw);
  std::vector<const std::vector<std::size_t>*> per_image;
  for (const auto& [id, idx] : groups) per_image.push_back(&idx);
  std::vector<std::vector<Detection>> merged(per_image.size());

  parallel_for(per_image.size(), threads, [&](std::size_t k) {
    // (scheme slot, row, col) -> detections of that tile, in file order.
    std::map<std::tuple<std::size_t, int, int>, std::vector<Detection>> by_tile;
    for (const auto i : *per_image[k]) {
      const auto& d = raw[i];
      by_tile[{scheme_slot.at(*d.tiling_id), d.tile->row, d.tile->col}].push_back(d);
    }
    std::vector<std::vector<Detection>> per_scheme(grids.size());
    for (auto& [key, dets] : by_tile) {
      const auto [slot, row, col] = key;
      const Tile tile = grids[slot].tile(row, col);
      std::vector<Detection> kept = postprocess(dets, post);
      for (auto& d : kept) d.box = to_image_frame(d.box, tile);
      const std::vector<Tile> one{tile};
      for (auto& d : filter_integral(kept, one, tiled.dims)) per_scheme[slot].push_back(std::move(d));
    }
    merged[k] = merge_tilings(per_scheme, tiled.merge);
  });

  std::vector<Detection> out;
  for (auto& m : merged) {
    for (auto& d : m) out.push_back(std::move(d));
  }
  return out;
}

/// Plain evaluation: per-image postprocess, then matching and metrics.
inline Evaluation evaluate(const std::vector<Annotation>& annotations, const std::vector<Detection>& detections,
                           const EvalConfig& cfg) {
  cfg.validate();
  return score_dataset(annotations, postprocess_by_image(detections, cfg.post), cfg);
}

/// Full-image pipeline from tile-frame detections.
inline Evaluation end_to_end(const std::vector<Annotation>& annotations, const std::vector<Detection>& raw,
                             const EvalConfig& cfg, const TiledConfig& tiled) {
  cfg.validate();
  return score_dataset(annotations, merge_tiled_detections(raw, cfg.post, tiled, cfg.threads), cfg);
}

inline bool any_provenance(const std::vector<Detection>& dets) {
  return std::any_of(dets.begin(), dets.end(), [](const Detection& d) { return d.has_provenance(); });
}

// Tiled pipeline when the detections carry tile provenance, plain otherwise.
inline Evaluation run_evaluation(const std::vector<Annotation>& annotations, const std::vector<Detection>& detections,
                                 const EvalConfig& cfg, const std::optional<TiledConfig>& tiled) {
  if (any_provenance(detections)) {
    if (!tiled) throw ConfigError("detections carry tile provenance; the image size is required");
    return end_to_end(annotations, detections, cfg, *tiled);
  }
  return evaluate(annotations, detections, cfg);
}

// ---------------------------------------------------------------------------
// Threshold sweep

struct SweepGrid {
  std::vector<double> confidence_values;
  std::vector<double> nms_values;

  void validate() const {
    if (confidence_values.empty() || nms_values.empty()) throw ConfigError("sweep grid is empty");
    for (const auto* list : {&confidence_values, &nms_values}) {
      for (std::size_t i = 0; i < list->size(); ++i) {
        const double v = (*list)[i];
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("sweep values must lie in [0,1]");
        if (i > 0 && !(v > (*list)[i - 1])) throw ConfigError("sweep values must be strictly increasing");
      }
    }
  }

  std::size_t size() const noexcept { return confidence_values.size() * nms_values.size(); }
};

namespace detail {

// Snaps accumulated step arithmetic (0.35 + 7 * 0.05) onto the decimal
// value it denotes (0.7).
inline double snap_decimal(double v) { return std::round(v * 1e12) / 1e12; }

}  // namespace detail

/// "start:stop:step" (inclusive of stop when it lands on the grid) or a
/// comma-separated list of values.
inline std::vector<double> parse_value_list(std::string_view text) {
  std::vector<double> out;
  if (text.find(':') != std::string_view::npos) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string_view::npos || text.find(':', c2 + 1) != std::string_view::npos) {
      throw ConfigError("range must be start:stop:step");
    }
    const double start = detail::parse_number(text.substr(0, c1), "range start");
    const double stop = detail::parse_number(text.substr(c1 + 1, c2 - c1 - 1), "range stop");
    const double step = detail::parse_number(text.substr(c2 + 1), "range step");
    if (!(step > 0.0) || stop < start) throw ConfigError("range needs step > 0 and stop >= start");
    const auto n = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t k = 0; k < n; ++k) out.push_back(detail::snap_decimal(start + static_cast<double>(k) * step));
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    out.push_back(detail::parse_number(text.substr(start, comma == std::string_view::npos ? text.npos : comma - start),
                                       "value"));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// Confidence 0.35..0.90 step 0.05; NMS 0.05..0.50 step 0.05 plus 0.005.
inline SweepGrid default_sweep_grid() {
  SweepGrid g{parse_value_list("0.35:0.9:0.05"), parse_value_list("0.05:0.5:0.05")};
  g.nms_values.insert(g.nms_values.begin(), 0.005);
  return g;
}

struct SweepCell {
  double confidence = 0.0;
  double nms = 0.0;
  Evaluation eval;
};

struct SweepResult {
  std::vector<SweepCell> cells;  // confidence-major, both axes ascending
  std::size_t best = 0;          // max F1; ties -> lower confidence, then lower NMS
};

inline SweepResult sweep(const std::vector<Annotation>& annotations, const std::vector<Detection>& raw,
                         const SweepGrid& grid, const EvalConfig& base,
                         const std::optional<TiledConfig>& tiled = std::nullopt) {
  grid.validate();
  base.validate();
  SweepResult result;
  result.cells.resize(grid.size());
  const std::size_t n_nms = grid.nms_values.size();
  EvalConfig inner = base;
  inner.threads = 1;
  parallel_for(grid.size(), base.threads, [&](std::size_t k) {
    EvalConfig cfg = inner;
    cfg.post.confidence_threshold = grid.confidence_values[k / n_nms];
    cfg.post.nms_threshold = grid.nms_values[k % n_nms];
    result.cells[k] = SweepCell{cfg.post.confidence_threshold, cfg.post.nms_threshold,
                                run_evaluation(annotations, raw, cfg, tiled)};
  });
  for (std::size_t k = 1; k < result.cells.size(); ++k) {
    if (result.cells[k].eval.report.f1 > result.cells[result.best].eval.report.f1) result.best = k;
  }
  return result;
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& r) {
  out << "confidence,nms,tp,fp,fn,precision,recall,f1,j0\n";
  for (const auto& c : r.cells) {
    const auto& rep = c.eval.report;
    out << format_sig9(c.confidence) << ',' << format_sig9(c.nms) << ',' << rep.counts.tp << ',' << rep.counts.fp
        << ',' << rep.counts.fn << ',' << format_sig9(rep.precision) << ',' << format_sig9(rep.recall) << ','
        << format_sig9(rep.f1) << ',' << format_sig9(c.eval.terms.value(0.0)) << '\n';
  }
  if (!out) throw Error("write failure");
}

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SynthConfig {
  ImageDims dims{6000.0, 4000.0};
  std::size_t n_objects = 1000;
  double min_side = 10.0;
  double max_side = 80.0;
  double miss_rate = 0.0;
  double spurious_rate = 0.0;
  double jitter_frac = 0.0;
  // Upper bound on the IoU between any two placement envelopes (the box
  // grown by jitter_frac of its size on every side).
  double separation_iou = 0.1;
  // Row-stochastic [true class][reported class]; empty means identity.
  std::vector<std::vector<double>> label_confusion;
  ClassSet classes{{"Bdh", "Keitt", "Kent"}};
  double confidence_min = 0.75;
  double confidence_max = 1.0;
  std::uint64_t seed = 42;
  std::string image_id = "synth";
  std::size_t max_attempts = 100000;  // per placed box

  void validate() const {
    dims.validate();
    auto prob = [](double v, const char* what) {
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0,1]");
    };
    prob(miss_rate, "miss rate");
    prob(spurious_rate, "spurious rate");
    prob(separation_iou, "separation IoU");
    prob(confidence_min, "confidence_min");
    prob(confidence_max, "confidence_max");
    if (confidence_min > confidence_max) throw ConfigError("confidence_min exceeds confidence_max");
    if (!(jitter_frac >= 0.0 && jitter_frac < 0.5)) throw ConfigError("jitter fraction must lie in [0,0.5)");
    if (!(min_side >= 1.0 && min_side <= max_side)) throw ConfigError("box side range must satisfy 1 <= min <= max");
    if (max_side * (1.0 + 2.0 * jitter_frac) >= std::min(dims.width, dims.height)) {
      throw ConfigError("boxes do not fit in the image");
    }
    if (!label_confusion.empty()) {
      if (label_confusion.size() != classes.size()) throw ConfigError("label confusion must be square over the class set");
      for (const auto& row : label_confusion) {
        if (row.size() != classes.size()) throw ConfigError("label confusion must be square over the class set");
        double sum = 0.0;
        for (const double p : row) {
          prob(p, "label confusion entry");
          sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("label confusion rows must sum to 1");
      }
    }
  }
};

// Intended correspondence of one synthetic object or spurious detection.
struct ProvenanceEntry {
  std::optional<std::size_t> annotation;
  std::optional<std::size_t> detection;

  std::string_view kind() const noexcept {
    if (annotation && detection) return "detected";
    return annotation ? "missed" : "spurious";
  }
};

struct SynthScene {
  std::vector<Annotation> annotations;
  std::vector<Detection> detections;
  std::vector<ProvenanceEntry> provenance;  // one per annotation (in order), then one per spurious box
  std::vector<std::string> warnings;

  // TP/FP/FN the pipeline must reproduce.
  Counts expected_counts() const {
    Counts c;
    for (const auto& p : provenance) {
      if (p.annotation && p.detection) ++c.tp;
      else if (p.annotation) ++c.fn;
      else ++c.fp;
    }
    return c;
  }
};

namespace detail {

inline BBox envelope(const BBox& b, double jitter) {
  const double gx = jitter * b.width();
  const double gy = jitter * b.height();
  return BBox(std::max(0.0, b.x_min() - gx), std::max(0.0, b.y_min() - gy), b.x_max() + gx, b.y_max() + gy);
}

inline std::size_t round_count(std::size_t n, double rate) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * rate));
}

}  // namespace detail

/// Deterministic scene: separated ground-truth boxes, and detections derived
/// from them by dropping exactly round(n * miss_rate), translating each
/// survivor by at most jitter_frac of its size per axis, relabelling through
/// label_confusion, and adding round(n * spurious_rate) boxes away from all
/// ground truth. Detection order is shuffled.
inline SynthScene synth_scene(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  SynthScene scene;
  if (cfg.jitter_frac >= 0.3) {
    scene.warnings.push_back("jitter fraction >= 0.3: matched IoU may fall to the 0.25 threshold; counts are not guaranteed");
  }
  if (cfg.separation_iou > 0.1) {
    scene.warnings.push_back("separation IoU above 0.1: counts are not guaranteed");
  }

  const auto lo = static_cast<std::int64_t>(std::ceil(cfg.min_side));
  const auto hi = static_cast<std::int64_t>(std::floor(cfg.max_side));
  if (lo > hi) throw ConfigError("box side range contains no integer");

  std::vector<BBox> envelopes;
  auto place = [&](double jitter, std::size_t index) -> BBox {
    for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      const auto w = static_cast<double>(rng.integer(lo, hi));
      const auto h = static_cast<double>(rng.integer(lo, hi));
      const auto x_lo = static_cast<std::int64_t>(std::ceil(jitter * w));
      const auto y_lo = static_cast<std::int64_t>(std::ceil(jitter * h));
      const auto x_hi = static_cast<std::int64_t>(std::floor(cfg.dims.width - w - jitter * w));
      const auto y_hi = static_cast<std::int64_t>(std::floor(cfg.dims.height - h - jitter * h));
      if (x_hi < x_lo || y_hi < y_lo) continue;
      const auto x = static_cast<double>(rng.integer(x_lo, x_hi));
      const auto y = static_cast<double>(rng.integer(y_lo, y_hi));
      const BBox box(x, y, x + w, y + h);
      const BBox env = detail::envelope(box, jitter);
      const bool clear = std::none_of(envelopes.begin(), envelopes.end(),
                                      [&](const BBox& e) { return jaccard(e, env) > cfg.separation_iou; });
      if (clear) {
        envelopes.push_back(env);
        return box;
      }
    }
    throw Error("could not place synthetic box " + std::to_string(index) + " after " +
                std::to_string(cfg.max_attempts) + " attempts; lower the object density");
  };

  const std::size_t n_classes = cfg.classes.size();
  for (std::size_t i = 0; i < cfg.n_objects; ++i) {
    const BBox box = place(cfg.jitter_frac, i);
    const auto cls = static_cast<std::size_t>(rng.below(n_classes));
    scene.annotations.push_back(Annotation{cfg.image_id, box, cfg.classes[cls], i});
  }

  // Exactly round(n * miss_rate) misses, chosen by a partial Fisher-Yates.
  std::vector<std::size_t> order(cfg.n_objects);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t n_miss = std::min(cfg.n_objects, detail::round_count(cfg.n_objects, cfg.miss_rate));
  std::vector<bool> missed(cfg.n_objects, false);
  for (std::size_t k = 0; k < n_miss; ++k) {
    const std::size_t j = k + static_cast<std::size_t>(rng.below(order.size() - k));
    std::swap(order[k], order[j]);
    missed[order[k]] = true;
  }

  auto report_label = [&](std::size_t true_cls) -> std::size_t {
    if (cfg.label_confusion.empty()) return true_cls;
    const double u = rng.uniform01();
    double acc = 0.0;
    for (std::size_t k = 0; k < n_classes; ++k) {
      acc += cfg.label_confusion[true_cls][k];
      if (u < acc) return k;
    }
    // u landed in the rounding gap below 1.0: last class with nonzero mass.
    for (std::size_t k = n_classes; k-- > 0;) {
      if (cfg.label_confusion[true_cls][k] > 0.0) return k;
    }
    return true_cls;
  };

  std::vector<Detection> dets;
  std::vector<ProvenanceEntry> prov;
  for (std::size_t i = 0; i < cfg.n_objects; ++i) {
    if (missed[i]) {
      prov.push_back({i, std::nullopt});
      continue;
    }
    const auto& a = scene.annotations[i];
    const double dx = rng.uniform(-1.0, 1.0) * cfg.jitter_frac * a.box.width();
    const double dy = rng.uniform(-1.0, 1.0) * cfg.jitter_frac * a.box.height();
    const BBox box = a.box.translated(dx, dy);
    const std::size_t cls = report_label(*cfg.classes.index_of(a.label));
    const double conf = rng.uniform(cfg.confidence_min, cfg.confidence_max);
    prov.push_back({i, dets.size()});
    dets.push_back(Detection{cfg.image_id, box, cfg.classes[cls], conf, std::nullopt, std::nullopt});
  }
  const std::size_t n_spurious = detail::round_count(cfg.n_objects, cfg.spurious_rate);
  for (std::size_t s = 0; s < n_spurious; ++s) {
    const BBox box = place(0.0, cfg.n_objects + s);
    const auto cls = static_cast<std::size_t>(rng.below(n_classes));
    const double conf = rng.uniform(cfg.confidence_min, cfg.confidence_max);
    prov.push_back({std::nullopt, dets.size()});
    dets.push_back(Detection{cfg.image_id, box, cfg.classes[cls], conf, std::nullopt, std::nullopt});
  }

  // Shuffle detections and remap provenance.
  std::vector<std::size_t> perm(dets.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.below(i))]);
  }
  std::vector<std::size_t> new_pos(dets.size());
  scene.detections.reserve(dets.size());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    new_pos[perm[k]] = k;
    scene.detections.push_back(dets[perm[k]]);
  }
  for (auto& p : prov) {
    if (p.detection) p.detection = new_pos[*p.detection];
  }
  scene.provenance = std::move(prov);
  return scene;
}

inline void write_provenance(std::ostream& out, const SynthScene& scene, const SynthConfig& cfg) {
  out << "# generator=" << Rng::kName << " seed=" << cfg.seed << '\n';
  out << "kind,annotation_row,detection_row\n";
  for (const auto& p : scene.provenance) {
    out << p.kind() << ',';
    if (p.annotation) out << *p.annotation;
    out << ',';
    if (p.detection) out << *p.detection;
    out << '\n';
  }
  if (!out) throw Error("write failure");
}

}  // namespace tilescore
