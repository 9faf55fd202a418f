// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tilescore/detection.hpp"
#include "tilescore/error.hpp"
#include "tilescore/geometry.hpp"
#include "tilescore/matching.hpp"

namespace tilescore {

struct Counts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  Counts& operator+=(const Counts& o) noexcept {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

inline Counts counts_of(const MatchResult& m) noexcept {
  return Counts{m.pairs.size(), m.unmatched_detections.size(), m.unmatched_annotations.size()};
}

// Ratios are 0 whenever their denominator is 0.
struct Ratios {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

inline Ratios ratios_of(const Counts& c) noexcept {
  Ratios r;
  const auto tp = static_cast<double>(c.tp);
  if (c.tp + c.fp > 0) r.precision = tp / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) r.recall = tp / static_cast<double>(c.tp + c.fn);
  if (r.precision + r.recall > 0.0) r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

/// Summable area terms of the global Jaccard index. Datasets are reduced by
/// adding terms across images, then evaluating once.
struct JaccardTerms {
  double intersection = 0.0;  // sum over TP pairs of area(A ∩ P)
  double union_area = 0.0;    // sum over TP pairs of area(A ∪ P)
  double fn_area = 0.0;       // sum of unmatched annotation areas
  double fp_area = 0.0;       // sum of unmatched detection areas

  JaccardTerms& operator+=(const JaccardTerms& o) noexcept {
    intersection += o.intersection;
    union_area += o.union_area;
    fn_area += o.fn_area;
    fp_area += o.fp_area;
    return *this;
  }

  // 0 when the denominator vanishes.
  double value(double alpha) const noexcept {
    const double denom = union_area + alpha * fn_area + alpha * fp_area;
    return denom > 0.0 ? intersection / denom : 0.0;
  }
};

inline JaccardTerms jaccard_terms(const MatchResult& m, std::span<const BBox> annotations,
                                  std::span<const BBox> detections) {
  JaccardTerms t;
  for (const auto& p : m.pairs) {
    const BBox& a = annotations[p.annotation];
    const BBox& d = detections[p.detection];
    t.intersection += intersection_area(a, d);
    t.union_area += union_area(a, d);
  }
  for (const std::size_t i : m.unmatched_annotations) t.fn_area += annotations[i].area();
  for (const std::size_t j : m.unmatched_detections) t.fp_area += detections[j].area();
  return t;
}

/// Global Jaccard J_alpha: TP intersections over TP unions plus alpha-weighted
/// FN and FP areas. alpha = 0 ignores unmatched boxes entirely.
inline double global_jaccard(const MatchResult& m, std::span<const BBox> annotations,
                             std::span<const BBox> detections, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
  return jaccard_terms(m, annotations, detections).value(alpha);
}

/// Expert-class x network-class table over matched pairs. Indexing is
/// [expert][network]; each expert column is normalized to 100 over the
/// matched fruits of that class, so undetected fruits do not enter the
/// percentages. They show up in `annotated` and `recall` instead.
struct ConfusionMatrix {
  ClassSet classes;
  std::vector<std::vector<std::size_t>> counts;  // [expert][network]
  std::vector<std::size_t> annotated;            // annotations per expert class
  std::vector<std::vector<double>> percent;      // [expert][network], 0..100
  std::vector<bool> empty_column;                // expert class with zero matches
  std::vector<double> recall;                    // matched / annotated per expert class

  static ConfusionMatrix from_counts(ClassSet classes, std::vector<std::vector<std::size_t>> counts,
                                     std::vector<std::size_t> annotated) {
    const std::size_t n = classes.size();
    if (counts.size() != n || annotated.size() != n) throw ConfigError("confusion counts do not match class set");
    ConfusionMatrix cm{std::move(classes), std::move(counts), std::move(annotated), {}, {}, {}};
    cm.percent.assign(n, std::vector<double>(n, 0.0));
    cm.empty_column.assign(n, false);
    cm.recall.assign(n, 0.0);
    for (std::size_t e = 0; e < n; ++e) {
      if (cm.counts[e].size() != n) throw ConfigError("confusion counts do not match class set");
      std::size_t total = 0;
      for (const auto c : cm.counts[e]) total += c;
      cm.empty_column[e] = total == 0;
      if (total > 0) {
        for (std::size_t k = 0; k < n; ++k) {
          cm.percent[e][k] = 100.0 * static_cast<double>(cm.counts[e][k]) / static_cast<double>(total);
        }
      }
      if (cm.annotated[e] > 0) cm.recall[e] = static_cast<double>(total) / static_cast<double>(cm.annotated[e]);
    }
    return cm;
  }

  std::size_t matched_total() const noexcept {
    std::size_t s = 0;
    for (const auto& col : counts) {
      for (const auto c : col) s += c;
    }
    return s;
  }
};

// Percentages as printed in tables: one decimal.
inline double round_1dp(double percent) { return std::round(percent * 10.0) / 10.0; }

struct ConfusionTally {
  std::vector<std::vector<std::size_t>> counts;
  std::vector<std::size_t> annotated;

  explicit ConfusionTally(std::size_t n) : counts(n, std::vector<std::size_t>(n, 0)), annotated(n, 0) {}

  ConfusionTally& operator+=(const ConfusionTally& o) {
    for (std::size_t e = 0; e < counts.size(); ++e) {
      annotated[e] += o.annotated[e];
      for (std::size_t k = 0; k < counts.size(); ++k) counts[e][k] += o.counts[e][k];
    }
    return *this;
  }
};

inline ConfusionTally confusion_tally(const MatchResult& m, std::span<const Annotation> annotations,
                                      std::span<const Detection> detections, const ClassSet& classes) {
  auto class_of = [&](const std::string& label) {
    const auto k = classes.index_of(label);
    if (!k) throw ConfigError("label '" + label + "' is not in the class set");
    return *k;
  };
  ConfusionTally t(classes.size());
  for (const auto& a : annotations) ++t.annotated[class_of(a.label)];
  for (const auto& p : m.pairs) {
    ++t.counts[class_of(annotations[p.annotation].label)][class_of(detections[p.detection].label)];
  }
  return t;
}

/// Multi-class identification table for a label-agnostic match.
inline ConfusionMatrix confusion(const MatchResult& m, std::span<const Annotation> annotations,
                                 std::span<const Detection> detections, const ClassSet& classes) {
  auto t = confusion_tally(m, annotations, detections, classes);
  return ConfusionMatrix::from_counts(classes, std::move(t.counts), std::move(t.annotated));
}

// Thresholds echoed into every report.
struct ReportConfig {
  double confidence_threshold = 0.7;
  double nms_threshold = 0.25;
  double match_threshold = kDefaultMatchThreshold;

  friend bool operator==(const ReportConfig&, const ReportConfig&) = default;
};

struct ScoreReport {
  Counts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double alpha = 0.0;
  double j_alpha = 0.0;
  ReportConfig config;
  std::optional<ConfusionMatrix> confusion;
};

inline ScoreReport make_report(const Counts& counts, const JaccardTerms& terms, double alpha,
                               const ReportConfig& config = {}) {
  const Ratios r = ratios_of(counts);
  ScoreReport rep;
  rep.counts = counts;
  rep.precision = r.precision;
  rep.recall = r.recall;
  rep.f1 = r.f1;
  rep.alpha = alpha;
  rep.j_alpha = terms.value(alpha);
  rep.config = config;
  return rep;
}

// Counts and ratios of a single match; J_alpha is left at 0.
inline ScoreReport score(const MatchResult& m) { return make_report(counts_of(m), JaccardTerms{}, 0.0); }

}  // namespace tilescore
