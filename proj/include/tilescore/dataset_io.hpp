// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "tilescore/detection.hpp"
#include "tilescore/error.hpp"
#include "tilescore/geometry.hpp"
#include "tilescore/metrics.hpp"

namespace tilescore {

inline constexpr std::string_view kAnnotationHeader = "image_id,x_min,y_min,x_max,y_max,label";
inline constexpr std::string_view kDetectionHeader = "image_id,x_min,y_min,x_max,y_max,label,confidence";
inline constexpr std::string_view kDetectionTiledHeader =
    "image_id,x_min,y_min,x_max,y_max,label,confidence,tiling_id,tile_row,tile_col";

// Report schema version, bumped on incompatible JSON/CSV changes.
inline constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Number formatting

// Shortest representation that parses back to the same double.
inline std::string format_exact(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

// 9 significant digits, trailing zeros dropped ("0.9", "0.947368421").
inline std::string format_sig9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// The double that format_sig9 denotes. Reports store these values so the
// JSON round trip is bit-exact.
inline double round_sig9(double v) { return std::strtod(format_sig9(v).c_str(), nullptr); }

// ---------------------------------------------------------------------------
// CSV reading

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) return out;
    start = comma + 1;
  }
}

inline double parse_real(std::string_view s, const char* what, std::size_t line) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end || !std::isfinite(v)) {
    throw ParseError(std::string("non-numeric ") + what + " '" + std::string(s) + "'", line);
  }
  return v;
}

inline int parse_index(std::string_view s, const char* what, std::size_t line) {
  int v = 0;
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end || v < 0) {
    throw ParseError(std::string("invalid ") + what + " '" + std::string(s) + "'", line);
  }
  return v;
}

inline BBox parse_box(const std::vector<std::string_view>& f, std::size_t line) {
  const double x0 = parse_real(f[1], "coordinate", line);
  const double y0 = parse_real(f[2], "coordinate", line);
  const double x1 = parse_real(f[3], "coordinate", line);
  const double y1 = parse_real(f[4], "coordinate", line);
  if (x0 < 0.0 || y0 < 0.0) throw ParseError("negative coordinate", line);
  if (!(x0 < x1) || !(y0 < y1)) throw ParseError("empty box", line);
  return BBox(x0, y0, x1, y1);
}

inline const std::string& check_label(std::string_view label, const ClassSet& classes, std::size_t line) {
  const auto k = classes.index_of(label);
  if (!k) throw ParseError("unknown label '" + std::string(label) + "'", line);
  return classes[*k];
}

// Calls `row(fields, line_no)` for every data row. Returns the header, or an
// empty string for an empty stream.
template <typename RowFn>
std::string for_each_row(std::istream& in, RowFn&& row) {
  std::string line;
  std::string header;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header.empty()) {
      header = line;
      if (line_no == 1 && header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);
      row(std::vector<std::string_view>{}, line_no, header);
      continue;
    }
    row(split_csv(line), line_no, std::string_view{});
  }
  if (in.bad()) throw Error("read failure");
  return header;
}

}  // namespace detail

/// Reads the annotations CSV. Ids are assigned per image in file order.
inline std::vector<Annotation> load_annotations(std::istream& in, const ClassSet& classes) {
  std::vector<Annotation> out;
  std::map<std::string, std::size_t, std::less<>> next_id;
  detail::for_each_row(in, [&](const std::vector<std::string_view>& f, std::size_t line, std::string_view header) {
    if (!header.empty()) {
      if (header != kAnnotationHeader) throw ParseError("unexpected header", line);
      return;
    }
    if (f.size() != 6) {
      throw ParseError("expected 6 columns, got " + std::to_string(f.size()), line);
    }
    if (f[0].empty()) throw ParseError("empty image_id", line);
    BBox box = detail::parse_box(f, line);
    const std::string& label = detail::check_label(f[5], classes, line);
    std::string image(f[0]);
    const std::size_t id = next_id[image]++;
    out.push_back(Annotation{std::move(image), box, label, id});
  });
  return out;
}

/// Reads the detections CSV, with or without the tile provenance columns.
/// A tiled file may leave all three provenance fields of a row empty.
inline std::vector<Detection> load_detections(std::istream& in, const ClassSet& classes) {
  std::vector<Detection> out;
  std::size_t columns = 0;
  detail::for_each_row(in, [&](const std::vector<std::string_view>& f, std::size_t line, std::string_view header) {
    if (!header.empty()) {
      if (header == kDetectionHeader) {
        columns = 7;
      } else if (header == kDetectionTiledHeader) {
        columns = 10;
      } else {
        throw ParseError("unexpected header", line);
      }
      return;
    }
    if (f.size() != columns) {
      throw ParseError("expected " + std::to_string(columns) + " columns, got " + std::to_string(f.size()), line);
    }
    if (f[0].empty()) throw ParseError("empty image_id", line);
    BBox box = detail::parse_box(f, line);
    const std::string& label = detail::check_label(f[5], classes, line);
    const double conf = detail::parse_real(f[6], "confidence", line);
    if (conf < 0.0 || conf > 1.0) throw ParseError("confidence out of range [0,1]", line);
    Detection d{std::string(f[0]), box, label, conf, std::nullopt, std::nullopt};
    if (columns == 10) {
      const bool any = !f[7].empty() || !f[8].empty() || !f[9].empty();
      if (any) {
        d.tiling_id = detail::parse_index(f[7], "tiling_id", line);
        d.tile = TileIndex{detail::parse_index(f[8], "tile_row", line), detail::parse_index(f[9], "tile_col", line)};
      }
    }
    out.push_back(std::move(d));
  });
  return out;
}

// ---------------------------------------------------------------------------
// CSV writing

namespace detail {

inline void check_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") != std::string::npos) {
    throw Error("field '" + s + "' contains a CSV separator");
  }
}

inline void write_box(std::ostream& out, const BBox& b) {
  out << format_exact(b.x_min()) << ',' << format_exact(b.y_min()) << ',' << format_exact(b.x_max()) << ','
      << format_exact(b.y_max());
}

inline void check_stream(std::ostream& out) {
  if (!out) throw Error("write failure");
}

}  // namespace detail

inline void write_annotations(std::ostream& out, const std::vector<Annotation>& anns) {
  out << kAnnotationHeader << '\n';
  for (const auto& a : anns) {
    detail::check_field(a.image_id);
    out << a.image_id << ',';
    detail::write_box(out, a.box);
    out << ',' << a.label << '\n';
  }
  detail::check_stream(out);
}

/// Writes the tiled header when any detection carries provenance, unless
/// `with_provenance` is false, in which case provenance is dropped.
inline void write_detections(std::ostream& out, const std::vector<Detection>& dets, bool with_provenance = true) {
  bool tiled = false;
  if (with_provenance) {
    for (const auto& d : dets) tiled = tiled || d.has_provenance();
  }
  out << (tiled ? kDetectionTiledHeader : kDetectionHeader) << '\n';
  for (const auto& d : dets) {
    detail::check_field(d.image_id);
    out << d.image_id << ',';
    detail::write_box(out, d.box);
    out << ',' << d.label << ',' << format_exact(d.confidence);
    if (tiled) {
      if (d.has_provenance()) {
        out << ',' << *d.tiling_id << ',' << d.tile->row << ',' << d.tile->col;
      } else {
        out << ",,,";
      }
    }
    out << '\n';
  }
  detail::check_stream(out);
}

// ---------------------------------------------------------------------------
// Reports

enum class ReportFormat { json, csv };

inline nlohmann::ordered_json report_to_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kReportSchemaVersion;
  j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}};
  j["precision"] = round_sig9(r.precision);
  j["recall"] = round_sig9(r.recall);
  j["f1"] = round_sig9(r.f1);
  j["j_alpha"] = {{"alpha", round_sig9(r.alpha)}, {"value", round_sig9(r.j_alpha)}};
  if (r.confusion) {
    const auto& cm = *r.confusion;
    nlohmann::ordered_json c;
    c["classes"] = cm.classes.names();
    c["counts"] = cm.counts;
    auto percent = nlohmann::ordered_json::array();
    auto percent_1dp = nlohmann::ordered_json::array();
    for (const auto& col : cm.percent) {
      auto p = nlohmann::ordered_json::array();
      auto p1 = nlohmann::ordered_json::array();
      for (const double v : col) {
        p.push_back(round_sig9(v));
        p1.push_back(round_1dp(v));
      }
      percent.push_back(std::move(p));
      percent_1dp.push_back(std::move(p1));
    }
    c["percent"] = std::move(percent);
    c["percent_1dp"] = std::move(percent_1dp);
    c["empty_columns"] = cm.empty_column;
    c["annotated"] = cm.annotated;
    auto recall = nlohmann::ordered_json::array();
    for (const double v : cm.recall) recall.push_back(round_sig9(v));
    c["recall"] = std::move(recall);
    j["confusion"] = std::move(c);
  }
  j["config"] = {{"confidence_threshold", round_sig9(r.config.confidence_threshold)},
                 {"nms_threshold", round_sig9(r.config.nms_threshold)},
                 {"match_threshold", round_sig9(r.config.match_threshold)}};
  return j;
}

/// Inverse of report_to_json. Ratios come back as their 9-digit values.
inline ScoreReport report_from_json(const nlohmann::json& j) {
  try {
    ScoreReport r;
    r.counts.tp = j.at("counts").at("tp").get<std::size_t>();
    r.counts.fp = j.at("counts").at("fp").get<std::size_t>();
    r.counts.fn = j.at("counts").at("fn").get<std::size_t>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.alpha = j.at("j_alpha").at("alpha").get<double>();
    r.j_alpha = j.at("j_alpha").at("value").get<double>();
    r.config.confidence_threshold = j.at("config").at("confidence_threshold").get<double>();
    r.config.nms_threshold = j.at("config").at("nms_threshold").get<double>();
    r.config.match_threshold = j.at("config").at("match_threshold").get<double>();
    if (j.contains("confusion")) {
      const auto& c = j.at("confusion");
      r.confusion = ConfusionMatrix::from_counts(ClassSet(c.at("classes").get<std::vector<std::string>>()),
                                                 c.at("counts").get<std::vector<std::vector<std::size_t>>>(),
                                                 c.at("annotated").get<std::vector<std::size_t>>());
      r.confusion->percent = c.at("percent").get<std::vector<std::vector<double>>>();
      r.confusion->recall = c.at("recall").get<std::vector<double>>();
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed report: ") + e.what());
  }
}

inline void write_report_csv(std::ostream& out, const ScoreReport& r) {
  out << "field,value\n";
  out << "tp," << r.counts.tp << '\n' << "fp," << r.counts.fp << '\n' << "fn," << r.counts.fn << '\n';
  out << "precision," << format_sig9(r.precision) << '\n';
  out << "recall," << format_sig9(r.recall) << '\n';
  out << "f1," << format_sig9(r.f1) << '\n';
  out << "alpha," << format_sig9(r.alpha) << '\n';
  out << "j_alpha," << format_sig9(r.j_alpha) << '\n';
  out << "confidence_threshold," << format_sig9(r.config.confidence_threshold) << '\n';
  out << "nms_threshold," << format_sig9(r.config.nms_threshold) << '\n';
  out << "match_threshold," << format_sig9(r.config.match_threshold) << '\n';
  if (r.confusion) {
    const auto& cm = *r.confusion;
    const auto& names = cm.classes.names();
    // Column-major: expert class outer, network class inner.
    for (std::size_t e = 0; e < names.size(); ++e) {
      for (std::size_t k = 0; k < names.size(); ++k) {
        out << "count:" << names[e] << ':' << names[k] << ',' << cm.counts[e][k] << '\n';
        out << "percent:" << names[e] << ':' << names[k] << ',' << format_sig9(cm.percent[e][k]) << '\n';
      }
    }
    for (std::size_t e = 0; e < names.size(); ++e) {
      out << "recall:" << names[e] << ',' << format_sig9(cm.recall[e]) << '\n';
    }
  }
  detail::check_stream(out);
}

inline void write_report(const ScoreReport& r, std::ostream& out, ReportFormat format) {
  if (format == ReportFormat::json) {
    out << report_to_json(r).dump(2) << '\n';
    detail::check_stream(out);
  } else {
    write_report_csv(out, r);
  }
}

}  // namespace tilescore
