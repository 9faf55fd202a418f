// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "cli.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <thread>
#include <utility>

#include "CLI11.hpp"
#include "tilescore/tilescore.hpp"

namespace tilescore::cli {
namespace {

namespace fs = std::filesystem;

// An input or validation failure that names its file.
class InputError : public Error {
 public:
  using Error::Error;
};

// Thresholds and paths shared by the subcommands.
struct Options {
  std::string classes = "Bdh,Keitt,Kent";
  double match_threshold = kDefaultMatchThreshold;
  double alpha = 0.0;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());

  std::string annotations;
  std::vector<std::string> detections;
  std::string output;
  std::string format;
  double confidence = 0.7;
  double nms = 0.25;
  bool per_class_nms = false;

  std::string image_size;
  double tile_size = 500.0;
  std::string offsets = "0x0,0x250,250x0,250x250";

  std::string conf_list = "0.35:0.9:0.05";
  std::string nms_list = "0.005,0.05:0.5:0.05";

  std::size_t n = 1000;
  double miss = 0.0;
  double spurious = 0.0;
  double jitter = 0.0;
  double separation = 0.1;
  double min_side = 10.0;
  double max_side = 80.0;
  std::uint64_t seed = 42;
  std::string synth_size = "6000x4000";
  std::string label_confusion;
  std::string prefix;
};

// One output file, staged in memory and published by temp file + rename.
struct PendingOutput {
  std::string path;  // empty or "-" means stdout
  std::string content;
};

void publish(const std::vector<PendingOutput>& outputs, std::ostream& out) {
  std::vector<std::pair<fs::path, fs::path>> staged;
  auto discard = [&] {
    std::error_code ec;
    for (const auto& [tmp, _] : staged) fs::remove(tmp, ec);
  };
  for (const auto& o : outputs) {
    if (o.path.empty() || o.path == "-") continue;
    const fs::path target(o.path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f << o.content;
    f.close();
    if (!f) {
      staged.emplace_back(tmp, target);
      discard();
      throw InputError("cannot write '" + o.path + "'");
    }
    staged.emplace_back(tmp, target);
  }
  for (const auto& [tmp, target] : staged) {
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
      discard();
      throw InputError("cannot write '" + target.string() + "': " + ec.message());
    }
  }
  for (const auto& o : outputs) {
    if (o.path.empty() || o.path == "-") out << o.content;
  }
}

template <typename Loader>
auto load_file(const std::string& path, Loader&& loader) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError(path + ": cannot open file");
  try {
    return loader(in);
  } catch (const Error& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::vector<Annotation> read_annotations(const std::string& path, const ClassSet& classes) {
  return load_file(path, [&](std::istream& in) { return load_annotations(in, classes); });
}

std::vector<Detection> read_detections(const std::vector<std::string>& paths, const ClassSet& classes) {
  std::vector<Detection> all;
  for (const auto& p : paths) {
    auto part = load_file(p, [&](std::istream& in) { return load_detections(in, classes); });
    all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return all;
}

EvalConfig eval_config(const Options& o, const ClassSet& classes) {
  EvalConfig cfg;
  cfg.post.confidence_threshold = o.confidence;
  cfg.post.nms_threshold = o.nms;
  cfg.post.nms_mode = o.per_class_nms ? NmsMode::per_class : NmsMode::class_agnostic;
  cfg.match_threshold = o.match_threshold;
  cfg.alpha = o.alpha;
  cfg.classes = classes;
  cfg.threads = o.threads;
  cfg.validate();
  return cfg;
}

std::optional<TiledConfig> tiled_config(const Options& o, bool required) {
  if (o.image_size.empty()) {
    if (required) throw ConfigError("--image-size is required for tiled detections");
    return std::nullopt;
  }
  TiledConfig t;
  t.dims = parse_image_dims(o.image_size);
  t.merge.merge_threshold = o.match_threshold;
  t.merge.schemes = parse_schemes(o.offsets, o.tile_size);
  t.merge.validate();
  return t;
}

ReportFormat report_format(const Options& o) {
  if (o.format == "json") return ReportFormat::json;
  if (o.format == "csv") return ReportFormat::csv;
  if (o.format.empty()) {
    const auto ext = fs::path(o.output).extension().string();
    return ext == ".csv" ? ReportFormat::csv : ReportFormat::json;
  }
  throw ConfigError("unknown report format '" + o.format + "'");
}

Evaluation evaluate_inputs(const Options& o, const ClassSet& classes) {
  const EvalConfig cfg = eval_config(o, classes);
  const auto anns = read_annotations(o.annotations, classes);
  const auto dets = read_detections(o.detections, classes);
  const auto tiled = tiled_config(o, any_provenance(dets));
  return run_evaluation(anns, dets, cfg, tiled);
}

int cmd_evaluate(const Options& o, const ClassSet& classes, std::ostream& out) {
  const auto format = report_format(o);
  const Evaluation ev = evaluate_inputs(o, classes);
  std::ostringstream s;
  write_report(ev.report, s, format);
  publish({{o.output, s.str()}}, out);
  return kOk;
}

std::string confusion_table(const ConfusionMatrix& cm) {
  std::ostringstream s;
  const auto& names = cm.classes.names();
  s << std::left << std::setw(10) << "network" << "| expert\n" << std::setw(10) << "";
  for (const auto& n : names) s << std::right << std::setw(8) << n;
  s << '\n';
  for (std::size_t k = 0; k < names.size(); ++k) {
    s << std::left << std::setw(10) << names[k];
    for (std::size_t e = 0; e < names.size(); ++e) {
      s << std::right << std::setw(8) << std::fixed << std::setprecision(1) << round_1dp(cm.percent[e][k]);
    }
    s << '\n';
  }
  s << std::left << std::setw(10) << "recall";
  for (std::size_t e = 0; e < names.size(); ++e) {
    s << std::right << std::setw(8) << std::fixed << std::setprecision(3) << cm.recall[e];
  }
  s << '\n';
  return s.str();
}

int cmd_confusion(const Options& o, const ClassSet& classes, std::ostream& out) {
  const Evaluation ev = evaluate_inputs(o, classes);
  const auto& cm = *ev.report.confusion;
  std::ostringstream s;
  s << "expert,network,count,percent,percent_1dp\n";
  for (std::size_t e = 0; e < cm.classes.size(); ++e) {
    for (std::size_t k = 0; k < cm.classes.size(); ++k) {
      std::ostringstream p1;
      p1 << std::fixed << std::setprecision(1) << round_1dp(cm.percent[e][k]);
      s << cm.classes[e] << ',' << cm.classes[k] << ',' << cm.counts[e][k] << ',' << format_sig9(cm.percent[e][k])
        << ',' << p1.str() << '\n';
    }
  }
  if (!o.output.empty() && o.output != "-") publish({{o.output, s.str()}}, out);
  out << confusion_table(cm);
  return kOk;
}

int cmd_merge(const Options& o, const ClassSet& classes, std::ostream& out) {
  EvalConfig cfg = eval_config(o, classes);
  const auto tiled = tiled_config(o, true);
  const auto raw = read_detections(o.detections, classes);
  const auto merged = merge_tiled_detections(raw, cfg.post, *tiled, cfg.threads);
  std::ostringstream s;
  write_detections(s, merged, false);
  publish({{o.output, s.str()}}, out);
  return kOk;
}

int cmd_sweep(const Options& o, const ClassSet& classes, std::ostream& out) {
  const EvalConfig cfg = eval_config(o, classes);
  const SweepGrid grid{parse_value_list(o.conf_list), [&] {
                         auto v = parse_value_list(o.nms_list);
                         std::sort(v.begin(), v.end());
                         v.erase(std::unique(v.begin(), v.end()), v.end());
                         return v;
                       }()};
  const auto anns = read_annotations(o.annotations, classes);
  const auto dets = read_detections(o.detections, classes);
  const auto tiled = tiled_config(o, any_provenance(dets));
  const SweepResult r = sweep(anns, dets, grid, cfg, tiled);
  std::ostringstream s;
  write_sweep_csv(s, r);
  const auto& best = r.cells[r.best];
  std::ostringstream summary;
  summary << "best f1 " << format_sig9(best.eval.report.f1) << " at confidence " << format_sig9(best.confidence)
          << ", nms " << format_sig9(best.nms) << " (" << r.cells.size() << " cells)\n";
  publish({{o.output, s.str()}}, out);
  if (!o.output.empty() && o.output != "-") out << summary.str();
  return kOk;
}

std::vector<std::vector<double>> parse_matrix(const std::string& text) {
  std::vector<std::vector<double>> rows;
  if (text.empty()) return rows;
  std::size_t start = 0;
  while (true) {
    const auto semi = text.find(';', start);
    rows.push_back(parse_value_list(text.substr(start, semi == std::string::npos ? std::string::npos : semi - start)));
    if (semi == std::string::npos) break;
    start = semi + 1;
  }
  return rows;
}

int cmd_synth(const Options& o, const ClassSet& classes, std::ostream& out, std::ostream& err) {
  if (o.prefix.empty()) throw ConfigError("--o-prefix is required");
  SynthConfig cfg;
  cfg.dims = parse_image_dims(o.synth_size);
  cfg.n_objects = o.n;
  cfg.miss_rate = o.miss;
  cfg.spurious_rate = o.spurious;
  cfg.jitter_frac = o.jitter;
  cfg.separation_iou = o.separation;
  cfg.min_side = o.min_side;
  cfg.max_side = o.max_side;
  cfg.seed = o.seed;
  cfg.classes = classes;
  cfg.label_confusion = parse_matrix(o.label_confusion);
  const SynthScene scene = synth_scene(cfg);
  for (const auto& w : scene.warnings) err << "tilescore: warning: " << w << '\n';

  std::ostringstream a, d, p;
  write_annotations(a, scene.annotations);
  write_detections(d, scene.detections);
  write_provenance(p, scene, cfg);
  publish({{o.prefix + ".annotations.csv", a.str()},
           {o.prefix + ".detections.csv", d.str()},
           {o.prefix + ".provenance.csv", p.str()}},
          out);
  return kOk;
}

int cmd_tile_info(const Options& o, std::ostream& out) {
  const auto tiled = tiled_config(o, true);
  std::ostringstream s;
  s << "scheme_id,offset_x,offset_y,row,col,x_min,y_min,x_max,y_max\n";
  for (const auto& scheme : tiled->merge.schemes) {
    for (const auto& t : enumerate_tiles(tiled->dims, scheme)) {
      s << t.scheme_id << ',' << format_exact(scheme.offset_x) << ',' << format_exact(scheme.offset_y) << ','
        << t.row << ',' << t.col << ',' << format_exact(t.rect.x_min()) << ',' << format_exact(t.rect.y_min())
        << ',' << format_exact(t.rect.x_max()) << ',' << format_exact(t.rect.y_max()) << '\n';
    }
  }
  publish({{o.output, s.str()}}, out);
  return kOk;
}

void add_thresholds(CLI::App* sub, Options& o) {
  sub->add_option("--confidence", o.confidence, "Confidence threshold (kept when >=)")->capture_default_str();
  sub->add_option("--nms", o.nms, "NMS threshold (suppressed when Jaccard >)")->capture_default_str();
  sub->add_flag("--per-class-nms", o.per_class_nms, "Suppress only within the same label");
}

void add_tiling(CLI::App* sub, Options& o) {
  sub->add_option("--image-size", o.image_size, "Native image size WxH, e.g. 6000x4000");
  sub->add_option("--tiles", o.tile_size, "Tile side in pixels")->capture_default_str();
  sub->add_option("--offsets", o.offsets, "Tiling offsets XxY, comma separated")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  // Accept the single-dash long form "-o-prefix" as an alias.
  std::vector<std::string> args = raw_args;
  for (auto& a : args) {
    if (a == "-o-prefix") a = "--o-prefix";
  }

  Options o;
  CLI::App app{"Tiled detection merging and detection scoring toolkit", "tilescore"};
  app.set_version_flag("--version",
                       std::string("tilescore ") + kVersion + " (report schema " + std::to_string(kReportSchemaVersion) +
                           ")");
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--classes", o.classes, "Class names, comma separated, in table order")->capture_default_str();
  app.add_option("--match-threshold", o.match_threshold, "Matching and merging Jaccard threshold (matched when >)")
      ->capture_default_str();
  app.add_option("--alpha", o.alpha, "Weight of unmatched areas in the global Jaccard")->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score detections against annotations");
  evaluate_cmd->add_option("--annotations", o.annotations, "Annotations CSV")->required();
  evaluate_cmd->add_option("--detections", o.detections, "Detections CSV(s)")->required();
  evaluate_cmd->add_option("-o,--output", o.output, "Report path (stdout if omitted)");
  evaluate_cmd->add_option("--format", o.format, "json or csv (default: from extension, else json)");
  add_thresholds(evaluate_cmd, o);
  add_tiling(evaluate_cmd, o);

  auto* confusion_cmd = app.add_subcommand("confusion", "Multi-class identification table");
  confusion_cmd->add_option("--annotations", o.annotations, "Annotations CSV")->required();
  confusion_cmd->add_option("--detections", o.detections, "Detections CSV(s)")->required();
  confusion_cmd->add_option("-o,--output", o.output, "Table CSV path");
  add_thresholds(confusion_cmd, o);
  add_tiling(confusion_cmd, o);

  auto* merge_cmd = app.add_subcommand("merge", "Merge tile-frame detections of several tilings");
  merge_cmd->add_option("--detections", o.detections, "Tile-frame detections CSV(s)")->required();
  merge_cmd->add_option("-o,--output", o.output, "Merged detections CSV (stdout if omitted)");
  add_thresholds(merge_cmd, o);
  add_tiling(merge_cmd, o);
  merge_cmd->get_option("--image-size")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Confidence x NMS threshold grid");
  sweep_cmd->add_option("--annotations", o.annotations, "Annotations CSV")->required();
  sweep_cmd->add_option("--detections", o.detections, "Raw detections CSV(s)")->required();
  sweep_cmd->add_option("--conf-list", o.conf_list, "start:stop:step or comma list")->capture_default_str();
  sweep_cmd->add_option("--nms-list", o.nms_list, "start:stop:step or comma list")->capture_default_str();
  sweep_cmd->add_option("-o,--output", o.output, "Grid CSV path (stdout if omitted)");
  sweep_cmd->add_flag("--per-class-nms", o.per_class_nms, "Suppress only within the same label");
  add_tiling(sweep_cmd, o);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene with known ground truth");
  synth_cmd->add_option("--n", o.n, "Number of objects")->capture_default_str();
  synth_cmd->add_option("--miss", o.miss, "Fraction of objects left undetected")->capture_default_str();
  synth_cmd->add_option("--spurious", o.spurious, "Spurious detections as a fraction of n")->capture_default_str();
  synth_cmd->add_option("--jitter", o.jitter, "Max translation as a fraction of box size")->capture_default_str();
  synth_cmd->add_option("--separation", o.separation, "Max IoU between placement envelopes")->capture_default_str();
  synth_cmd->add_option("--min-side", o.min_side, "Smallest box side")->capture_default_str();
  synth_cmd->add_option("--max-side", o.max_side, "Largest box side")->capture_default_str();
  synth_cmd->add_option("--seed", o.seed, "Generator seed")->capture_default_str();
  synth_cmd->add_option("--image-size", o.synth_size, "Image size WxH")->capture_default_str();
  synth_cmd->add_option("--label-confusion", o.label_confusion, "Row-stochastic matrix, rows ';' separated");
  synth_cmd->add_option("--o-prefix", o.prefix, "Output prefix")->required();

  auto* tile_cmd = app.add_subcommand("tile-info", "List the tiles of each tiling scheme");
  tile_cmd->add_option("-o,--output", o.output, "Tile CSV path (stdout if omitted)");
  add_tiling(tile_cmd, o);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "tilescore: " << e.what() << '\n';
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kUsageError;
  }

  try {
    const ClassSet classes = ClassSet::parse(o.classes);
    if (o.threads == 0) o.threads = 1;
    if (*evaluate_cmd) return cmd_evaluate(o, classes, out);
    if (*confusion_cmd) return cmd_confusion(o, classes, out);
    if (*merge_cmd) return cmd_merge(o, classes, out);
    if (*sweep_cmd) return cmd_sweep(o, classes, out);
    if (*synth_cmd) return cmd_synth(o, classes, out, err);
    if (*tile_cmd) return cmd_tile_info(o, out);
  } catch (const Error& e) {
    err << "tilescore: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "tilescore: " << e.what() << '\n';
    return kInputError;
  }
  return kUsageError;
}

}  // namespace tilescore::cli
