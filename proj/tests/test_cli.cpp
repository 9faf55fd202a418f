// Copyright (C) 2026 The tilescore Authors
// SPDX-License-Identifier: Apache-2.0
//

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "tilescore/dataset_io.hpp"

namespace tilescore {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "tilescore");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("tilescore_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& content) const {
    std::ofstream(dir_ / name, std::ios::binary) << content;
    return path(name);
  }

  fs::path dir_;
};

const char* kAnnotations =
    "image_id,x_min,y_min,x_max,y_max,label\n"
    "img1,10,20,50,60,Kent\n"
    "img1,100,100,140,140,Bdh\n";

const char* kDetections =
    "image_id,x_min,y_min,x_max,y_max,label,confidence\n"
    "img1,10,20,50,60,Kent,0.91\n"
    "img1,300,300,340,340,Keitt,0.8\n"
    "img1,12,20,52,60,Kent,0.5\n";

TEST_F(CliTest, EvaluateWritesJsonReport) {
  const auto a = write("a.csv", kAnnotations), d = write("d.csv", kDetections);
  const auto r = invoke({"evaluate", "--annotations", a, "--detections", d, "--confidence", "0.7", "--nms", "0.25",
                         "--match-threshold", "0.25", "-o", path("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(slurp(path("report.json")));
  EXPECT_EQ(j["counts"]["tp"], 1);
  EXPECT_EQ(j["counts"]["fp"], 1);
  EXPECT_EQ(j["counts"]["fn"], 1);
  EXPECT_EQ(j["precision"], 0.5);
  EXPECT_EQ(j["config"]["confidence_threshold"], 0.7);
  EXPECT_EQ(j["config"]["nms_threshold"], 0.25);
  EXPECT_EQ(j["config"]["match_threshold"], 0.25);
  EXPECT_EQ(j["confusion"]["classes"], (nlohmann::json{"Bdh", "Keitt", "Kent"}));
  EXPECT_FALSE(fs::exists(path("report.json.tmp." + std::to_string(::getpid()))));
}

TEST_F(CliTest, EvaluateCsvToStdout) {
  const auto a = write("a.csv", kAnnotations), d = write("d.csv", kDetections);
  const auto r = invoke({"evaluate", "--annotations", a, "--detections", d, "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("field,value\ntp,1\nfp,1\nfn,1\n", 0), 0u);
}

TEST_F(CliTest, MissingAnnotationsIsUsageError) {
  const auto d = write("d.csv", kDetections);
  const auto r = invoke({"evaluate", "--detections", d});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--annotations"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST_F(CliTest, MalformedRowNamesFileAndLine) {
  const auto a = write("a.csv", "image_id,x_min,y_min,x_max,y_max,label\nimg1,50,20,10,60,Kent\n");
  const auto d = write("d.csv", kDetections);
  const auto r = invoke({"evaluate", "--annotations", a, "--detections", d, "-o", path("report.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find(a), std::string::npos);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
  EXPECT_FALSE(fs::exists(path("report.json")));
}

TEST_F(CliTest, BadThresholdIsInputError) {
  const auto a = write("a.csv", kAnnotations), d = write("d.csv", kDetections);
  EXPECT_EQ(invoke({"evaluate", "--annotations", a, "--detections", d, "--confidence", "1.5"}).code, 1);
  EXPECT_EQ(invoke({"evaluate", "--annotations", a, "--detections", path("missing.csv")}).code, 1);
}

TEST_F(CliTest, SynthIsDeterministic) {
  const std::vector<std::string> args{"synth", "--n", "200", "--miss", "0.1", "--spurious", "0.05", "--jitter", "0.2"};
  auto first = args, second = args;
  first.insert(first.end(), {"--o-prefix", path("one")});
  second.insert(second.end(), {"-o-prefix", path("two")});
  ASSERT_EQ(invoke(first).code, 0);
  ASSERT_EQ(invoke(second).code, 0);
  for (const char* suffix : {".annotations.csv", ".detections.csv", ".provenance.csv"}) {
    const auto a = slurp(path(std::string("one") + suffix));
    EXPECT_FALSE(a.empty());
    EXPECT_EQ(a, slurp(path(std::string("two") + suffix)));
  }

  // The generated files evaluate back to the intended counts.
  const auto r = invoke({"evaluate", "--annotations", path("one.annotations.csv"), "--detections",
                         path("one.detections.csv"), "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("field,value\ntp,180\nfp,10\nfn,20\n", 0), 0u);
}

TEST_F(CliTest, SynthWarnsOnLargeJitter) {
  const auto r = invoke({"synth", "--n", "20", "--jitter", "0.35", "--o-prefix", path("w")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("jitter"), std::string::npos);
}

TEST_F(CliTest, SweepEmitsFullGrid) {
  const auto a = write("a.csv", kAnnotations), d = write("d.csv", kDetections);
  const auto r = invoke({"sweep", "--annotations", a, "--detections", d, "--conf-list", "0.35:0.9:0.05", "--nms-list",
                         "0.05:0.5:0.05", "-o", path("grid.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto grid = slurp(path("grid.csv"));
  EXPECT_EQ(std::count(grid.begin(), grid.end(), '\n'), 121);
  EXPECT_NE(r.out.find("best"), std::string::npos);
}

TEST_F(CliTest, MergeTiledDetections) {
  const auto d = write("tiled.csv",
                       "image_id,x_min,y_min,x_max,y_max,label,confidence,tiling_id,tile_row,tile_col\n"
                       "img,480,480,500,500,Kent,0.9,0,0,0\n"
                       "img,0,480,20,500,Kent,0.9,0,0,1\n"
                       "img,480,0,500,20,Kent,0.9,0,1,0\n"
                       "img,0,0,20,20,Kent,0.9,0,1,1\n"
                       "img,230,230,270,270,Kent,0.9,3,1,1\n");
  const auto r = invoke({"merge", "--detections", d, "--image-size", "6000x4000"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "image_id,x_min,y_min,x_max,y_max,label,confidence\nimg,480,480,520,520,Kent,0.9\n");
  EXPECT_EQ(invoke({"merge", "--detections", d}).code, 2);
}

TEST_F(CliTest, TileInfo) {
  const auto r = invoke({"tile-info", "--image-size", "6000x4000"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("scheme_id,offset_x,offset_y,row,col,x_min,y_min,x_max,y_max\n", 0), 0u);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1 + 96 + 104 + 108 + 117);
}

TEST_F(CliTest, ConfusionTable) {
  const auto a = write("a.csv", kAnnotations), d = write("d.csv", kDetections);
  const auto r = invoke({"confusion", "--annotations", a, "--detections", d, "-o", path("cm.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto cm = slurp(path("cm.csv"));
  EXPECT_EQ(cm.rfind("expert,network,count,percent,percent_1dp\n", 0), 0u);
  EXPECT_NE(cm.find("Kent,Kent,1,100,100.0\n"), std::string::npos);
}

TEST_F(CliTest, VersionAndHelp) {
  const auto v = invoke({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, "tilescore 1.0.0 (report schema 1)\n");
  const auto h = invoke({"--help"});
  EXPECT_EQ(h.code, 0);
  EXPECT_NE(h.out.find("evaluate"), std::string::npos);
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
}

}  // namespace
}  // namespace tilescore
