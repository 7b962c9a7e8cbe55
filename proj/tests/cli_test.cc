// Copyright 2026 The pgfc-lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli.h"
#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "json.hpp"
#include "pgfc_lab/png_io.h"

namespace pgfc_lab::cli {
namespace {

namespace fs = std::filesystem;
using ::testing::HasSubstr;
using json = nlohmann::json;

struct CliRun {
  int rc;
  std::string out;
  std::string err;
};

CliRun Cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int rc = RunCli(args, out, err);
  return {rc, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new fs::path(fs::temp_directory_path() / "cli_test");
    fs::remove_all(*dir_);
    fs::create_directories(*dir_);
    const CliRun r = Cli({"gen-wsi", "--out", Path("slide_a"), "--seed", "4", "--width", "1024",
                       "--height", "1024", "--lesions", "2", "--tile", "256"});
    ASSERT_EQ(r.rc, kExitOk) << r.err;
  }
  static void TearDownTestSuite() {
    fs::remove_all(*dir_);
    delete dir_;
  }
  static std::string Path(const std::string& name) { return (*dir_ / name).string(); }
  static void Write(const std::string& name, const std::string& text) {
    std::ofstream(*dir_ / name) << text;
  }

  static fs::path* dir_;
};
fs::path* CliTest::dir_ = nullptr;

TEST_F(CliTest, GenWsiReport) {
  const CliRun r = Cli({"gen-wsi", "--out", Path("slide_b"), "--seed", "5", "--width", "1024",
                     "--height", "768", "--lesions", "1", "--tile", "128"});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["kind"], "gen-wsi");
  EXPECT_EQ(j["width"], 1024);
  EXPECT_EQ(j["height"], 768);
  EXPECT_EQ(j["lesions"], 1);
  EXPECT_TRUE(fs::exists(Path("slide_b") + "/manifest.json"));
  EXPECT_TRUE(fs::exists(Path("slide_b") + "/ground_truth.json"));
}

TEST_F(CliTest, InferNoneHasNoDetail) {
  const CliRun r = Cli({"infer", "--slide", Path("slide_a"), "--prompt", "Where is the tumor?",
                     "--mode", "none", "--seed", "1"});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["mode"], "none");
  EXPECT_EQ(j["detail_image_tokens"], 0);
  EXPECT_EQ(j["detail_text_tokens"], 0);
  EXPECT_TRUE(j["selected"].empty());
}

TEST_F(CliTest, InferPgfcSelectsAndWritesHeatmap) {
  const std::string png = Path("heat.png");
  const CliRun r = Cli({"infer", "--slide", Path("slide_a"), "--prompt", "Where is the tumor?",
                     "--mode", "pgfc", "--s", "4", "--seed", "1", "--heatmap", png});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["selected"].size(), 4u);
  EXPECT_EQ(j["regions"].size(), 4u);
  EXPECT_GT(j["detail_image_tokens"].get<int>(), 0);
  EXPECT_GT(j["second_pass_length"].get<int>(), j["first_pass_length"].get<int>());
  ASSERT_TRUE(ReadPng(png).ok());
  // Same invocation, same answer.
  EXPECT_EQ(Cli({"infer", "--slide", Path("slide_a"), "--prompt", "Where is the tumor?",
                 "--mode", "pgfc", "--s", "4", "--seed", "1"})
                .out,
            Cli({"infer", "--slide", Path("slide_a"), "--prompt", "Where is the tumor?",
                 "--mode", "pgfc", "--s", "4", "--seed", "1"})
                .out);
}

TEST_F(CliTest, InitModelThenInferWithIt) {
  const std::string ckpt = Path("model.ckpt");
  CliRun r = Cli({"init-model", "--out", ckpt, "--seed", "9"});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  r = Cli({"infer", "--slide", Path("slide_a"), "--prompt", "x", "--mode", "random",
           "--model", ckpt, "--s", "2"});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  EXPECT_EQ(json::parse(r.out)["selected"].size(), 2u);
}

TEST_F(CliTest, HeatmapCommand) {
  const CliRun r = Cli({"heatmap", "--slide", Path("slide_a"), "--prompt", "tumor?", "--out",
                     Path("h.png")});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["kind"], "heatmap");
  EXPECT_TRUE(j.contains("key_token"));
  EXPECT_TRUE(fs::exists(Path("h.png")));
}

TEST_F(CliTest, UsageErrors) {
  CliRun r = Cli({"infer", "--slide", Path("slide_a"), "--prompt", "x", "--bogus", "1"});
  EXPECT_EQ(r.rc, kExitUsage);
  EXPECT_THAT(r.err, HasSubstr("--bogus"));
  EXPECT_THAT(r.err, HasSubstr("Usage"));
  EXPECT_EQ(Cli({"frobnicate"}).rc, kExitUsage);
  EXPECT_EQ(Cli({}).rc, kExitUsage);
  EXPECT_EQ(Cli({"infer", "--slide", Path("slide_a"), "--mode", "sideways"}).rc, kExitUsage);
  r = Cli({"--help"});
  EXPECT_EQ(r.rc, kExitOk);
  EXPECT_THAT(r.out, HasSubstr("ablate"));
}

TEST_F(CliTest, RuntimeErrors) {
  CliRun r = Cli({"infer", "--slide", Path("nowhere"), "--prompt", "x"});
  EXPECT_EQ(r.rc, kExitRuntime);
  EXPECT_THAT(r.err, HasSubstr("pgfc-lab:"));
  r = Cli({"gen-wsi", "--out", Path("tiny"), "--width", "100", "--height", "100"});
  EXPECT_EQ(r.rc, kExitRuntime);
}

TEST_F(CliTest, ScoreDetectionAndSegmentation) {
  Write("pred.txt", "<bbox_list><bbox>0.100, 0.100, 0.300, 0.300</bbox></bbox_list>");
  Write("gt.txt",
        "<bbox_list><bbox>0.100, 0.100, 0.300, 0.300</bbox>"
        "<bbox>0.600, 0.600, 0.800, 0.800</bbox></bbox_list>");
  CliRun r = Cli({"score", "--pred", Path("pred.txt"), "--gt", Path("gt.txt"), "--task", "det"});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  EXPECT_THAT(r.out, HasSubstr("matched=1\n"));
  EXPECT_THAT(r.out, HasSubstr("precision=1\n"));
  EXPECT_THAT(r.out, HasSubstr("recall=0.5\n"));

  Write("c.txt",
        "<contour_list><polygon>[0.100, 0.100], [0.500, 0.100], [0.500, 0.500], [0.100, 0.500]"
        "</polygon></contour_list>");
  r = Cli({"score", "--pred", Path("c.txt"), "--gt", Path("c.txt"), "--task", "seg"});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  EXPECT_THAT(r.out, HasSubstr("dice=1\n"));
  EXPECT_EQ(Cli({"score", "--pred", Path("c.txt"), "--gt", Path("c.txt"), "--task", "cls"}).rc,
            kExitUsage);
}

TEST_F(CliTest, ConvertRoundTrip) {
  Write("poly.txt",
        "<contour_list><polygon>[0.250, 0.250], [0.750, 0.250], [0.750, 0.750], [0.250, 0.750]"
        "</polygon></contour_list>");
  CliRun r = Cli({"convert", "--from", "polygon", "--to", "mask", "--in", Path("poly.txt"), "--out",
               Path("m.png"), "--width", "64", "--height", "64"});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  r = Cli({"convert", "--from", "mask", "--to", "bbox", "--in", Path("m.png")});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  EXPECT_EQ(r.out, "<bbox_list><bbox>0.250, 0.250, 0.750, 0.750</bbox></bbox_list>\n");
  r = Cli({"convert", "--from", "polygon", "--to", "bbox", "--in", Path("poly.txt")});
  EXPECT_EQ(r.out, "<bbox_list><bbox>0.250, 0.250, 0.750, 0.750</bbox></bbox_list>\n");
  EXPECT_EQ(Cli({"convert", "--from", "bbox", "--to", "polygon", "--in", Path("poly.txt")}).rc,
            kExitRuntime);
}

TEST_F(CliTest, ForgeCorpus) {
  const std::string out = Path("corpus.jsonl");
  const CliRun r = Cli({"forge", "--slides", Path("slide_*"), "--n", "40", "--seed", "2", "--out",
                     out, "--organ", "liver"});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["total"], 40);
  EXPECT_EQ(j["organs"]["liver"], 40);
  std::ifstream in(out);
  int lines = 0;
  for (std::string line; std::getline(in, line);) {
    const json rec = json::parse(line);
    EXPECT_TRUE(rec["style"] == "open" || rec["style"] == "closed");
    ++lines;
  }
  EXPECT_EQ(lines, 40);
  EXPECT_EQ(Cli({"forge", "--slides", Path("slide_*"), "--tasks", "grade", "--out", out}).rc,
            kExitRuntime);
}

TEST_F(CliTest, AblateSmallRun) {
  const CliRun r = Cli({"ablate", "--trials", "2", "--probe-slides", "2", "--slide-px", "1024",
                     "--seed", "1"});
  ASSERT_EQ(r.rc, kExitOk) << r.err;
  const json j = json::parse(r.out);
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_THAT(r.out, HasSubstr("\"random\""));
}

}  // namespace
}  // namespace pgfc_lab::cli
