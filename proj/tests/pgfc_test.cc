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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.h"
#include "pgfc_lab/model.h"
#include "pgfc_lab/msff.h"
#include "pgfc_lab/pgfc.h"
#include "pgfc_lab/png_io.h"
#include "pgfc_lab/pyramid.h"
#include "pgfc_lab/rng.h"
#include "pgfc_lab/synthetic_slide.h"

namespace pgfc_lab {
namespace {

// Regression pins for the key/ordinary contrast on the seeded model below.
// Without a probe the key token's received mass is not larger; only the
// final-position contrast is structural.
constexpr int kPinnedKeyIndex = 27;
constexpr int kPinnedOrdinaryIndex = 7;
constexpr double kPinnedKeyReceived = 0.018272503909583276;
constexpr double kPinnedOrdinaryReceived = 0.02820545590537436;

AttentionRecord ForwardRecord(int length, uint64_t seed) {
  auto dec = Decoder::Create(16, 2, 2, kMinVocab, 2, seed);
  Rng rng(seed);
  Tensor seq({length, 16});
  for (float& v : seq.values()) v = static_cast<float>(rng.Normal());
  return *dec->Forward(seq)->attention;
}

TEST(FinalTokenAttention, SingleImageSingleText) {
  const AttentionRecord rec = ForwardRecord(2, 1);
  const auto v = FinalTokenAttention(rec, 1, 1, 0);
  ASSERT_TRUE(v.ok());
  ASSERT_EQ(v->size(), 1u);
  EXPECT_DOUBLE_EQ((*v)[0], rec.Psi(0).at(1, 0));
}

TEST(FinalTokenAttention, RowDecomposition) {
  const int n = 12, m = 7;
  const AttentionRecord rec = ForwardRecord(n + m, 2);
  for (int layer = 0; layer < 2; ++layer) {
    const auto v = *FinalTokenAttention(rec, n, m, layer);
    double text = 0;
    for (int j = n; j < n + m; ++j) text += rec.Psi(layer).at(n + m - 1, j);
    for (double x : v) EXPECT_LE(x, 1.0);
    // Row = image slice + text columns (the final token is the last one).
    EXPECT_NEAR(std::accumulate(v.begin(), v.end(), 0.0) + text, 1.0, 1e-5);
  }
  EXPECT_FALSE(FinalTokenAttention(rec, n, m, 2).ok());
  EXPECT_FALSE(FinalTokenAttention(rec, n, m + 1, 0).ok());
}

TEST(ToGrid, LayoutAndFlatten) {
  const std::vector<double> v = {1, 2, 3, 4};
  auto g = ToGrid(v, {2, 2});
  ASSERT_TRUE(g.ok());
  EXPECT_EQ(g->at(0, 1), 2);
  EXPECT_EQ(g->at(1, 0), 3);
  EXPECT_EQ(Flatten(*g), v);
  EXPECT_EQ(g->tissue.Count(), 4);
  EXPECT_FALSE(ToGrid(v, {3, 2}).ok());
}

TEST(ToGrid, CellMatchesThumbnailCellAndFootprint) {
  // One dark block at cell (2, 5) of an 8x8 grid over a 512x512 slide.
  Image base(512, 512, 255);
  for (int y = 128; y < 192; ++y) {
    for (int x = 320; x < 384; ++x) {
      for (int ch = 0; ch < 3; ++ch) base.pixels[base.Offset(x, y) + ch] = 40;
    }
  }
  auto p = PyramidImage::FromBaseImage(base, 128, std::nullopt);
  ASSERT_TRUE(p.ok());
  const GridShape grid{8, 8};
  const Image thumb = *Thumbnail(*p, grid, 16);
  const BinaryGrid tissue = TissueMask(thumb, grid);
  ASSERT_EQ(tissue.Count(), 1);
  const int idx = 2 * 8 + 5;
  EXPECT_TRUE(tissue.at(idx));
  std::vector<double> v(64, 0.0);
  v[idx] = 1.0;
  auto g = *ToGrid(v, grid);
  EXPECT_EQ(g.at(2, 5), 1.0);
  EXPECT_EQ(*MapGridIndexToRegion(idx, grid, *p, 0), (Region{0, 320, 128, 64, 64}));
}

TEST(SelectTopS, Examples) {
  auto g = *ToGrid({0.1, 0.9, 0.3, 0.7}, {2, 2});
  EXPECT_EQ(SelectTopS(g, 2)->indices, (std::vector<int>{1, 3}));
  auto flat = *ToGrid({0.5, 0.5, 0.5, 0.5}, {2, 2});
  EXPECT_EQ(SelectTopS(flat, 2)->indices, (std::vector<int>{0, 1}));
  EXPECT_FALSE(SelectTopS(g, 0).ok());
  g.tissue.cells.assign(4, 0);
  EXPECT_FALSE(SelectTopS(g, 1).ok());
}

TEST(SelectTopS, MatchesOracleOnRandomGrids) {
  Rng rng(31);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> v(64);
    for (double& x : v) x = rng.Uniform();
    if (t % 3 == 0) {
      for (double& x : v) x = std::floor(x * 4) / 4;  // ties
    }
    auto g = *ToGrid(v, {8, 8});
    for (auto& c : g.tissue.cells) c = rng.Uniform() < 0.6;
    const auto sel = *SelectTopS(g, 8);
    EXPECT_EQ(sel.indices, oracle::TopS(v, g.tissue.cells, 8));
    for (int i : sel.indices) EXPECT_TRUE(g.tissue.at(i));
  }
}

TEST(RandomSelection, SingleCellAndDeterminism) {
  auto g = *ToGrid(std::vector<double>(16, 0.0), {4, 4});
  g.tissue.cells.assign(16, 0);
  g.tissue.cells[6] = 1;
  const auto one = *RandomSelection(g, 1, 9);
  EXPECT_EQ(one.indices, std::vector<int>{6});
  EXPECT_TRUE(RandomSelection(g, 3, 9)->truncated);
  auto full = *ToGrid(std::vector<double>(16, 0.0), {4, 4});
  EXPECT_EQ(RandomSelection(full, 5, 42)->indices, RandomSelection(full, 5, 42)->indices);
}

TEST(RandomSelection, UniformInclusion) {
  auto g = *ToGrid(std::vector<double>(64, 0.0), {8, 8});
  std::vector<int> hits(64, 0);
  const int draws = 10000, s = 8;
  for (int d = 0; d < draws; ++d) {
    const SelectionResult sel = *RandomSelection(g, s, DeriveSeed(123, d));
    for (int i : sel.indices) ++hits[i];
  }
  const double p = static_cast<double>(s) / 64;
  const double mean = draws * p, sigma = std::sqrt(draws * p * (1 - p));
  for (int i = 0; i < 64; ++i) EXPECT_LE(std::abs(hits[i] - mean), 3 * sigma) << "cell " << i;
}

TEST(PositionalText, RowMajor) {
  EXPECT_EQ(PositionalText(9, {8, 8}), "Patch at row 1, column 1 of the slide.");
  EXPECT_EQ(PositionalText(63, {8, 8}), "Patch at row 7, column 7 of the slide.");
}

class SlideFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SlideSpec spec;
    spec.width = 1024;
    spec.height = 1024;
    spec.seed = 5;
    slide_ = new SyntheticSlide(*CreateSyntheticWsi(spec));
    ModelConfig cfg;
    cfg.seed = 7;
    model_ = new Model(*Model::Create(cfg));
  }
  static void TearDownTestSuite() {
    delete slide_;
    delete model_;
  }
  static SyntheticSlide* slide_;
  static Model* model_;
};
SyntheticSlide* SlideFixture::slide_ = nullptr;
Model* SlideFixture::model_ = nullptr;

TEST_F(SlideFixture, FetchAndEncodeTokenCounts) {
  auto enc = MultiScaleEncoder::FromModel(*model_, {1, 2}, false, 3);
  ASSERT_TRUE(enc.ok());
  auto g = *ToGrid(std::vector<double>(64, 0.0), {8, 8});
  for (int pool : {1, 2, 4}) {
    SelectionResult sel = *SelectTopS(g, 3);
    auto details = FetchAndEncode(sel, slide_->pyramid, {8, 8}, *enc, model_->text(), pool);
    ASSERT_TRUE(details.ok()) << details.status();
    ASSERT_EQ(details->size(), 3u);
    EXPECT_EQ(sel.regions.size(), 3u);
    for (const PatchDetail& d : *details) {
      EXPECT_EQ(d.image_tokens.dim(0), 64 / (pool * pool));
      EXPECT_EQ(d.text, PositionalText(d.index, {8, 8}));
      EXPECT_EQ(d.text_tokens.dim(0), static_cast<int>(d.text.size()) + 2);
    }
  }
  SelectionResult sel = *SelectTopS(g, 1);
  EXPECT_FALSE(FetchAndEncode(sel, slide_->pyramid, {8, 8}, *enc, model_->text(), 3).ok());
}

TEST_F(SlideFixture, ModeNoneReusesFirstPass) {
  PgfcOptions o;
  o.mode = SelectionMode::kNone;
  o.max_tokens = 3;
  auto r = PgfcInfer(*model_, slide_->pyramid, "Is there a tumor?", o);
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_EQ(r->answer, r->first_answer);
  EXPECT_TRUE(r->selection.indices.empty());
  EXPECT_EQ(r->second_length, r->first_length);
  EXPECT_EQ(r->detail_image_tokens + r->detail_text_tokens, 0);
}

TEST_F(SlideFixture, SecondPassLengthArithmetic) {
  for (SelectionMode mode : {SelectionMode::kPgfc, SelectionMode::kRandom}) {
    PgfcOptions o;
    o.mode = mode;
    o.s = 4;
    o.max_tokens = 2;
    auto r = PgfcInfer(*model_, slide_->pyramid, "Where is the tumor?", o);
    ASSERT_TRUE(r.ok()) << r.status();
    EXPECT_EQ(r->selection.indices.size(), 4u);
    EXPECT_EQ(r->detail_image_tokens, 4 * 16);
    EXPECT_EQ(r->second_length,
              r->first_length + r->detail_image_tokens + r->detail_text_tokens);
    // 64 image tokens + [BOS, bytes, EOS].
    EXPECT_EQ(r->first_length, 64 + 19 + 2);
  }
}

TEST_F(SlideFixture, RunnerIsDeterministic) {
  auto runner = PgfcRunner::Create(*model_, PgfcOptions{});
  ASSERT_TRUE(runner.ok());
  auto a = runner->Run(slide_->pyramid, "Grade?");
  auto b = runner->Run(slide_->pyramid, "Grade?");
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_EQ(a->answer, b->answer);
  EXPECT_EQ(a->selection.indices, b->selection.indices);
  EXPECT_EQ(a->grid.values, b->grid.values);
}

TEST_F(SlideFixture, KeyOrdinaryContrast) {
  auto runner = *PgfcRunner::Create(*model_, PgfcOptions{});
  auto first = runner.RunFirstPass(slide_->pyramid, "What subtype is this tumor?");
  ASSERT_TRUE(first.ok());
  const AttentionRecord& rec = *first->result.attention;
  const int n = 64, m = first->e_t.dim(0);

  const auto r0 = *KeyOrdinaryRows(rec, n, 0);
  EXPECT_NEAR(r0[0], 1.0, 1e-6);
  for (int j = 1; j < n; ++j) EXPECT_EQ(r0[j], 0.0);
  for (int t : {5, 40, n - 1}) {
    const auto row = *KeyOrdinaryRows(rec, n, t);
    EXPECT_LE(std::accumulate(row.begin(), row.end(), 0.0), 1.0 + 1e-6);
  }

  EXPECT_FALSE(KeyOrdinaryRows(rec, n, n).ok());  // text tokens are not candidates

  const KeyTokenContrast c = *ContrastKeyToken(rec, n, m);
  EXPECT_GT(c.key_final, c.ordinary_final);
  EXPECT_EQ(c.key_index, kPinnedKeyIndex);
  EXPECT_EQ(c.ordinary_index, kPinnedOrdinaryIndex);
  EXPECT_NEAR(c.key_received, kPinnedKeyReceived, 1e-6);
  EXPECT_NEAR(c.ordinary_received, kPinnedOrdinaryReceived, 1e-6);
  const auto received = *ReceivedAttention(rec, n);
  EXPECT_NEAR(received[c.key_index], c.key_received, 1e-12);
}

TEST(Heatmap, UniformGridGivesMidColour) {
  const Image thumb(32, 32, 100);
  const Image out = *AttentionHeatmap(*ToGrid(std::vector<double>(16, 0.3), {4, 4}), thumb);
  ASSERT_EQ(out.width, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const uint8_t* px = &out.pixels[out.Offset(x, y)];
      EXPECT_EQ(px[0], out.pixels[0]);
      EXPECT_EQ(px[0], px[2]);  // red and blue balanced at the midpoint
      EXPECT_EQ(px[1], out.pixels[1]);
    }
  }
}

TEST(Heatmap, DeterministicAndReddestAtArgmax) {
  Rng rng(17);
  std::vector<double> v(64);
  for (double& x : v) x = rng.Uniform();
  const int argmax = static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
  const AttentionGrid g = *ToGrid(v, {8, 8});
  // Odd cell size: one pixel centre sits exactly on each cell centre.
  const Image thumb(120, 120, 180);
  const Image a = *AttentionHeatmap(g, thumb);
  EXPECT_EQ(*EncodePng(a), *EncodePng(*AttentionHeatmap(g, thumb)));
  int best = -1, best_red = -1;
  for (int y = 0; y < 120; ++y) {
    for (int x = 0; x < 120; ++x) {
      const uint8_t* px = &a.pixels[a.Offset(x, y)];
      const int red = px[0] - px[2];
      if (red > best_red) {
        best_red = red;
        best = (y / 15) * 8 + x / 15;
      }
    }
  }
  EXPECT_EQ(best, argmax);
}

}  // namespace
}  // namespace pgfc_lab
