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

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "oracles.h"
#include "pgfc_lab/mask_codec.h"
#include "pgfc_lab/rng.h"

namespace pgfc_lab {
namespace {

// Regression pins, recorded from the first run of each fixture.
constexpr double kFirstLoss = 1.3669398650803348;
constexpr double kLastLoss = 0.46633159556748083;
constexpr double kWorstBlobDice = 0.98956158663883087;
constexpr double kMeanBlobDice = 0.99930777055795195;

MaskCodecConfig SmallConfig(uint64_t seed = 1) {
  MaskCodecConfig cfg;
  cfg.mask_side = 16;
  cfg.stride = 4;
  cfg.d_model = 8;
  cfg.seed = seed;
  return cfg;
}

Tensor RandomTensor(Rng& rng, int rows, int cols) {
  Tensor t({rows, cols});
  for (float& v : t.values()) v = static_cast<float>(rng.Normal());
  return t;
}

TEST(MaskCodecConfig, Validation) {
  MaskCodecConfig cfg = SmallConfig();
  EXPECT_TRUE(cfg.Validate().ok());
  cfg.stride = 5;  // does not divide 16
  EXPECT_FALSE(cfg.Validate().ok());
}

TEST(MaskEncoder, ZeroHeadGivesZeroEmbedding) {
  MaskCodecConfig cfg = SmallConfig();
  cfg.zero_heads = true;
  auto enc = MaskEncoder::Create(cfg);
  ASSERT_TRUE(enc.ok());
  const Tensor e = *enc->Encode(BinaryMask(16, 16));
  for (float v : e.values()) EXPECT_EQ(v, 0.0f);
}

TEST(MaskEncoder, DeterministicAndPixelSensitive) {
  auto enc = MaskEncoder::Create(SmallConfig());
  ASSERT_TRUE(enc.ok());
  Rng rng(3);
  BinaryMask m = oracle::RandomNoise(rng, 16, 16, 0.3);
  const Tensor a = *enc->Encode(m);
  EXPECT_EQ(a, *enc->Encode(m));
  m.set(5, 7, !m.at(5, 7));
  const Tensor b = *enc->Encode(m);
  double diff = 0;
  for (size_t i = 0; i < a.size(); ++i) diff += std::abs(a.values()[i] - b.values()[i]);
  EXPECT_GT(diff, 1e-4);
  EXPECT_FALSE(enc->Encode(BinaryMask(8, 16)).ok());
}

TEST(MaskDecode, ZeroInputsZeroHeadGiveZeroLogits) {
  MaskCodecConfig cfg = SmallConfig();
  cfg.zero_heads = true;
  auto w = MaskDecoderWeights::Init(cfg);
  ASSERT_TRUE(w.ok());
  auto z = MaskDecode(cfg, *w, Tensor({cfg.cells(), cfg.d_model}), Tensor({1, cfg.d_model}));
  ASSERT_TRUE(z.ok());
  EXPECT_EQ(z->height, 16);
  for (double v : z->values) EXPECT_EQ(v, 0.0);
}

TEST(MaskDecode, DeterministicAndSensitiveToTargetCells) {
  const MaskCodecConfig cfg = SmallConfig();
  auto w = MaskDecoderWeights::Init(cfg);
  ASSERT_TRUE(w.ok());
  Rng rng(5);
  Tensor ev = RandomTensor(rng, cfg.cells(), cfg.d_model);
  const Tensor tok = RandomTensor(rng, 1, cfg.d_model);
  const MaskLogits a = *MaskDecode(cfg, *w, ev, tok);
  EXPECT_EQ(a.values, MaskDecode(cfg, *w, ev, tok)->values);
  // Perturb the token of cell 5 (row 1, col 1): its own block must move.
  for (float& v : ev.row(5)) v += 1.0f;
  const MaskLogits b = *MaskDecode(cfg, *w, ev, tok);
  double delta = 0;
  for (int y = 4; y < 8; ++y) {
    for (int x = 4; x < 8; ++x) delta += std::abs(a.at(x, y) - b.at(x, y));
  }
  EXPECT_GT(delta, 1e-6);
  EXPECT_FALSE(MaskDecode(cfg, *w, Tensor({3, cfg.d_model}), tok).ok());
}

TEST(Losses, BceAtZeroLogitsIsLn2) {
  Rng rng(2);
  const BinaryMask t = oracle::RandomNoise(rng, 6, 6, 0.5);
  EXPECT_NEAR(*BceLoss(MaskLogits{6, 6, std::vector<double>(36, 0.0)}, t), std::log(2.0), 1e-12);
}

TEST(Losses, SaturatedDiceLossVanishes) {
  Rng rng(3);
  const BinaryMask t = oracle::RandomNoise(rng, 8, 8, 0.5);
  MaskLogits z{8, 8, {}};
  for (uint8_t c : t.cells) z.values.push_back(c ? 40.0 : -40.0);
  EXPECT_NEAR(*DiceLoss(z, t), 0.0, 1e-3);
  EXPECT_NEAR(*BceLoss(z, t), 0.0, 1e-12);
}

TEST(Losses, MatchScalarOracles) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const BinaryMask t = oracle::RandomNoise(rng, 4, 4, rng.Uniform());
    MaskLogits z{4, 4, std::vector<double>(16)};
    for (double& v : z.values) v = rng.Uniform(-8, 8);
    EXPECT_NEAR(*BceLoss(z, t), oracle::Bce(z.values, t.cells), 1e-9);
    EXPECT_NEAR(*DiceLoss(z, t), oracle::SoftDiceLoss(z.values, t.cells), 1e-12);
    std::vector<double> grad;
    const double combined = *CombinedLoss(z, t, {}, &grad);
    EXPECT_NEAR(combined,
                oracle::Bce(z.values, t.cells) + oracle::SoftDiceLoss(z.values, t.cells), 1e-9);
    for (size_t i = 0; i < 16; ++i) {
      MaskLogits up = z, down = z;
      up.values[i] += 1e-6;
      down.values[i] -= 1e-6;
      const double fd = (*CombinedLoss(up, t, {}) - *CombinedLoss(down, t, {})) / 2e-6;
      EXPECT_NEAR(grad[i], fd, 1e-6);
    }
  }
}

TEST(Losses, ExtremeLogitsStayFinite) {
  const BinaryMask t(2, 2);
  const MaskLogits z{2, 2, {1000.0, -1000.0, 700.0, -700.0}};
  EXPECT_TRUE(std::isfinite(*BceLoss(z, t)));
  EXPECT_FALSE(BceLoss(z, BinaryMask(2, 3)).ok());
}

class TrainingTest : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_ = SmallConfig(77);
    cfg_.d_model = 16;
    w_ = *MaskDecoderWeights::Init(cfg_);
    Rng rng(DeriveSeed(77, 7));
    ev_ = RandomTensor(rng, cfg_.cells(), cfg_.d_model);
    tok_ = RandomTensor(rng, 1, cfg_.d_model);
    target_ = oracle::RandomBlob(rng, 16, 40);
  }
  MaskCodecConfig cfg_;
  MaskDecoderWeights w_;
  Tensor ev_, tok_;
  BinaryMask target_;
};

TEST_F(TrainingTest, ZeroLearningRateLeavesWeightsUnchanged) {
  const MaskDecoderWeights before = w_;
  ASSERT_TRUE(TrainStep(cfg_, w_, ev_, tok_, target_, 0.0).ok());
  EXPECT_EQ(w_.wq, before.wq);
  EXPECT_EQ(w_.w_out, before.w_out);
  EXPECT_EQ(w_.cell_query, before.cell_query);
}

TEST_F(TrainingTest, FiftyStepsHalveTheLoss) {
  std::vector<double> losses;
  for (int i = 0; i < 50; ++i) losses.push_back(*TrainStep(cfg_, w_, ev_, tok_, target_, 2.0));
  EXPECT_NEAR(losses.front(), kFirstLoss, 1e-6);
  EXPECT_NEAR(losses.back(), kLastLoss, 1e-6);
  EXPECT_LE(losses.back(), 0.5 * losses.front());
  for (size_t i = 1; i < losses.size(); ++i) EXPECT_LT(losses[i], losses[i - 1]) << i;
}

TEST_F(TrainingTest, NonFiniteInputIsRejectedWithoutUpdate) {
  ev_.at(0, 0) = std::nanf("");
  const MaskDecoderWeights before = w_;
  EXPECT_FALSE(TrainStep(cfg_, w_, ev_, tok_, target_, 1.0).ok());
  EXPECT_EQ(w_.wq, before.wq);
}

TEST(MaskToPolygons, EmptyAndFullFrame) {
  EXPECT_TRUE(MaskToPolygons(BinaryMask(8, 8)).empty());
  BinaryMask full(8, 8);
  std::fill(full.cells.begin(), full.cells.end(), 1);
  const auto polys = MaskToPolygons(full);
  ASSERT_EQ(polys.size(), 1u);
  ASSERT_EQ(polys[0].vertices.size(), 4u);
  double minx = 1, maxx = 0, miny = 1, maxy = 0;
  for (const Point2& v : polys[0].vertices) {
    minx = std::min(minx, v.x);
    maxx = std::max(maxx, v.x);
    miny = std::min(miny, v.y);
    maxy = std::max(maxy, v.y);
  }
  EXPECT_EQ(minx, 0.0);
  EXPECT_EQ(miny, 0.0);
  EXPECT_EQ(maxx, 1.0);
  EXPECT_EQ(maxy, 1.0);
}

TEST(MaskToPolygons, StaircaseIsThinnedToLimit) {
  BinaryMask m(32, 32);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x <= y; ++x) m.set(x, y, 1);
  }
  const auto polys = MaskToPolygons(m, 10);
  ASSERT_EQ(polys.size(), 1u);
  EXPECT_LE(polys[0].vertices.size(), 10u);
  EXPECT_GE(polys[0].vertices.size(), 3u);
  EXPECT_GE(oracle::MaskDice(m, *PolygonToMask(polys, 32, 32)), 0.9);
}

TEST(MaskToPolygons, BlobRoundTripDice) {
  Rng rng(8);
  double worst = 1.0, total = 0.0;
  for (int t = 0; t < 200; ++t) {
    const BinaryMask m = oracle::RandomBlob(rng, 32, 100);
    const double d = oracle::MaskDice(m, *PolygonToMask(MaskToPolygons(m), 32, 32));
    worst = std::min(worst, d);
    total += d;
  }
  EXPECT_GE(worst, 0.9);
  EXPECT_NEAR(worst, kWorstBlobDice, 1e-4);
  EXPECT_NEAR(total / 200, kMeanBlobDice, 1e-4);
}

TEST(DecimatePolygon, KeepsCornersOfDenselySampledSquare) {
  std::vector<Point2> ring;
  for (int i = 0; i < 10; ++i) ring.push_back({i / 10.0, 0});
  for (int i = 0; i < 10; ++i) ring.push_back({1, i / 10.0});
  for (int i = 0; i < 10; ++i) ring.push_back({1 - i / 10.0, 1});
  for (int i = 0; i < 10; ++i) ring.push_back({0, 1 - i / 10.0});
  const auto out = DecimatePolygon(ring, 4);
  ASSERT_EQ(out.size(), 4u);
  for (const Point2& p : out) {
    EXPECT_TRUE((p.x == 0 || p.x == 1) && (p.y == 0 || p.y == 1)) << p.x << "," << p.y;
  }
  EXPECT_EQ(DecimatePolygon(ring, 100).size(), ring.size());
}

TEST(PolygonToMask, RectangleFill) {
  const Polygon rect{{{0.25, 0.25}, {0.75, 0.25}, {0.75, 0.5}, {0.25, 0.5}}};
  const BinaryMask m = *PolygonToMask({rect}, 8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      EXPECT_EQ(m.at(x, y), (x >= 2 && x < 6 && y >= 2 && y < 4) ? 1 : 0) << x << "," << y;
    }
  }
  EXPECT_FALSE(PolygonToMask({rect}, 0, 8).ok());
}

TEST(MaskToBBoxes, IsolatedPixelAndTwoBlobs) {
  BinaryMask one(10, 10);
  one.set(3, 6, 1);
  const auto b = MaskToBBoxes(one);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0], (BBox{0.3, 0.6, 0.4, 0.7}));

  BinaryMask two(10, 10);
  for (int y = 1; y < 3; ++y) {
    for (int x = 1; x < 4; ++x) two.set(x, y, 1);
  }
  for (int y = 6; y < 9; ++y) {
    for (int x = 5; x < 9; ++x) two.set(x, y, 1);
  }
  const auto boxes = MaskToBBoxes(two);
  ASSERT_EQ(boxes.size(), 2u);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      if (!two.at(x, y)) continue;
      bool covered = false;
      for (const BBox& bb : boxes) {
        covered |= (x + 0.5) / 10 > bb.x1 && (x + 0.5) / 10 < bb.x2 &&
                   (y + 0.5) / 10 > bb.y1 && (y + 0.5) / 10 < bb.y2;
      }
      EXPECT_TRUE(covered) << x << "," << y;
    }
  }
}

TEST(LabelComponents, DiagonalPixelsAreSeparate) {
  BinaryMask m(3, 3);
  m.set(0, 0, 1);
  m.set(1, 1, 1);
  m.set(2, 2, 1);
  EXPECT_EQ(LabelComponents(m).count, 3);
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    const BinaryMask r = oracle::RandomNoise(rng, 12, 12, 0.45);
    EXPECT_EQ(LabelComponents(r).count, oracle::FloodFillComponents(r));
  }
}

TEST(GrayConversion, RoundTrip) {
  Rng rng(13);
  const BinaryMask m = oracle::RandomNoise(rng, 9, 7, 0.5);
  EXPECT_EQ(GrayToMask(MaskToGray(m)), m);
}

}  // namespace
}  // namespace pgfc_lab
