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

// Acceptance harness: one PASS/FAIL line per criterion, exit status 0 only
// when every criterion passes. Each check also enforces its runtime budget.
//
//   acceptance            run all criteria
//   acceptance 3 7        run a subset

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "cli.h"
#include "oracles.h"
#include "pgfc_lab/ablation.h"
#include "pgfc_lab/mask_codec.h"
#include "pgfc_lab/model.h"
#include "pgfc_lab/msff.h"
#include "pgfc_lab/pgfc.h"
#include "pgfc_lab/pyramid.h"
#include "pgfc_lab/rng.h"
#include "pgfc_lab/wire_format.h"

namespace pgfc_lab {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome Fail(std::string why) { return {false, std::move(why)}; }

// ---------------------------------------------------------------- 1

Outcome AttentionContract() {
  double worst_row = 0.0, worst_mean = 0.0;
  int checked_rows = 0;
  for (int t = 0; t < 100; ++t) {
    Rng rng(DeriveSeed(1, t));
    ModelConfig cfg;
    cfg.seed = DeriveSeed(11, t);
    cfg.n_heads = (t % 2) ? 4 : 2;
    cfg.d_model = 8 * cfg.n_heads;
    cfg.n_layers_decoder = 1 + t % 3;
    auto dec = Decoder::Create(cfg.d_model, cfg.n_heads, cfg.n_layers_decoder,
                               cfg.vocab_size, 2, cfg.seed);
    if (!dec.ok()) return Fail(dec.status().ToString());
    const int L = 1 + static_cast<int>(rng.UniformInt(48));
    Tensor seq({L, cfg.d_model});
    for (float& v : seq.values()) v = static_cast<float>(rng.Normal());
    auto out = dec->Forward(seq);
    if (!out.ok() || !out->attention) return Fail("forward failed");
    for (const LayerAttention& layer : out->attention->layers) {
      for (int i = 0; i < L; ++i) {
        for (const Tensor& h : layer.heads) {
          double sum = 0.0;
          for (int j = 0; j < L; ++j) {
            if (j > i && h.at(i, j) != 0.0f) {
              return Fail(absl::StrFormat("trial %d: nonzero above diagonal (%d,%d)", t, i, j));
            }
            sum += h.at(i, j);
          }
          worst_row = std::max(worst_row, std::abs(sum - 1.0));
          ++checked_rows;
        }
        for (int j = 0; j < L; ++j) {
          double manual = 0.0;
          for (const Tensor& h : layer.heads) manual += h.at(i, j);
          manual /= static_cast<double>(layer.heads.size());
          worst_mean = std::max(worst_mean, std::abs(manual - layer.mean.at(i, j)));
          if (j > i && layer.mean.at(i, j) != 0.0f) return Fail("nonzero above diagonal in mean");
        }
      }
    }
  }
  const bool ok = worst_row <= 1e-5 && worst_mean <= 1e-6;
  return {ok, absl::StrFormat("%d rows, max |rowsum-1| = %.2e, max |mean-manual| = %.2e",
                              checked_rows, worst_row, worst_mean)};
}

// ---------------------------------------------------------------- 2

Outcome MsffTokenInvariance() {
  const std::vector<std::vector<int>> multiple_sets = {{1}, {1, 2}, {1, 2, 4}};
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    MsffConfig cfg;
    cfg.scales.multiples = multiple_sets[t % 3];
    const bool aux = (t / 3) % 2 == 1;
    cfg.primary.n_heads = 2;
    cfg.primary.d_model = 2 * (2 + static_cast<int>(rng.UniformInt(8)));
    cfg.primary.patch_px = 4 << rng.UniformInt(2);
    const int g = 2 + static_cast<int>(rng.UniformInt(3));
    cfg.primary.grid = {g, g};
    cfg.primary.seed = rng.NextU64();
    cfg.scales.base_px = g * cfg.primary.patch_px;
    if (aux) {
      VisionEncoderConfig a = cfg.primary;
      a.d_model = 2 * (1 + static_cast<int>(rng.UniformInt(8)));
      a.seed = rng.NextU64();
      cfg.aux = a;
    }
    cfg.d_model = 4 * (1 + static_cast<int>(rng.UniformInt(6)));
    cfg.seed = rng.NextU64();
    auto enc = MultiScaleEncoder::Create(cfg);
    if (!enc.ok()) return Fail(enc.status().ToString());
    std::vector<Image> views;
    for (int m : cfg.scales.multiples) {
      Image img(m * cfg.scales.base_px, m * cfg.scales.base_px);
      for (auto& px : img.pixels) px = static_cast<uint8_t>(rng.UniformInt(256));
      views.push_back(std::move(img));
    }
    auto fused = enc->Fuse(views);
    if (!fused.ok()) return Fail(fused.status().ToString());
    const int N = g * g;
    const int K = static_cast<int>(cfg.scales.multiples.size());
    const int want = cfg.primary.d_model * K + (aux ? cfg.aux->d_model : 0);
    if (fused->tokens.dim(0) != N || fused->pre_projection.dim(0) != N) {
      return Fail(absl::StrFormat("config %d: token count %d, expected %d", t,
                                  fused->tokens.dim(0), N));
    }
    if (fused->pre_projection.dim(1) != want || enc->pre_projection_width() != want) {
      return Fail(absl::StrFormat("config %d: width %d, expected %d", t,
                                  fused->pre_projection.dim(1), want));
    }
    if (fused->tokens.dim(1) != cfg.d_model) return Fail("projected width mismatch");
  }
  return {true, "50 configs: N preserved, width = C*K + C_aux"};
}

// ---------------------------------------------------------------- 3

Outcome SelectionOracle() {
  Rng rng(3);
  int ties = 0, truncated = 0;
  for (int t = 0; t < 1000; ++t) {
    const int rows = 1 + static_cast<int>(rng.UniformInt(12));
    const int cols = 1 + static_cast<int>(rng.UniformInt(12));
    const int n = rows * cols;
    // Coarse levels force many exact ties.
    const int levels = 1 + static_cast<int>(rng.UniformInt(t % 4 == 0 ? 3 : 1000));
    std::vector<double> values(n);
    for (double& v : values) v = static_cast<double>(rng.UniformInt(levels)) / levels;
    std::vector<uint8_t> tissue(n);
    for (auto& c : tissue) c = rng.Uniform() < 0.7;
    tissue[rng.UniformInt(n)] = 1;
    const int s = 1 + static_cast<int>(rng.UniformInt(n + 3));
    auto grid = ToGrid(values, {rows, cols});
    if (!grid.ok()) return Fail(grid.status().ToString());
    grid->tissue.cells = tissue;
    auto sel = SelectTopS(*grid, s);
    if (!sel.ok()) return Fail(sel.status().ToString());
    const std::vector<int> want = oracle::TopS(values, tissue, s);
    if (sel->indices != want) return Fail(absl::StrFormat("instance %d differs from oracle", t));
    for (int i : sel->indices) {
      if (!tissue[i]) return Fail(absl::StrFormat("instance %d selected background", t));
    }
    if (sel->truncated != (static_cast<int>(want.size()) < s)) return Fail("truncation flag");
    std::set<double> distinct(values.begin(), values.end());
    ties += distinct.size() < values.size();
    truncated += sel->truncated;
  }
  return {true, absl::StrFormat("1000 instances match (%d with ties, %d truncated)", ties,
                                truncated)};
}

// ---------------------------------------------------------------- 4

Outcome AblationOrdering() {
  AblationOptions o;
  o.seed = 3;
  o.trials = 100;
  o.pgfc.seed = 3;
  o.pgfc.max_tokens = 2;
  ModelConfig cfg;
  cfg.seed = 3;
  auto model = Model::Create(cfg);
  if (!model.ok()) return Fail(model.status().ToString());
  auto report = RunAblation(*model, o);
  if (!report.ok()) return Fail(report.status().ToString());
  const double pgfc = report->Recall(SelectionMode::kPgfc);
  const double random = report->Recall(SelectionMode::kRandom);
  const double none = report->Recall(SelectionMode::kNone);
  int scored = 0;
  for (const SlideOutcome& s : report->slides) {
    const int none_arm = static_cast<int>(SelectionMode::kNone);
    if (s.selected[none_arm] != 0 || s.second_length[none_arm] != s.first_length) {
      return Fail("none arm supplied detail tokens");
    }
    scored += s.lesion_cells > 0;
  }
  const bool ok = scored >= 100 && pgfc - random >= 0.15 && none == 0.0;
  return {ok, absl::StrFormat("%d slides: recall pgfc %.3f, random %.3f, none %.3f", scored,
                              pgfc, random, none)};
}

// ---------------------------------------------------------------- 5

BBox RandomBox(Rng& rng) {
  double a = Quantize3(rng.Uniform()), b = Quantize3(rng.Uniform());
  double c = Quantize3(rng.Uniform()), d = Quantize3(rng.Uniform());
  return {std::min(a, b), std::min(c, d), std::max(a, b), std::max(c, d)};
}

std::string Mutate(std::string s, Rng& rng) {
  static const std::string kAlphabet = "<>/[],. \n\t0123456789-e+\"=abcdilnoprstx";
  const int edits = 1 + static_cast<int>(rng.UniformInt(4));
  for (int e = 0; e < edits; ++e) {
    const size_t pos = s.empty() ? 0 : rng.UniformInt(s.size() + 1);
    switch (rng.UniformInt(5)) {
      case 0:
        if (pos < s.size()) s[pos] = kAlphabet[rng.UniformInt(kAlphabet.size())];
        break;
      case 1:
        s.insert(pos, 1, kAlphabet[rng.UniformInt(kAlphabet.size())]);
        break;
      case 2:
        if (pos < s.size()) s.erase(pos, 1 + rng.UniformInt(8));
        break;
      case 3:
        s.resize(pos);
        break;
      default:
        s.insert(pos, 1, static_cast<char>(rng.UniformInt(256)));
    }
  }
  return s;
}

Outcome WireFormatFidelity() {
  struct Golden {
    std::string got, want;
  };
  std::vector<Golden> goldens;
  auto add = [&](absl::StatusOr<std::string> got, std::string want) {
    goldens.push_back({got.ok() ? *got : "<error>", std::move(want)});
  };
  add(SerializeBboxList(std::vector<BBox>{}), "<bbox_list></bbox_list>");
  add(SerializeBboxList(std::vector<BBox>{{0.1, 0.5, 0.25, 0.75}}),
      "<bbox_list><bbox>0.100, 0.500, 0.250, 0.750</bbox></bbox_list>");
  add(SerializeContourList(std::vector<Polygon>{{{{0, 0}, {1, 0}, {0, 1}}}}),
      "<contour_list><polygon>[0.000, 0.000], [1.000, 0.000], [0.000, 1.000]</polygon>"
      "</contour_list>");
  add(SerializeContourList(std::vector<Polygon>{}), "<contour_list></contour_list>");
  add(SerializeDetectionResult(DetectionSet{{{"tumor", {{0.1, 0.2, 0.3, 0.4}}}}}),
      "<detection_result>\n"
      "  <bbox_list class=\"tumor\">\n"
      "    <bbox>0.100, 0.200, 0.300, 0.400</bbox>\n"
      "  </bbox_list>\n"
      "</detection_result>");
  add(SerializeDetectionResult(DetectionSet{}), "<detection_result></detection_result>");
  for (size_t i = 0; i < goldens.size(); ++i) {
    if (goldens[i].got != goldens[i].want) {
      return Fail(absl::StrCat("golden ", i, " mismatch: ", goldens[i].got));
    }
  }

  Rng rng(5);
  std::vector<std::string> corpus;
  for (int t = 0; t < 1000; ++t) {
    std::vector<BBox> boxes(rng.UniformInt(6));
    for (BBox& b : boxes) b = RandomBox(rng);
    auto text = SerializeBboxList(boxes);
    if (!text.ok()) return Fail(text.status().ToString());
    auto back = ParseBboxList(*text);
    if (!back.ok() || *back != boxes) return Fail(absl::StrCat("bbox round trip ", t));
    corpus.push_back(*text);
  }
  for (int t = 0; t < 1000; ++t) {
    std::vector<Polygon> polys(rng.UniformInt(4));
    for (Polygon& p : polys) {
      p.vertices.resize(3 + rng.UniformInt(48));
      for (Point2& v : p.vertices) v = {Quantize3(rng.Uniform()), Quantize3(rng.Uniform())};
    }
    auto text = SerializeContourList(polys);
    if (!text.ok()) return Fail(text.status().ToString());
    auto back = ParseContourList(*text);
    if (!back.ok() || *back != polys) return Fail(absl::StrCat("contour round trip ", t));
    corpus.push_back(*text);
  }
  for (int t = 0; t < 1000; ++t) {
    DetectionSet set;
    const int groups = static_cast<int>(rng.UniformInt(4));
    for (int g = 0; g < groups; ++g) {
      DetectionGroup grp;
      grp.label = absl::StrCat("class ", g, "-", rng.UniformInt(100));
      grp.boxes.resize(rng.UniformInt(4));
      for (BBox& b : grp.boxes) b = RandomBox(rng);
      set.groups.push_back(std::move(grp));
    }
    auto text = SerializeDetectionResult(set);
    if (!text.ok()) return Fail(text.status().ToString());
    auto back = ParseDetectionResult(*text);
    if (!back.ok() || *back != set) return Fail(absl::StrCat("classed round trip ", t));
    corpus.push_back(*text);
  }

  int rejected = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::string input = Mutate(corpus[rng.UniformInt(corpus.size())], rng);
    try {
      const bool a = ParseBboxList(input).ok();
      const bool b = ParseContourList(input).ok();
      const bool c = ParseDetectionResult(input).ok();
      const bool d = ParseDetections(input).ok();
      rejected += !(a || b || c || d);
    } catch (const std::exception& e) {
      return Fail(absl::StrCat("parser threw on fuzz case ", t, ": ", e.what()));
    }
  }
  return {true, absl::StrFormat("%zu goldens, 3x1000 round trips, 10000 fuzz cases (%d rejected)",
                                goldens.size(), rejected)};
}

// ---------------------------------------------------------------- 6

Outcome MetricOracles() {
  Rng rng(6);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const int h = 1 + static_cast<int>(rng.UniformInt(8));
    const int w = 1 + static_cast<int>(rng.UniformInt(8));
    const BinaryMask a = oracle::RandomNoise(rng, h, w, rng.Uniform());
    const BinaryMask b = oracle::RandomNoise(rng, h, w, rng.Uniform());
    auto dice = Dice(a, b);
    auto iou = MaskIou(a, b);
    if (!dice.ok() || !iou.ok()) return Fail("metric error");
    worst = std::max(worst, std::abs(*dice - oracle::MaskDice(a, b)));
    worst = std::max(worst, std::abs(*iou - oracle::MaskIou(a, b)));
    const BBox ba = RandomBox(rng), bb = RandomBox(rng);
    worst = std::max(worst, std::abs(Iou(ba, bb) - oracle::BoxIou(ba, bb)));

    MaskLogits z{h, w, std::vector<double>(size_t(h) * w)};
    for (double& v : z.values) v = rng.Uniform(-6.0, 6.0);
    auto bce = BceLoss(z, a);
    auto dl = DiceLoss(z, a);
    if (!bce.ok() || !dl.ok()) return Fail("loss error");
    worst = std::max(worst, std::abs(*bce - oracle::Bce(z.values, a.cells)));
    worst = std::max(worst, std::abs(*dl - oracle::SoftDiceLoss(z.values, a.cells)));
  }
  Rng zr(60);
  const BinaryMask target = oracle::RandomNoise(zr, 5, 7, 0.5);
  auto bce0 = BceLoss(MaskLogits{5, 7, std::vector<double>(35, 0.0)}, target);
  if (!bce0.ok() || std::abs(*bce0 - std::log(2.0)) > 1e-6) return Fail("bce(0) != ln 2");

  DetectionSet gt{{{std::nullopt, {{0.1, 0.1, 0.4, 0.5}, {0.5, 0.5, 0.9, 0.8}}},
                   }};
  DetectionSet classed{{{"tumor", {{0.1, 0.1, 0.2, 0.2}}},
                        {"lymphocyte", {{0.3, 0.3, 0.5, 0.6}, {0.6, 0.1, 0.7, 0.2}}}}};
  for (const DetectionSet* s : {&gt, &classed}) {
    const DetectionScore score = MatchAndScore(*s, *s);
    if (score.f1 != 1.0 || score.mean_matched_iou != 1.0) return Fail("F1 != 1 on pred = gt");
  }
  return {worst <= 1e-6,
          absl::StrFormat("500 instances, max deviation %.2e; bce(0) = ln 2; F1(gt, gt) = 1",
                          worst)};
}

// ---------------------------------------------------------------- 7

struct ToyInstance {
  MaskCodecConfig cfg;
  MaskDecoderWeights w;
  Tensor e_v, token;
  BinaryMask target;
};

absl::StatusOr<ToyInstance> MakeToy(uint64_t seed, int side, int stride, int d,
                                    bool blob = false) {
  ToyInstance t;
  t.cfg.mask_side = side;
  t.cfg.stride = stride;
  t.cfg.d_model = d;
  t.cfg.seed = seed;
  auto w = MaskDecoderWeights::Init(t.cfg);
  if (!w.ok()) return w.status();
  t.w = *std::move(w);
  Rng rng(DeriveSeed(seed, 7));
  t.e_v = Tensor({t.cfg.cells(), d});
  for (float& v : t.e_v.values()) v = static_cast<float>(rng.Normal());
  t.token = Tensor({1, d});
  for (float& v : t.token.values()) v = static_cast<float>(rng.Normal());
  t.target = blob ? oracle::RandomBlob(rng, side, side * side * 5 / 32)
                   : oracle::RandomNoise(rng, side, side, 0.4);
  return t;
}

constexpr double kToyLearningRate = 2.0;

Outcome GradientCheck() {
  const LossWeights lw;
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    auto toy = MakeToy(DeriveSeed(7, t), 4, 2, 4);
    if (!toy.ok()) return Fail(toy.status().ToString());
    // Larger weights than the default init keep the gradient well above
    // finite-difference noise.
    Rng rng(DeriveSeed(70, t));
    for (double* p : toy->w.Parameters()) *p = rng.Normal() * 0.5;
    MaskDecoderGrads g;
    auto loss = MaskLossAndGrads(toy->cfg, toy->w, toy->e_v, toy->token, toy->target, lw, &g);
    if (!loss.ok()) return Fail(loss.status().ToString());
    std::vector<double*> params = toy->w.Parameters();
    std::vector<double*> grads = g.Parameters();
    double diff2 = 0.0, norm_a = 0.0, norm_n = 0.0;
    const double h = 1e-5;
    for (size_t i = 0; i < params.size(); ++i) {
      const double keep = *params[i];
      *params[i] = keep + h;
      auto up = MaskLossAndGrads(toy->cfg, toy->w, toy->e_v, toy->token, toy->target, lw,
                                 nullptr);
      *params[i] = keep - h;
      auto down = MaskLossAndGrads(toy->cfg, toy->w, toy->e_v, toy->token, toy->target, lw,
                                   nullptr);
      *params[i] = keep;
      if (!up.ok() || !down.ok()) return Fail("loss evaluation failed");
      const double numeric = (*up - *down) / (2 * h);
      diff2 += (numeric - *grads[i]) * (numeric - *grads[i]);
      norm_a += *grads[i] * *grads[i];
      norm_n += numeric * numeric;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(norm_a), std::sqrt(norm_n), 1e-12});
    worst = std::max(worst, rel);
  }
  if (worst > 1e-2) return Fail(absl::StrFormat("gradient relative error %.2e", worst));

  auto toy = MakeToy(77, 16, 4, 16, /*blob=*/true);
  if (!toy.ok()) return Fail(toy.status().ToString());
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 50; ++step) {
    auto loss = TrainStep(toy->cfg, toy->w, toy->e_v, toy->token, toy->target, kToyLearningRate);
    if (!loss.ok()) return Fail(loss.status().ToString());
    if (step == 0) first = *loss;
  }
  auto final_loss = MaskLossAndGrads(toy->cfg, toy->w, toy->e_v, toy->token, toy->target, lw,
                                     nullptr);
  if (!final_loss.ok()) return Fail("final loss");
  last = *final_loss;
  const double drop = 1.0 - last / first;
  return {drop >= 0.5, absl::StrFormat("max grad rel err %.2e over 20 instances; 50 steps: "
                                       "%.4f -> %.4f (%.0f%% drop)",
                                       worst, first, last, 100 * drop)};
}

// ---------------------------------------------------------------- 8

Outcome GeometryRoundTrips() {
  Rng rng(8);
  double min_dice = 1.0;
  int masks = 0;
  for (int t = 0; t < 200; ++t) {
    const BinaryMask m = oracle::RandomBlob(rng, 32, 100);
    const auto polys = MaskToPolygons(m, 50);
    auto back = PolygonToMask(polys, 32, 32);
    if (!back.ok()) return Fail(back.status().ToString());
    min_dice = std::min(min_dice, oracle::MaskDice(m, *back));
    if (static_cast<int>(MaskToBBoxes(m).size()) != oracle::FloodFillComponents(m)) {
      return Fail(absl::StrCat("bbox count mismatch on blob ", t));
    }
    ++masks;
  }
  for (int t = 0; t < 300; ++t) {
    const BinaryMask m = oracle::RandomNoise(rng, 1 + rng.UniformInt(24),
                                             1 + rng.UniformInt(24), rng.Uniform());
    if (static_cast<int>(MaskToBBoxes(m).size()) != oracle::FloodFillComponents(m)) {
      return Fail(absl::StrCat("bbox count mismatch on noise mask ", t));
    }
    ++masks;
  }
  if (min_dice < 0.9) return Fail(absl::StrFormat("min round-trip dice %.4f", min_dice));

  // Deliberately awkward level sizes so cell edges do not divide evenly.
  auto pyr = PyramidImage::FromBaseImage(Image(1000, 700, 200), 128, std::nullopt);
  if (!pyr.ok()) return Fail(pyr.status().ToString());
  int grids = 0;
  for (int level : {0, pyr->level_count() - 1}) {
    const LevelDesc& desc = pyr->level_desc(level);
    std::vector<int> owner(size_t(desc.width) * desc.height);
    for (int rows = 1; rows <= 16; ++rows) {
      for (int cols = 1; cols <= 16; ++cols) {
        const GridShape grid{rows, cols};
        if (rows > desc.height || cols > desc.width) continue;
        std::fill(owner.begin(), owner.end(), -1);
        for (int i = 0; i < grid.size(); ++i) {
          auto r = MapGridIndexToRegion(i, grid, *pyr, level);
          if (!r.ok()) return Fail(r.status().ToString());
          if (r->w <= 0 || r->h <= 0) return Fail("empty cell footprint");
          for (int y = r->y; y < r->y + r->h; ++y) {
            for (int x = r->x; x < r->x + r->w; ++x) {
              int& o = owner[size_t(y) * desc.width + x];
              if (o != -1) return Fail(absl::StrFormat("grid %dx%d overlap", rows, cols));
              o = i;
            }
          }
          if (GridIndexAt(r->x + r->w / 2.0, r->y + r->h / 2.0, grid, desc) != i) {
            return Fail(absl::StrFormat("grid %dx%d cell %d centre maps elsewhere", rows,
                                        cols, i));
          }
        }
        for (int y = 0; y < desc.height; ++y) {
          for (int x = 0; x < desc.width; ++x) {
            const int o = owner[size_t(y) * desc.width + x];
            if (o == -1) return Fail(absl::StrFormat("grid %dx%d leaves a gap", rows, cols));
            if (GridIndexAt(x, y, grid, desc) != o) {
              return Fail(absl::StrFormat("grid %dx%d pixel (%d,%d) inverse mismatch", rows,
                                          cols, x, y));
            }
          }
        }
        ++grids;
      }
    }
  }
  return {true, absl::StrFormat("min dice %.4f over 200 blobs; bbox counts match on %d masks; "
                                "%d grid bijections",
                                min_dice, masks, grids)};
}

// ---------------------------------------------------------------- 9

Outcome EndToEndDeterminism() {
  const fs::path dir = fs::temp_directory_path() / absl::StrCat("pgfc_accept_", ::getpid());
  fs::create_directories(dir);
  std::vector<std::string> reports;
  for (int run = 0; run < 2; ++run) {
    const fs::path report = dir / absl::StrCat("report", run, ".json");
    std::ostringstream out, err;
    const int rc = cli::RunCli({"ablate", "--trials", "100", "--seed", "3", "--report",
                                report.string()},
                               out, err);
    if (rc != 0) return Fail(absl::StrCat("ablate exit ", rc, ": ", err.str()));
    std::ifstream in(report, std::ios::binary);
    reports.emplace_back(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  fs::remove_all(dir);
  if (reports[0].empty()) return Fail("empty report");
  return {reports[0] == reports[1],
          absl::StrFormat("two runs, %zu-byte reports, identical = %s", reports[0].size(),
                          reports[0] == reports[1] ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  double budget_s;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace pgfc_lab

int main(int argc, char** argv) {
  using namespace pgfc_lab;
  const std::vector<Criterion> all = {
      {1, "attention contract", 60, AttentionContract},
      {2, "msff token invariance", 60, MsffTokenInvariance},
      {3, "selection oracle", 60, SelectionOracle},
      {4, "ablation ordering", 600, AblationOrdering},
      {5, "wire-format fidelity", 120, WireFormatFidelity},
      {6, "metric oracles", 60, MetricOracles},
      {7, "gradient check", 120, GradientCheck},
      {8, "geometry round trips", 120, GeometryRoundTrips},
      {9, "end-to-end determinism", 600, EndToEndDeterminism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const Criterion& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, absl::StrCat("exception: ", e.what())};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (o.pass && secs > c.budget_s) {
      o = {false, absl::StrFormat("%s; over budget (%.0f s)", o.detail, c.budget_s)};
    }
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.id, c.name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
