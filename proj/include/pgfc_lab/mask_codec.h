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

#ifndef PGFC_LAB_MASK_CODEC_H_
#define PGFC_LAB_MASK_CODEC_H_

/// @file mask_codec.h
/// @brief Binary-mask encoder/decoder pair, BCE + Dice losses with exact
/// gradients, and mask <-> polygon/box conversions.
///
/// The mask is split into (side/stride)^2 square cells, one per image token.
/// Decoder, for cell i with learned cell query P_i and <mask> embedding t:
///   a_i = softmax(((P_i + t) Wq)(E Wk)^T / sqrt(d)) (E Wv)
///   h_i = a_i + E_i + t
///   z_i = h_i Wout + bout          (stride^2 logits, row-major in the cell)
/// Everything runs in double precision so finite-difference checks are tight.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "pgfc_lab/geometry.h"
#include "pgfc_lab/png_io.h"
#include "pgfc_lab/tensor.h"

namespace pgfc_lab {

struct MaskCodecConfig {
  int mask_side = 64;
  int stride = 8;
  int d_model = 32;
  uint64_t seed = 0;
  /// Start the encoder head and decoder output head at zero.
  bool zero_heads = false;

  absl::Status Validate() const;
  int cells_per_side() const { return mask_side / stride; }
  int cells() const { return cells_per_side() * cells_per_side(); }
};

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Real-valued logits at mask resolution, row-major.
struct MaskLogits {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[size_t(y) * width + x]; }
};

class MaskEncoder {
 public:
  static absl::StatusOr<MaskEncoder> Create(const MaskCodecConfig& cfg);

  /// Per-cell average (stride x stride) followed by a linear head: (1, d).
  absl::StatusOr<Tensor> Encode(const BinaryMask& m) const;

  Matrix& head() { return head_; }
  RowVector& bias() { return bias_; }

 private:
  MaskCodecConfig cfg_;
  Matrix head_;    // (cells, d)
  RowVector bias_; // (d)
};

struct MaskDecoderWeights {
  Matrix cell_query;  // (cells, d)
  Matrix wq, wk, wv;  // (d, d)
  Matrix w_out;       // (d, stride^2)
  RowVector b_out;    // (stride^2)

  static absl::StatusOr<MaskDecoderWeights> Init(const MaskCodecConfig& cfg);

  /// Flat views for optimizers and gradient checks (fixed order above).
  std::vector<double*> Parameters();
  size_t ParameterCount() const;
};

using MaskDecoderGrads = MaskDecoderWeights;

/// e_v: (cells, d) image tokens; token: (1, d) <mask> output embedding.
absl::StatusOr<MaskLogits> MaskDecode(const MaskCodecConfig& cfg,
                                      const MaskDecoderWeights& w,
                                      const Tensor& e_v, const Tensor& token);

struct LossWeights {
  double bce = 1.0;
  double dice = 1.0;
};

inline constexpr double kDiceEpsilon = 1.0;

absl::StatusOr<double> BceLoss(const MaskLogits& z, const BinaryMask& target);
absl::StatusOr<double> DiceLoss(const MaskLogits& z, const BinaryMask& target,
                                double eps = kDiceEpsilon);

/// weights.bce * BCE + weights.dice * Dice and its gradient w.r.t. z.
absl::StatusOr<double> CombinedLoss(const MaskLogits& z, const BinaryMask& target,
                                    const LossWeights& weights,
                                    std::vector<double>* grad_z = nullptr);

/// Loss of MaskDecode output and gradients w.r.t. every decoder weight.
absl::StatusOr<double> MaskLossAndGrads(const MaskCodecConfig& cfg,
                                        const MaskDecoderWeights& w,
                                        const Tensor& e_v, const Tensor& token,
                                        const BinaryMask& target,
                                        const LossWeights& weights,
                                        MaskDecoderGrads* grads);

/// One plain gradient-descent step. Returns the loss before the update.
/// Errors: non-finite loss or gradient (weights left untouched).
absl::StatusOr<double> TrainStep(const MaskCodecConfig& cfg, MaskDecoderWeights& w,
                                 const Tensor& e_v, const Tensor& token,
                                 const BinaryMask& target, double lr,
                                 const LossWeights& weights = {});

/// z > 0.
BinaryMask Threshold(const MaskLogits& z);

// ---------------------------------------------------------------- geometry

/// 4-connected component labels (0 = background, 1.. in raster order of
/// each component's first pixel).
struct ComponentLabels {
  int count = 0;
  std::vector<int> labels;
};
ComponentLabels LabelComponents(const BinaryMask& m);

/// Outer boundary of every 4-connected component, traced along pixel edges
/// clockwise (y down), then thinned to at most `max_vertices` by repeatedly
/// dropping the vertex closest to the chord of its neighbours. Coordinates
/// are relative to the mask size.
std::vector<Polygon> MaskToPolygons(const BinaryMask& m, int max_vertices = 50);

/// Removes vertices until at most `max_vertices` (>= 3) remain.
std::vector<Point2> DecimatePolygon(std::vector<Point2> ring, int max_vertices);

/// Even-odd fill of each polygon sampled at pixel centres, OR-ed together.
absl::StatusOr<BinaryMask> PolygonToMask(const std::vector<Polygon>& polys,
                                         int height, int width);

/// Tight box of each 4-connected component, in component-label order.
std::vector<BBox> MaskToBBoxes(const BinaryMask& m);

GrayImage MaskToGray(const BinaryMask& m);
/// Pixels >= 128 become 1.
BinaryMask GrayToMask(const GrayImage& g);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_MASK_CODEC_H_
