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

#ifndef PGFC_LAB_MSFF_H_
#define PGFC_LAB_MSFF_H_

/// @file msff.h
/// @brief Multi-scale feature fusion. A view at multiple m is cut into m^2
/// base-size tiles, each tile is encoded on its own, the tile features are
/// put back in place and mean-pooled down to the base token grid. Scales are
/// stacked along channels (then optional auxiliary-encoder channels) and a
/// linear head maps the stack to d_model, so the token count never grows.

#include <cstdint>
#include <optional>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "pgfc_lab/image.h"
#include "pgfc_lab/model.h"
#include "pgfc_lab/pyramid.h"
#include "pgfc_lab/tensor.h"

namespace pgfc_lab {

struct ScaleSet {
  int base_px = 128;
  std::vector<int> multiples = {1, 2};

  /// multiples start at 1 and strictly increase.
  absl::Status Validate() const;
};

struct TilePosition {
  int row = 0;
  int col = 0;
  friend bool operator==(const TilePosition&, const TilePosition&) = default;
};

struct ImageTile {
  Image image;
  TilePosition pos;
};

/// m^2 base_px-square tiles in row-major order.
absl::StatusOr<std::vector<ImageTile>> SplitTiles(const Image& img, int base_px, int m);
/// Inverse of SplitTiles.
absl::StatusOr<Image> JoinTiles(const std::vector<ImageTile>& tiles, int base_px, int m);

/// Places per-tile feature maps (g, g, C) into an (m*g, m*g, C) map.
absl::StatusOr<Tensor> ReassembleFeatures(const std::vector<Tensor>& tile_features,
                                          const std::vector<TilePosition>& positions,
                                          int m);

/// Non-overlapping m x m mean pooling of an (m*g, m*g, C) map.
absl::StatusOr<Tensor> DownsampleToBase(const Tensor& map, int m);

struct FusedEmbedding {
  Tensor pre_projection;  // (N, C*K + C_aux)
  Tensor tokens;          // (N, d_model)
  int scales = 0;
  int channels_per_scale = 0;
  int aux_channels = 0;
  /// Set when some view had to be upsampled beyond the pyramid's resolution.
  bool upsampled = false;
};

struct MsffConfig {
  ScaleSet scales;
  VisionEncoderConfig primary;
  /// Auxiliary encoder; its grid and patch size must match the primary.
  std::optional<VisionEncoderConfig> aux;
  int d_model = 32;
  uint64_t seed = 0;
};

class MultiScaleEncoder {
 public:
  static absl::StatusOr<MultiScaleEncoder> Create(const MsffConfig& cfg);
  /// Reuses `model`'s vision encoder as the primary path. The auxiliary
  /// encoder (when `aux_enabled`) is a fresh ViT with an independent seed.
  static absl::StatusOr<MultiScaleEncoder> FromModel(const Model& model,
                                                     std::vector<int> multiples,
                                                     bool aux_enabled,
                                                     uint64_t seed);

  /// `views[k]` shows the same field at side multiples[k] * base_px.
  absl::StatusOr<FusedEmbedding> Fuse(const std::vector<Image>& views) const;

  /// Builds the per-scale views of a level-0 `region` from the pyramid
  /// (coarsest sufficient level, area resize; bicubic upsampling of level 0
  /// when no level is fine enough) and fuses them.
  absl::StatusOr<FusedEmbedding> EncodeRegion(const PyramidImage& p,
                                              const Region& region) const;

  /// Views EncodeRegion would feed to Fuse, plus the upsampling flag.
  absl::StatusOr<std::vector<Image>> RegionViews(const PyramidImage& p,
                                                 const Region& region,
                                                 bool* upsampled) const;

  const MsffConfig& config() const { return cfg_; }
  int base_tokens() const { return cfg_.primary.grid.size(); }
  int pre_projection_width() const;
  const VisionEncoder& primary() const { return primary_; }

 private:
  MsffConfig cfg_;
  VisionEncoder primary_;
  std::optional<VisionEncoder> aux_;
  Tensor proj_w_, proj_b_;
};

}  // namespace pgfc_lab

#endif  // PGFC_LAB_MSFF_H_
