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

#include "pgfc_lab/msff.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_format.h"
#include "pgfc_lab/parallel.h"
#include "pgfc_lab/rng.h"
#include "pgfc_lab/status_macros.h"

namespace pgfc_lab {

absl::Status ScaleSet::Validate() const {
  if (base_px <= 0) return absl::InvalidArgumentError("base_px must be positive");
  if (multiples.empty() || multiples.front() != 1) {
    return absl::InvalidArgumentError("multiples must start at 1");
  }
  for (size_t i = 1; i < multiples.size(); ++i) {
    if (multiples[i] <= multiples[i - 1]) {
      return absl::InvalidArgumentError("multiples must be strictly increasing");
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<ImageTile>> SplitTiles(const Image& img, int base_px, int m) {
  if (base_px <= 0 || m <= 0) return absl::InvalidArgumentError("bad tile geometry");
  if (img.width != m * base_px || img.height != m * base_px) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "view is %dx%d, expected %d", img.width, img.height, m * base_px));
  }
  std::vector<ImageTile> tiles;
  tiles.reserve(static_cast<size_t>(m) * m);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      PGFC_ASSIGN_OR_RETURN(Image t, Crop(img, c * base_px, r * base_px, base_px, base_px));
      tiles.push_back({std::move(t), {r, c}});
    }
  }
  return tiles;
}

absl::StatusOr<Image> JoinTiles(const std::vector<ImageTile>& tiles, int base_px, int m) {
  if (static_cast<int>(tiles.size()) != m * m) {
    return absl::InvalidArgumentError("tile count differs from m^2");
  }
  Image out(m * base_px, m * base_px);
  std::vector<bool> seen(tiles.size(), false);
  for (const ImageTile& t : tiles) {
    if (t.pos.row < 0 || t.pos.row >= m || t.pos.col < 0 || t.pos.col >= m ||
        t.image.width != base_px || t.image.height != base_px) {
      return absl::InvalidArgumentError("tile outside the grid or wrong size");
    }
    const size_t k = static_cast<size_t>(t.pos.row) * m + t.pos.col;
    if (seen[k]) return absl::InvalidArgumentError("duplicate tile position");
    seen[k] = true;
    Paste(t.image, t.pos.col * base_px, t.pos.row * base_px, out);
  }
  return out;
}

absl::StatusOr<Tensor> ReassembleFeatures(const std::vector<Tensor>& tile_features,
                                          const std::vector<TilePosition>& positions,
                                          int m) {
  if (m <= 0 || tile_features.size() != positions.size()) {
    return absl::InvalidArgumentError("features and positions differ in count");
  }
  if (static_cast<int>(tile_features.size()) != m * m) {
    return absl::InvalidArgumentError(
        absl::StrFormat("expected %d tiles, got %d", m * m, tile_features.size()));
  }
  const Tensor& first = tile_features.front();
  if (first.rank() != 3 || first.dim(0) != first.dim(1)) {
    return absl::InvalidArgumentError("tile features must be (g, g, C)");
  }
  const int g = first.dim(0), ch = first.dim(2), side = m * g;
  Tensor out({side, side, ch});
  std::vector<bool> seen(static_cast<size_t>(m) * m, false);
  for (size_t t = 0; t < tile_features.size(); ++t) {
    const Tensor& f = tile_features[t];
    const TilePosition p = positions[t];
    if (f.shape() != first.shape()) return absl::InvalidArgumentError("tile shape mismatch");
    if (p.row < 0 || p.row >= m || p.col < 0 || p.col >= m) {
      return absl::InvalidArgumentError("tile position outside the grid");
    }
    const size_t k = static_cast<size_t>(p.row) * m + p.col;
    if (seen[k]) {
      return absl::InvalidArgumentError(
          absl::StrFormat("duplicate position (%d, %d)", p.row, p.col));
    }
    seen[k] = true;
    for (int y = 0; y < g; ++y) {
      for (int x = 0; x < g; ++x) {
        const float* src = f.data() + (static_cast<size_t>(y) * g + x) * ch;
        float* dst = out.data() +
                     (static_cast<size_t>(p.row * g + y) * side + p.col * g + x) * ch;
        std::copy_n(src, ch, dst);
      }
    }
  }
  return out;
}

absl::StatusOr<Tensor> DownsampleToBase(const Tensor& map, int m) {
  if (map.rank() != 3 || m <= 0 || map.dim(0) % m != 0 || map.dim(1) % m != 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("multiple %d does not divide the feature map", m));
  }
  if (m == 1) return map;
  return MeanPool2d(map, m);
}

// ---------------------------------------------------------------- encoder

absl::StatusOr<MultiScaleEncoder> MultiScaleEncoder::Create(const MsffConfig& cfg) {
  PGFC_RETURN_IF_ERROR(cfg.scales.Validate());
  PGFC_RETURN_IF_ERROR(cfg.primary.Validate());
  if (cfg.scales.base_px != cfg.primary.grid.cols * cfg.primary.patch_px ||
      cfg.primary.grid.rows != cfg.primary.grid.cols) {
    return absl::InvalidArgumentError("base_px must match a square encoder grid");
  }
  if (cfg.d_model <= 0) return absl::InvalidArgumentError("d_model must be positive");
  MultiScaleEncoder enc;
  enc.cfg_ = cfg;
  PGFC_ASSIGN_OR_RETURN(enc.primary_, VisionEncoder::Create(cfg.primary));
  if (cfg.aux.has_value()) {
    if (!(cfg.aux->grid == cfg.primary.grid) || cfg.aux->patch_px != cfg.primary.patch_px) {
      return absl::InvalidArgumentError("auxiliary encoder grid differs from primary");
    }
    PGFC_ASSIGN_OR_RETURN(VisionEncoder aux, VisionEncoder::Create(*cfg.aux));
    enc.aux_ = std::move(aux);
  }
  const int width = enc.pre_projection_width();
  enc.proj_w_ = Tensor({width, cfg.d_model});
  // 1/sqrt(fan_in) keeps the fused tokens on the scale of the inputs.
  Rng rng(DeriveSeed(cfg.seed, 0x6d736666));
  const double std = 1.0 / std::sqrt(static_cast<double>(width));
  for (float& v : enc.proj_w_.values()) v = static_cast<float>(rng.Normal() * std);
  enc.proj_b_ = Tensor({cfg.d_model}, 0.0f);
  return enc;
}

absl::StatusOr<MultiScaleEncoder> MultiScaleEncoder::FromModel(
    const Model& model, std::vector<int> multiples, bool aux_enabled, uint64_t seed) {
  MsffConfig cfg;
  cfg.primary = model.vision().config();
  cfg.scales.base_px = model.config().image_width();
  cfg.scales.multiples = std::move(multiples);
  cfg.d_model = model.config().d_model;
  cfg.seed = seed;
  if (aux_enabled) {
    VisionEncoderConfig aux = cfg.primary;
    aux.seed = DeriveSeed(seed, 0x617578);
    cfg.aux = aux;
  }
  PGFC_ASSIGN_OR_RETURN(MultiScaleEncoder enc, Create(cfg));
  enc.primary_ = model.vision();
  return enc;
}

int MultiScaleEncoder::pre_projection_width() const {
  const int k = static_cast<int>(cfg_.scales.multiples.size());
  return cfg_.primary.d_model * k + (cfg_.aux.has_value() ? cfg_.aux->d_model : 0);
}

absl::StatusOr<FusedEmbedding> MultiScaleEncoder::Fuse(const std::vector<Image>& views) const {
  const auto& mults = cfg_.scales.multiples;
  const int base = cfg_.scales.base_px;
  if (views.size() != mults.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "expected %d views, got %d", mults.size(), views.size()));
  }
  for (size_t k = 0; k < views.size(); ++k) {
    if (views[k].width != mults[k] * base || views[k].height != mults[k] * base) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "view %d is %dx%d, expected side %d", k, views[k].width, views[k].height,
          mults[k] * base));
    }
  }
  const int g = cfg_.primary.grid.rows;
  const int n = g * g;
  const int ch = cfg_.primary.d_model;

  // Flatten every (scale, tile) pair into one work list.
  struct Job { size_t scale; ImageTile tile; };
  std::vector<Job> jobs;
  for (size_t k = 0; k < views.size(); ++k) {
    PGFC_ASSIGN_OR_RETURN(auto tiles, SplitTiles(views[k], base, mults[k]));
    for (auto& t : tiles) jobs.push_back({k, std::move(t)});
  }
  std::vector<absl::StatusOr<Tensor>> encoded(jobs.size(), absl::UnknownError("unset"));
  ParallelFor(jobs.size(), [&](size_t i) { encoded[i] = primary_.Encode(jobs[i].tile.image); });

  std::vector<Tensor> blocks;
  size_t next = 0;
  for (size_t k = 0; k < views.size(); ++k) {
    const int m = mults[k];
    std::vector<Tensor> feats;
    std::vector<TilePosition> pos;
    for (int t = 0; t < m * m; ++t, ++next) {
      if (!encoded[next].ok()) return encoded[next].status();
      PGFC_ASSIGN_OR_RETURN(Tensor f, encoded[next]->Reshape({g, g, ch}));
      feats.push_back(std::move(f));
      pos.push_back(jobs[next].tile.pos);
    }
    PGFC_ASSIGN_OR_RETURN(Tensor map, ReassembleFeatures(feats, pos, m));
    PGFC_ASSIGN_OR_RETURN(Tensor pooled, DownsampleToBase(map, m));
    PGFC_ASSIGN_OR_RETURN(Tensor flat, pooled.Reshape({n, ch}));
    blocks.push_back(std::move(flat));
  }
  if (aux_.has_value()) {
    PGFC_ASSIGN_OR_RETURN(Tensor a, aux_->Encode(views.front()));
    blocks.push_back(std::move(a));
  }

  FusedEmbedding out;
  PGFC_ASSIGN_OR_RETURN(out.pre_projection, ConcatColumns(blocks));
  out.scales = static_cast<int>(mults.size());
  out.channels_per_scale = ch;
  out.aux_channels = aux_.has_value() ? cfg_.aux->d_model : 0;
  PGFC_ASSIGN_OR_RETURN(out.tokens, MatMul(out.pre_projection, proj_w_));
  for (int r = 0; r < out.tokens.dim(0); ++r) {
    auto row = out.tokens.row(r);
    for (int j = 0; j < cfg_.d_model; ++j) row[j] += proj_b_.data()[j];
  }
  return out;
}

absl::StatusOr<std::vector<Image>> MultiScaleEncoder::RegionViews(
    const PyramidImage& p, const Region& region, bool* upsampled) const {
  if (region.level != 0) return absl::InvalidArgumentError("region must be at level 0");
  PGFC_RETURN_IF_ERROR(p.ValidateRegion(region));
  const LevelDesc& l0 = p.level_desc(0);
  std::vector<Image> views;
  bool up = false;
  for (int m : cfg_.scales.multiples) {
    const int side = m * cfg_.scales.base_px;
    // Coarsest level whose copy of the footprint still has >= side pixels.
    int chosen = -1;
    Region at;
    for (int k = p.level_count() - 1; k >= 0; --k) {
      const LevelDesc& lk = p.level_desc(k);
      const double sx = static_cast<double>(lk.width) / l0.width;
      const double sy = static_cast<double>(lk.height) / l0.height;
      Region r{k, static_cast<int>(std::floor(region.x * sx)),
               static_cast<int>(std::floor(region.y * sy)), 0, 0};
      r.w = std::min(lk.width, static_cast<int>(std::ceil((region.x + region.w) * sx))) - r.x;
      r.h = std::min(lk.height, static_cast<int>(std::ceil((region.y + region.h) * sy))) - r.y;
      if (r.w >= side && r.h >= side) {
        chosen = k;
        at = r;
        break;
      }
    }
    if (chosen < 0) {
      PGFC_ASSIGN_OR_RETURN(Image crop, ExtractRegion(p, region));
      views.push_back(BicubicResize(crop, side, side));
      up = true;
    } else {
      PGFC_ASSIGN_OR_RETURN(Image crop, ExtractRegion(p, at));
      views.push_back(crop.width == side && crop.height == side
                          ? std::move(crop)
                          : AreaResize(crop, side, side));
    }
  }
  if (upsampled != nullptr) *upsampled = up;
  return views;
}

absl::StatusOr<FusedEmbedding> MultiScaleEncoder::EncodeRegion(const PyramidImage& p,
                                                               const Region& region) const {
  bool up = false;
  PGFC_ASSIGN_OR_RETURN(std::vector<Image> views, RegionViews(p, region, &up));
  PGFC_ASSIGN_OR_RETURN(FusedEmbedding out, Fuse(views));
  out.upsampled = up;
  return out;
}

}  // namespace pgfc_lab
