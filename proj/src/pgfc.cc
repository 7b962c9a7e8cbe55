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

#include "pgfc_lab/pgfc.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "pgfc_lab/parallel.h"
#include "pgfc_lab/png_io.h"
#include "pgfc_lab/rng.h"
#include "pgfc_lab/status_macros.h"

namespace pgfc_lab {
namespace {

constexpr uint64_t kRandomStream = 0x72616e64;  // "rand"

absl::Status CheckLayer(const AttentionRecord& rec, int layer) {
  if (layer < 0 || layer >= static_cast<int>(rec.layers.size())) {
    return absl::OutOfRangeError(absl::StrFormat(
        "layer %d outside [0, %d)", layer, rec.layers.size()));
  }
  return absl::OkStatus();
}

std::vector<int> TissueCells(const AttentionGrid& g) {
  std::vector<int> cells;
  for (int i = 0; i < g.shape.size(); ++i) {
    if (g.tissue.cells.empty() || g.tissue.at(i)) cells.push_back(i);
  }
  return cells;
}

absl::Status CheckGrid(const AttentionGrid& g, int s) {
  if (s < 1) return absl::InvalidArgumentError("S must be >= 1");
  if (static_cast<int>(g.values.size()) != g.shape.size()) {
    return absl::InvalidArgumentError("grid values do not match its shape");
  }
  if (!g.tissue.cells.empty() && !(g.tissue.shape == g.shape)) {
    return absl::InvalidArgumentError("tissue mask shape differs from grid");
  }
  return absl::OkStatus();
}

}  // namespace

std::string_view ModeName(SelectionMode mode) {
  switch (mode) {
    case SelectionMode::kPgfc: return "pgfc";
    case SelectionMode::kRandom: return "random";
    case SelectionMode::kNone: return "none";
  }
  return "none";
}

absl::StatusOr<SelectionMode> ParseMode(std::string_view name) {
  if (name == "pgfc") return SelectionMode::kPgfc;
  if (name == "random") return SelectionMode::kRandom;
  if (name == "none") return SelectionMode::kNone;
  return absl::InvalidArgumentError(
      absl::StrCat("unknown mode '", std::string(name), "' (pgfc|random|none)"));
}

absl::StatusOr<std::vector<double>> FinalTokenAttention(const AttentionRecord& rec,
                                                        int n_image, int n_text,
                                                        int layer) {
  PGFC_RETURN_IF_ERROR(CheckLayer(rec, layer));
  if (n_image < 1 || n_text < 0 || rec.length < n_image + n_text) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "record length %d shorter than N + M = %d", rec.length, n_image + n_text));
  }
  const auto row = rec.Psi(layer).row(n_image + n_text - 1);
  return std::vector<double>(row.begin(), row.begin() + n_image);
}

absl::StatusOr<AttentionGrid> ToGrid(const std::vector<double>& v, GridShape shape,
                                     int source_layer) {
  if (shape.rows <= 0 || shape.cols <= 0 || static_cast<int>(v.size()) != shape.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "%d values do not fill a %dx%d grid", v.size(), shape.rows, shape.cols));
  }
  AttentionGrid g;
  g.shape = shape;
  g.values = v;
  g.source_layer = source_layer;
  g.tissue = BinaryGrid(shape, 1);
  return g;
}

std::vector<double> Flatten(const AttentionGrid& g) { return g.values; }

absl::StatusOr<SelectionResult> SelectTopS(const AttentionGrid& g, int s) {
  PGFC_RETURN_IF_ERROR(CheckGrid(g, s));
  std::vector<int> cells = TissueCells(g);
  if (cells.empty()) return absl::FailedPreconditionError("no tissue cells to select");
  const size_t k = std::min<size_t>(cells.size(), static_cast<size_t>(s));
  std::partial_sort(cells.begin(), cells.begin() + k, cells.end(), [&](int a, int b) {
    if (g.values[a] != g.values[b]) return g.values[a] > g.values[b];
    return a < b;
  });
  SelectionResult out;
  out.mode = SelectionMode::kPgfc;
  out.indices.assign(cells.begin(), cells.begin() + k);
  for (int i : out.indices) out.scores.push_back(g.values[i]);
  out.truncated = k < static_cast<size_t>(s);
  return out;
}

absl::StatusOr<SelectionResult> RandomSelection(const AttentionGrid& g, int s,
                                                uint64_t seed) {
  PGFC_RETURN_IF_ERROR(CheckGrid(g, s));
  std::vector<int> cells = TissueCells(g);
  if (cells.empty()) return absl::FailedPreconditionError("no tissue cells to select");
  const size_t k = std::min<size_t>(cells.size(), static_cast<size_t>(s));
  Rng rng(seed);
  for (size_t i = 0; i < k; ++i) {
    const size_t j = i + static_cast<size_t>(rng.UniformInt(cells.size() - i));
    std::swap(cells[i], cells[j]);
  }
  SelectionResult out;
  out.mode = SelectionMode::kRandom;
  out.indices.assign(cells.begin(), cells.begin() + k);
  for (int i : out.indices) out.scores.push_back(g.values[i]);
  out.truncated = k < static_cast<size_t>(s);
  return out;
}

std::string PositionalText(int index, GridShape grid) {
  return absl::StrFormat("Patch at row %d, column %d of the slide.", index / grid.cols,
                         index % grid.cols);
}

absl::StatusOr<std::vector<PatchDetail>> FetchAndEncode(SelectionResult& sel,
                                                        const PyramidImage& p,
                                                        GridShape grid,
                                                        const MultiScaleEncoder& encoder,
                                                        const TextEncoder& text,
                                                        int pool_factor) {
  const int g = encoder.config().primary.grid.rows;
  if (pool_factor < 1 || g % pool_factor != 0) {
    return absl::InvalidArgumentError(
        absl::StrFormat("pool factor %d does not divide token grid %d", pool_factor, g));
  }
  const size_t n = sel.indices.size();
  sel.regions.assign(n, Region{});
  std::vector<PatchDetail> details(n);
  std::vector<absl::Status> status(n);
  ParallelFor(n, [&](size_t s) {
    status[s] = [&]() -> absl::Status {
      PatchDetail& d = details[s];
      d.index = sel.indices[s];
      PGFC_ASSIGN_OR_RETURN(d.region, MapGridIndexToRegion(d.index, grid, p, 0));
      PGFC_ASSIGN_OR_RETURN(FusedEmbedding fused, encoder.EncodeRegion(p, d.region));
      d.upsampled = fused.upsampled;
      const int ch = fused.tokens.dim(1);
      if (pool_factor == 1) {
        d.image_tokens = std::move(fused.tokens);
      } else {
        PGFC_ASSIGN_OR_RETURN(Tensor map, fused.tokens.Reshape({g, g, ch}));
        PGFC_ASSIGN_OR_RETURN(Tensor pooled, MeanPool2d(map, pool_factor));
        const int side = g / pool_factor;
        PGFC_ASSIGN_OR_RETURN(d.image_tokens, pooled.Reshape({side * side, ch}));
      }
      d.text = PositionalText(d.index, grid);
      PGFC_ASSIGN_OR_RETURN(d.text_tokens, text.Encode(d.text));
      sel.regions[s] = d.region;
      return absl::OkStatus();
    }();
  });
  for (const absl::Status& st : status) PGFC_RETURN_IF_ERROR(st);
  return details;
}

// ---------------------------------------------------------------- pipeline

absl::StatusOr<PgfcRunner> PgfcRunner::Create(const Model& model,
                                              const PgfcOptions& options) {
  if (options.s < 1) return absl::InvalidArgumentError("S must be >= 1");
  if (options.layer < 0 || options.layer >= model.decoder().n_layers()) {
    return absl::OutOfRangeError(absl::StrFormat(
        "layer %d outside [0, %d)", options.layer, model.decoder().n_layers()));
  }
  if (options.max_tokens < 1) return absl::InvalidArgumentError("max_tokens must be >= 1");
  const GridShape grid = model.config().grid;
  if (grid.rows != grid.cols) {
    return absl::InvalidArgumentError("detail encoding needs a square token grid");
  }
  if (options.pool_factor < 1 || grid.rows % options.pool_factor != 0) {
    return absl::InvalidArgumentError("pool factor must divide the token grid");
  }
  PgfcRunner r;
  r.model_ = &model;
  r.options_ = options;
  PGFC_ASSIGN_OR_RETURN(MultiScaleEncoder enc,
                        MultiScaleEncoder::FromModel(model, options.multiples, options.aux,
                                                     DeriveSeed(model.config().seed, 4)));
  r.encoder_ = std::move(enc);
  return r;
}

absl::StatusOr<FirstPass> PgfcRunner::RunFirstPass(const PyramidImage& p,
                                                   std::string_view prompt) const {
  const ModelConfig& cfg = model_->config();
  FirstPass fp;
  PGFC_ASSIGN_OR_RETURN(fp.thumbnail, Thumbnail(p, cfg.grid, cfg.patch_px));
  PGFC_ASSIGN_OR_RETURN(fp.e_v, model_->vision().Encode(fp.thumbnail));
  PGFC_ASSIGN_OR_RETURN(fp.e_t, model_->text().Encode(prompt));
  GenerateOptions go;
  go.max_tokens = options_.max_tokens;
  go.capture_attention = true;
  PGFC_ASSIGN_OR_RETURN(fp.result, Generate(*model_, fp.e_v, fp.e_t, nullptr, go));
  PGFC_ASSIGN_OR_RETURN(std::vector<double> v,
                        FinalTokenAttention(*fp.result.attention, fp.e_v.dim(0),
                                            fp.e_t.dim(0), options_.layer));
  PGFC_ASSIGN_OR_RETURN(fp.grid, ToGrid(v, cfg.grid, options_.layer));
  fp.grid.tissue = TissueMask(fp.thumbnail, cfg.grid);
  return fp;
}

absl::StatusOr<PgfcResult> PgfcRunner::Complete(const PyramidImage& p,
                                                const FirstPass& first,
                                                SelectionMode mode,
                                                std::optional<uint64_t> random_seed) const {
  PgfcResult out;
  out.first_answer = first.result.output;
  out.grid = first.grid;
  out.first_length = first.result.input_length;
  if (mode == SelectionMode::kNone) {
    out.answer = first.result.output;
    out.second_length = out.first_length;
    out.selection.mode = SelectionMode::kNone;
    return out;
  }
  if (mode == SelectionMode::kPgfc) {
    PGFC_ASSIGN_OR_RETURN(out.selection, SelectTopS(first.grid, options_.s));
  } else {
    PGFC_ASSIGN_OR_RETURN(out.selection,
                          RandomSelection(first.grid, options_.s,
                                          DeriveSeed(random_seed.value_or(options_.seed), kRandomStream)));
  }
  PGFC_ASSIGN_OR_RETURN(
      std::vector<PatchDetail> details,
      FetchAndEncode(out.selection, p, model_->config().grid, *encoder_, model_->text(),
                     options_.pool_factor));
  Completion completion;
  for (PatchDetail& d : details) {
    out.detail_image_tokens += d.image_tokens.dim(0);
    out.detail_text_tokens += d.text_tokens.dim(0);
    out.any_upsampled = out.any_upsampled || d.upsampled;
    completion.detail_image.push_back(std::move(d.image_tokens));
    completion.detail_text.push_back(std::move(d.text_tokens));
  }
  GenerateOptions go;
  go.max_tokens = options_.max_tokens;
  go.capture_attention = false;
  PGFC_ASSIGN_OR_RETURN(GenerateResult second,
                        Generate(*model_, first.e_v, first.e_t, &completion, go));
  out.answer = std::move(second.output);
  out.second_length = second.input_length;
  return out;
}

absl::StatusOr<PgfcResult> PgfcRunner::Run(const PyramidImage& p,
                                           std::string_view prompt) const {
  PGFC_ASSIGN_OR_RETURN(FirstPass first, RunFirstPass(p, prompt));
  return Complete(p, first, options_.mode);
}

absl::StatusOr<PgfcResult> PgfcInfer(const Model& model, const PyramidImage& p,
                                     std::string_view prompt, const PgfcOptions& options) {
  PGFC_ASSIGN_OR_RETURN(PgfcRunner runner, PgfcRunner::Create(model, options));
  return runner.Run(p, prompt);
}

// ---------------------------------------------------------------- analysis

absl::StatusOr<std::vector<double>> KeyOrdinaryRows(const AttentionRecord& rec,
                                                    int n_image, int token_index,
                                                    int layer) {
  PGFC_RETURN_IF_ERROR(CheckLayer(rec, layer));
  if (n_image < 1 || n_image > rec.length || token_index < 0 || token_index >= n_image) {
    return absl::InvalidArgumentError(
        absl::StrFormat("token %d is not one of %d image tokens", token_index, n_image));
  }
  const auto row = rec.Psi(layer).row(token_index);
  return std::vector<double>(row.begin(), row.begin() + n_image);
}

absl::StatusOr<std::vector<double>> ReceivedAttention(const AttentionRecord& rec,
                                                      int n_image, int layer) {
  PGFC_RETURN_IF_ERROR(CheckLayer(rec, layer));
  if (n_image < 1 || n_image > rec.length) {
    return absl::InvalidArgumentError("image token count exceeds the record");
  }
  const Tensor& psi = rec.Psi(layer);
  const int L = rec.length;
  std::vector<double> out(n_image, 0.0);
  for (int j = 0; j < n_image; ++j) {
    if (j + 1 >= L) break;
    double acc = 0.0;
    for (int i = j + 1; i < L; ++i) acc += psi.at(i, j);
    out[j] = acc / (L - 1 - j);
  }
  return out;
}

absl::StatusOr<KeyTokenContrast> ContrastKeyToken(const AttentionRecord& rec,
                                                  int n_image, int n_text, int layer) {
  PGFC_ASSIGN_OR_RETURN(std::vector<double> fin,
                        FinalTokenAttention(rec, n_image, n_text, layer));
  PGFC_ASSIGN_OR_RETURN(std::vector<double> recv, ReceivedAttention(rec, n_image, layer));
  std::vector<int> order(n_image);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return fin[a] > fin[b]; });
  KeyTokenContrast c;
  c.key_index = order.front();
  c.ordinary_index = order[order.size() / 2];
  c.key_final = fin[c.key_index];
  c.ordinary_final = fin[c.ordinary_index];
  c.key_received = recv[c.key_index];
  c.ordinary_received = recv[c.ordinary_index];
  return c;
}

absl::StatusOr<Image> AttentionHeatmap(const AttentionGrid& g, const Image& thumb) {
  if (static_cast<int>(g.values.size()) != g.shape.size() || g.shape.size() == 0) {
    return absl::InvalidArgumentError("grid values do not match its shape");
  }
  if (thumb.width <= 0 || thumb.height <= 0) {
    return absl::InvalidArgumentError("empty thumbnail");
  }
  const auto [lo_it, hi_it] = std::minmax_element(g.values.begin(), g.values.end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  std::vector<double> norm(g.values.size(), 0.5);
  if (range > 0.0) {
    for (size_t i = 0; i < norm.size(); ++i) norm[i] = (g.values[i] - lo) / range;
  }
  auto cell = [&](int r, int c) { return norm[static_cast<size_t>(r) * g.shape.cols + c]; };
  Image out(thumb.width, thumb.height);
  for (int y = 0; y < thumb.height; ++y) {
    const double gy = std::clamp((y + 0.5) * g.shape.rows / thumb.height - 0.5, 0.0,
                                 static_cast<double>(g.shape.rows - 1));
    const int r0 = static_cast<int>(gy), r1 = std::min(r0 + 1, g.shape.rows - 1);
    const double fy = gy - r0;
    for (int x = 0; x < thumb.width; ++x) {
      const double gx = std::clamp((x + 0.5) * g.shape.cols / thumb.width - 0.5, 0.0,
                                   static_cast<double>(g.shape.cols - 1));
      const int c0 = static_cast<int>(gx), c1 = std::min(c0 + 1, g.shape.cols - 1);
      const double fx = gx - c0;
      const double v = (1 - fy) * ((1 - fx) * cell(r0, c0) + fx * cell(r0, c1)) +
                       fy * ((1 - fx) * cell(r1, c0) + fx * cell(r1, c1));
      const double color[3] = {255.0 * v, 0.0, 255.0 * (1.0 - v)};
      const uint8_t* src = thumb.At(x, y);
      uint8_t* dst = out.At(x, y);
      for (int ch = 0; ch < 3; ++ch) {
        dst[ch] = static_cast<uint8_t>(std::lround(0.5 * src[ch] + 0.5 * color[ch]));
      }
    }
  }
  return out;
}

absl::Status WriteAttentionHeatmap(const AttentionGrid& g, const Image& thumb,
                                   const std::filesystem::path& out_path) {
  PGFC_ASSIGN_OR_RETURN(Image img, AttentionHeatmap(g, thumb));
  return WritePng(img, out_path);
}

}  // namespace pgfc_lab
