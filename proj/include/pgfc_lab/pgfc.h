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

#ifndef PGFC_LAB_PGFC_H_
#define PGFC_LAB_PGFC_H_

/// @file pgfc.h
/// @brief Attention-routed detail completion. Pass 1 reads how the final
/// prompt position attends to the thumbnail tokens, background cells are
/// dropped, the top-S cells are re-read at full resolution, pooled, tagged
/// with a positional sentence, and appended for pass 2.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "pgfc_lab/image.h"
#include "pgfc_lab/model.h"
#include "pgfc_lab/msff.h"
#include "pgfc_lab/pyramid.h"

namespace pgfc_lab {

enum class SelectionMode { kPgfc, kRandom, kNone };

std::string_view ModeName(SelectionMode mode);
absl::StatusOr<SelectionMode> ParseMode(std::string_view name);

struct AttentionGrid {
  GridShape shape;
  std::vector<double> values;  // row-major
  int source_layer = 0;
  BinaryGrid tissue;           // 1 = tissue; 0 = background, never selected

  double at(int r, int c) const { return values[size_t(r) * shape.cols + c]; }
};

struct SelectionResult {
  SelectionMode mode = SelectionMode::kNone;
  std::vector<int> indices;  // flat row-major cells, in selection order
  std::vector<double> scores;
  std::vector<Region> regions;  // level-0 footprints, filled on fetch
  /// Fewer tissue cells than requested; every tissue cell was returned.
  bool truncated = false;
};

/// Row N+M (1-based) of layer `layer`'s head-averaged matrix, restricted to
/// the first N columns.
absl::StatusOr<std::vector<double>> FinalTokenAttention(const AttentionRecord& rec,
                                                        int n_image, int n_text,
                                                        int layer);

/// Row-major fill; all cells tissue.
absl::StatusOr<AttentionGrid> ToGrid(const std::vector<double>& v, GridShape shape,
                                     int source_layer = 0);
std::vector<double> Flatten(const AttentionGrid& g);

/// Highest-scoring tissue cells; ties go to the lower flat index.
absl::StatusOr<SelectionResult> SelectTopS(const AttentionGrid& g, int s);
/// Uniform draw without replacement over tissue cells.
absl::StatusOr<SelectionResult> RandomSelection(const AttentionGrid& g, int s,
                                                uint64_t seed);

/// "Patch at row {r}, column {c} of the slide." with 0-based r, c.
std::string PositionalText(int index, GridShape grid);

struct PatchDetail {
  int index = 0;
  Region region;
  Tensor image_tokens;  // pooled, (N / pool^2, d_model)
  std::string text;
  Tensor text_tokens;
  bool upsampled = false;
};

/// Encodes the level-0 footprint of every selected cell (fills
/// `sel.regions`).
absl::StatusOr<std::vector<PatchDetail>> FetchAndEncode(SelectionResult& sel,
                                                        const PyramidImage& p,
                                                        GridShape grid,
                                                        const MultiScaleEncoder& encoder,
                                                        const TextEncoder& text,
                                                        int pool_factor);

struct PgfcOptions {
  SelectionMode mode = SelectionMode::kPgfc;
  int s = 8;
  int layer = 0;
  int pool_factor = 2;
  uint64_t seed = 0;
  int max_tokens = 8;
  std::vector<int> multiples = {1, 2};
  bool aux = false;
};

struct FirstPass {
  Image thumbnail;
  Tensor e_v, e_t;
  GenerateResult result;
  AttentionGrid grid;
};

struct PgfcResult {
  TokenSeq answer;
  TokenSeq first_answer;
  SelectionResult selection;
  AttentionGrid grid;
  int first_length = 0;
  int second_length = 0;   // equals first_length for mode none
  int detail_image_tokens = 0;
  int detail_text_tokens = 0;
  bool any_upsampled = false;
};

/// Holds the model-derived encoders so repeated runs share them.
class PgfcRunner {
 public:
  static absl::StatusOr<PgfcRunner> Create(const Model& model, const PgfcOptions& options);

  absl::StatusOr<FirstPass> RunFirstPass(const PyramidImage& p, std::string_view prompt) const;
  /// Selection + second pass for `mode` on top of a shared first pass.
  /// `random_seed` overrides options().seed for the random arm.
  absl::StatusOr<PgfcResult> Complete(const PyramidImage& p, const FirstPass& first,
                                      SelectionMode mode,
                                      std::optional<uint64_t> random_seed = std::nullopt) const;
  absl::StatusOr<PgfcResult> Run(const PyramidImage& p, std::string_view prompt) const;

  const PgfcOptions& options() const { return options_; }

 private:
  const Model* model_ = nullptr;
  PgfcOptions options_;
  std::optional<MultiScaleEncoder> encoder_;
};

/// One-shot convenience wrapper around PgfcRunner.
absl::StatusOr<PgfcResult> PgfcInfer(const Model& model, const PyramidImage& p,
                                     std::string_view prompt,
                                     const PgfcOptions& options = {});

// ---------------------------------------------------------------- analysis

/// Row `token_index` of Ψ (layer) restricted to the N image-token columns.
absl::StatusOr<std::vector<double>> KeyOrdinaryRows(const AttentionRecord& rec,
                                                    int n_image, int token_index,
                                                    int layer = 0);

/// Mean attention an image token receives from every later position.
absl::StatusOr<std::vector<double>> ReceivedAttention(const AttentionRecord& rec,
                                                      int n_image, int layer = 0);

struct KeyTokenContrast {
  int key_index = 0;       // image token the final position attends to most
  int ordinary_index = 0;  // median-ranked image token
  double key_final = 0.0, ordinary_final = 0.0;
  double key_received = 0.0, ordinary_received = 0.0;
};

absl::StatusOr<KeyTokenContrast> ContrastKeyToken(const AttentionRecord& rec,
                                                  int n_image, int n_text,
                                                  int layer = 0);

/// Blue (low) to red (high) overlay of min-max normalised scores, bilinearly
/// upsampled to the thumbnail and blended at 50%. A constant grid maps to
/// the mid colour.
absl::StatusOr<Image> AttentionHeatmap(const AttentionGrid& g, const Image& thumb);
absl::Status WriteAttentionHeatmap(const AttentionGrid& g, const Image& thumb,
                                   const std::filesystem::path& out_path);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_PGFC_H_
