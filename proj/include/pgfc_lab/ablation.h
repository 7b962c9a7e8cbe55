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

#ifndef PGFC_LAB_ABLATION_H_
#define PGFC_LAB_ABLATION_H_

/// @file ablation.h
/// @brief Selection-arm comparison on planted-lesion slides.
///
/// A linear saliency probe is fitted (ridge least squares) from thumbnail
/// token embeddings to lesion labels on training slides that are disjoint
/// from the evaluation slides. With the probe installed, each evaluation
/// slide runs one shared first pass and the pgfc / random / none arms.
/// Lesion-cell recall of a selection I against lesion cells L is
/// |I ∩ L| / min(S, |L|); slides with no lesion cell are skipped.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "pgfc_lab/model.h"
#include "pgfc_lab/pgfc.h"
#include "pgfc_lab/synthetic_slide.h"

namespace pgfc_lab {

inline constexpr int kAblationSchemaVersion = 1;

struct AblationOptions {
  uint64_t seed = 0;
  /// Synthetic evaluation slides (ignored when `slides` is non-empty).
  int trials = 100;
  /// Pyramid directories, each holding ground_truth.json.
  std::vector<std::filesystem::path> slides;
  int slide_px = 2048;
  int n_lesions = 3;
  int tile_size = 256;
  int probe_slides = 8;
  double ridge = 1e-2;
  float probe_scale = 8.0f;
  double lesion_coverage = 0.25;
  std::string prompt = "Is there a tumor in this slide?";
  PgfcOptions pgfc;
};

struct LabeledSlide {
  PyramidImage pyramid;
  GroundTruth truth;
  std::string id;
};

struct ProbeFit {
  SaliencyProbe probe;
  int cells = 0;
  int positives = 0;
  double train_accuracy = 0.0;  // sign agreement of (score - 0.5)
};

/// Ridge fit on tissue cells of `slides`; labels are lesion coverage >=
/// `min_coverage`.
absl::StatusOr<ProbeFit> FitSaliencyProbe(const Model& model,
                                          const std::vector<LabeledSlide>& slides,
                                          double ridge, float scale,
                                          double min_coverage);

struct ArmSummary {
  SelectionMode mode = SelectionMode::kNone;
  double mean_recall = 0.0;
  double std_recall = 0.0;
  double mean_selected = 0.0;
  double mean_detail_image_tokens = 0.0;
  double mean_detail_text_tokens = 0.0;
  double mean_second_length = 0.0;
};

struct SlideOutcome {
  std::string id;
  int lesion_cells = 0;
  int tissue_cells = 0;
  int first_length = 0;
  double recall[3] = {0, 0, 0};       // indexed by SelectionMode
  int second_length[3] = {0, 0, 0};
  int selected[3] = {0, 0, 0};
};

struct AblationReport {
  AblationOptions options;
  ModelConfig model;
  ProbeFit probe;
  std::vector<ArmSummary> arms;  // pgfc, random, none
  std::vector<SlideOutcome> slides;
  int slides_skipped = 0;

  double Recall(SelectionMode mode) const;
};

/// Synthetic slide `index` of the evaluation (or probe-training) stream.
absl::StatusOr<LabeledSlide> MakeAblationSlide(const AblationOptions& options,
                                               bool training, int index);
absl::StatusOr<LabeledSlide> LoadLabeledSlide(const std::filesystem::path& dir);

/// Fits the probe on a copy of `model`, then evaluates all three arms.
absl::StatusOr<AblationReport> RunAblation(const Model& model,
                                           const AblationOptions& options);

/// Pretty-printed JSON with a trailing newline; byte-stable for equal input.
std::string AblationReportJson(const AblationReport& report);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_ABLATION_H_
