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

#ifndef PGFC_LAB_PROMPTFORGE_H_
#define PGFC_LAB_PROMPTFORGE_H_

/// @file promptforge.h
/// @brief Instruction-sample construction: prompt banks, open/closed QA
/// rendering, geometry answers, corpus statistics and JSONL persistence.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"
#include "pgfc_lab/geometry.h"
#include "pgfc_lab/rng.h"

namespace pgfc_lab {

enum class TaskKind {
  kOrgan,
  kDisease,
  kSubtype,
  kGrade,
  kCancerDet,
  kCancerSeg,
  kVesselDet,
  kLymphDet,
  kNerveDet,
  kNerveSeg,
  kMvi,
  kNi,
  kLnm,
  kMviNucleiDet,
  kNiSeg,
  kLnmSeg,
  kNucleusDetPlain,
  kNucleusDetClassed,
  kTissue,
};

const std::vector<TaskKind>& AllTaskKinds();
std::string_view TaskKindName(TaskKind kind);
absl::StatusOr<TaskKind> ParseTaskKind(std::string_view name);

enum class AnswerShape { kLabel, kBoxes, kContours, kClassedBoxes };
AnswerShape ShapeOf(TaskKind kind);

/// Versioned template banks, one list per task kind.
class PromptBank {
 public:
  /// Parses {"version": n, "banks": {task: [templates...]}}. Every task kind
  /// must be present with at least one template.
  static absl::StatusOr<PromptBank> FromJson(std::string_view text);
  /// The bank compiled into the library.
  static const PromptBank& Default();

  int version() const { return version_; }
  std::span<const std::string> Templates(TaskKind kind) const;

 private:
  int version_ = 0;
  std::map<TaskKind, std::vector<std::string>> banks_;
};

/// Uniform draw from the task's bank.
std::string RenderPrompt(TaskKind kind, Rng& rng,
                         const PromptBank& bank = PromptBank::Default());

enum class Style { kOpen, kClosed };

struct SampleRecord {
  std::string image;
  std::string prompt;
  std::string answer;
  std::string task;
  Style style = Style::kOpen;
  std::optional<std::vector<std::string>> options;
  std::optional<std::string> organ;
  /// Fields not in the schema, kept in input order.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Shuffles `options`, labels them "A. ", "B. ", ... and appends them to the
/// question, one per line. `answer` is the labelled option of the original
/// `answer_index`.
absl::StatusOr<SampleRecord> MakeClosed(std::string_view question,
                                        const std::vector<std::string>& options,
                                        int answer_index, Rng& rng);

struct ClassedBox {
  std::string label;
  BBox box;
};

/// Geometry annotations in relative coordinates. Masks are converted with
/// the mask codec (boxes per component, or contours).
struct Annotations {
  std::vector<BBox> boxes;
  std::vector<Polygon> polygons;
  std::vector<BinaryMask> masks;
  std::vector<ClassedBox> classed;
};

/// Open-ended record whose answer is the serialized wire format for `kind`.
absl::StatusOr<SampleRecord> MakeGeometrySample(std::string_view image_ref,
                                                const Annotations& ann, TaskKind kind,
                                                Rng& rng);

struct DatasetStats {
  std::map<std::string, int> organs;  // unlabeled records count as "unsure"
  std::map<std::string, int> tasks;
  int total = 0;
};

DatasetStats ComputeDatasetStats(const std::vector<SampleRecord>& records);

std::string RecordToJsonLine(const SampleRecord& r);
absl::StatusOr<SampleRecord> RecordFromJsonLine(std::string_view line);

absl::Status WriteJsonl(const std::vector<SampleRecord>& records,
                        const std::filesystem::path& path);
/// Errors cite the 1-based line number of the first bad line.
absl::StatusOr<std::vector<SampleRecord>> ReadJsonl(const std::filesystem::path& path);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_PROMPTFORGE_H_
