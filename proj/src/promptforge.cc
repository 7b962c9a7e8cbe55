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

#include "pgfc_lab/promptforge.h"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "pgfc_lab/mask_codec.h"
#include "pgfc_lab/status_macros.h"
#include "pgfc_lab/wire_format.h"

namespace pgfc_lab {

// Defined in the generated prompt_banks_data.cc.
extern const char kPromptBanksJson[];

namespace {

using json = nlohmann::ordered_json;

struct KindInfo {
  TaskKind kind;
  std::string_view name;
  AnswerShape shape;
};

constexpr KindInfo kKinds[] = {
    {TaskKind::kOrgan, "organ", AnswerShape::kLabel},
    {TaskKind::kDisease, "disease", AnswerShape::kLabel},
    {TaskKind::kSubtype, "subtype", AnswerShape::kLabel},
    {TaskKind::kGrade, "grade", AnswerShape::kLabel},
    {TaskKind::kCancerDet, "cancer_det", AnswerShape::kBoxes},
    {TaskKind::kCancerSeg, "cancer_seg", AnswerShape::kContours},
    {TaskKind::kVesselDet, "vessel_det", AnswerShape::kBoxes},
    {TaskKind::kLymphDet, "lymph_det", AnswerShape::kBoxes},
    {TaskKind::kNerveDet, "nerve_det", AnswerShape::kBoxes},
    {TaskKind::kNerveSeg, "nerve_seg", AnswerShape::kContours},
    {TaskKind::kMvi, "mvi", AnswerShape::kLabel},
    {TaskKind::kNi, "ni", AnswerShape::kLabel},
    {TaskKind::kLnm, "lnm", AnswerShape::kLabel},
    {TaskKind::kMviNucleiDet, "mvi_nuclei_det", AnswerShape::kBoxes},
    {TaskKind::kNiSeg, "ni_seg", AnswerShape::kContours},
    {TaskKind::kLnmSeg, "lnm_seg", AnswerShape::kContours},
    {TaskKind::kNucleusDetPlain, "nucleus_det_plain", AnswerShape::kBoxes},
    {TaskKind::kNucleusDetClassed, "nucleus_det_classed", AnswerShape::kClassedBoxes},
    {TaskKind::kTissue, "tissue", AnswerShape::kLabel},
};

const KindInfo& Info(TaskKind kind) { return kKinds[static_cast<int>(kind)]; }

}  // namespace

const std::vector<TaskKind>& AllTaskKinds() {
  static const auto* kinds = [] {
    auto* v = new std::vector<TaskKind>;
    for (const KindInfo& k : kKinds) v->push_back(k.kind);
    return v;
  }();
  return *kinds;
}

std::string_view TaskKindName(TaskKind kind) { return Info(kind).name; }

absl::StatusOr<TaskKind> ParseTaskKind(std::string_view name) {
  for (const KindInfo& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown task kind '", std::string(name), "'"));
}

AnswerShape ShapeOf(TaskKind kind) { return Info(kind).shape; }

// ---------------------------------------------------------------- banks

absl::StatusOr<PromptBank> PromptBank::FromJson(std::string_view text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("prompt bank is not a JSON object");
  }
  if (!j.contains("version") || !j["version"].is_number_integer() ||
      !j.contains("banks") || !j["banks"].is_object()) {
    return absl::InvalidArgumentError("prompt bank needs integer 'version' and object 'banks'");
  }
  PromptBank bank;
  bank.version_ = j["version"].get<int>();
  for (auto& [name, list] : j["banks"].items()) {
    PGFC_ASSIGN_OR_RETURN(TaskKind kind, ParseTaskKind(name));
    if (!list.is_array() || list.empty()) {
      return absl::InvalidArgumentError(absl::StrCat("bank '", name, "' must be a non-empty list"));
    }
    std::vector<std::string> templates;
    for (const auto& t : list) {
      if (!t.is_string()) return absl::InvalidArgumentError("templates must be strings");
      templates.push_back(t.get<std::string>());
    }
    bank.banks_[kind] = std::move(templates);
  }
  for (const KindInfo& k : kKinds) {
    if (!bank.banks_.count(k.kind)) {
      return absl::InvalidArgumentError(absl::StrCat("bank for '", std::string(k.name), "' missing"));
    }
  }
  return bank;
}

const PromptBank& PromptBank::Default() {
  static const PromptBank* bank = [] {
    auto parsed = FromJson(kPromptBanksJson);
    if (!parsed.ok()) std::abort();  // the embedded file is validated by tests
    return new PromptBank(std::move(*parsed));
  }();
  return *bank;
}

std::span<const std::string> PromptBank::Templates(TaskKind kind) const {
  return banks_.at(kind);
}

std::string RenderPrompt(TaskKind kind, Rng& rng, const PromptBank& bank) {
  const auto templates = bank.Templates(kind);
  return templates[rng.UniformInt(templates.size())];
}

// ---------------------------------------------------------------- records

absl::StatusOr<SampleRecord> MakeClosed(std::string_view question,
                                        const std::vector<std::string>& options,
                                        int answer_index, Rng& rng) {
  if (options.size() < 2) return absl::InvalidArgumentError("closed questions need >= 2 options");
  if (options.size() > 26) return absl::InvalidArgumentError("at most 26 options");
  if (answer_index < 0 || answer_index >= static_cast<int>(options.size())) {
    return absl::OutOfRangeError(absl::StrFormat("answer index %d out of range", answer_index));
  }
  std::vector<int> order(options.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  rng.Shuffle(order);
  SampleRecord r;
  r.style = Style::kClosed;
  r.prompt = std::string(question);
  std::vector<std::string> labelled;
  for (size_t pos = 0; pos < order.size(); ++pos) {
    std::string opt = absl::StrCat(std::string(1, static_cast<char>('A' + pos)), ". ",
                                   options[order[pos]]);
    absl::StrAppend(&r.prompt, "\n", opt);
    if (order[pos] == answer_index) r.answer = opt;
    labelled.push_back(std::move(opt));
  }
  r.options = std::move(labelled);
  return r;
}

absl::StatusOr<SampleRecord> MakeGeometrySample(std::string_view image_ref,
                                                const Annotations& ann, TaskKind kind,
                                                Rng& rng) {
  const AnswerShape shape = ShapeOf(kind);
  const std::string name(TaskKindName(kind));
  auto mismatch = [&](std::string_view what) {
    return absl::InvalidArgumentError(
        absl::StrCat(std::string(what), " annotations do not fit task ", name));
  };
  SampleRecord r;
  r.image = std::string(image_ref);
  r.task = name;
  r.style = Style::kOpen;
  switch (shape) {
    case AnswerShape::kLabel:
      return absl::InvalidArgumentError(absl::StrCat(name, " is not a geometry task"));
    case AnswerShape::kBoxes: {
      if (!ann.polygons.empty()) return mismatch("polygon");
      if (!ann.classed.empty()) return mismatch("classed box");
      std::vector<BBox> boxes = ann.boxes;
      for (const BinaryMask& m : ann.masks) {
        for (const BBox& b : MaskToBBoxes(m)) boxes.push_back(b);
      }
      PGFC_ASSIGN_OR_RETURN(r.answer, SerializeBboxList(boxes));
      break;
    }
    case AnswerShape::kContours: {
      if (!ann.boxes.empty()) return mismatch("box");
      if (!ann.classed.empty()) return mismatch("classed box");
      std::vector<Polygon> polys = ann.polygons;
      for (const BinaryMask& m : ann.masks) {
        for (Polygon& p : MaskToPolygons(m)) polys.push_back(std::move(p));
      }
      PGFC_ASSIGN_OR_RETURN(r.answer, SerializeContourList(polys));
      break;
    }
    case AnswerShape::kClassedBoxes: {
      if (!ann.boxes.empty() || !ann.masks.empty()) return mismatch("unlabelled");
      if (!ann.polygons.empty()) return mismatch("polygon");
      DetectionSet set;
      for (const ClassedBox& cb : ann.classed) {
        if (cb.label.empty()) return absl::InvalidArgumentError("empty class label");
        auto it = std::find_if(set.groups.begin(), set.groups.end(),
                               [&](const DetectionGroup& g) { return *g.label == cb.label; });
        if (it == set.groups.end()) {
          set.groups.push_back({cb.label, {}});
          it = set.groups.end() - 1;
        }
        it->boxes.push_back(cb.box);
      }
      PGFC_ASSIGN_OR_RETURN(r.answer, SerializeDetectionResult(set));
      break;
    }
  }
  r.prompt = RenderPrompt(kind, rng);
  return r;
}

DatasetStats ComputeDatasetStats(const std::vector<SampleRecord>& records) {
  DatasetStats s;
  for (const SampleRecord& r : records) {
    ++s.organs[r.organ.has_value() && !r.organ->empty() ? *r.organ : "unsure"];
    ++s.tasks[r.task];
    ++s.total;
  }
  return s;
}

// ---------------------------------------------------------------- JSONL

std::string RecordToJsonLine(const SampleRecord& r) {
  json j;
  j["image"] = r.image;
  j["prompt"] = r.prompt;
  j["answer"] = r.answer;
  j["task"] = r.task;
  j["style"] = r.style == Style::kClosed ? "closed" : "open";
  if (r.options.has_value()) j["options"] = *r.options;
  if (r.organ.has_value()) j["organ"] = *r.organ;
  for (const auto& [k, v] : r.extra.items()) j[k] = v;
  return j.dump();
}

absl::StatusOr<SampleRecord> RecordFromJsonLine(std::string_view line) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) return absl::InvalidArgumentError("not a JSON object");
  SampleRecord r;
  auto str = [&](const char* key, std::string& out) -> absl::Status {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      return absl::InvalidArgumentError(absl::StrCat("missing string field '", key, "'"));
    }
    out = it->get<std::string>();
    return absl::OkStatus();
  };
  PGFC_RETURN_IF_ERROR(str("image", r.image));
  PGFC_RETURN_IF_ERROR(str("prompt", r.prompt));
  PGFC_RETURN_IF_ERROR(str("answer", r.answer));
  PGFC_RETURN_IF_ERROR(str("task", r.task));
  std::string style;
  PGFC_RETURN_IF_ERROR(str("style", style));
  if (style == "open") {
    r.style = Style::kOpen;
  } else if (style == "closed") {
    r.style = Style::kClosed;
  } else {
    return absl::InvalidArgumentError(absl::StrCat("bad style '", style, "'"));
  }
  if (auto it = j.find("options"); it != j.end()) {
    if (!it->is_array()) return absl::InvalidArgumentError("'options' must be a list");
    std::vector<std::string> opts;
    for (const auto& o : *it) {
      if (!o.is_string()) return absl::InvalidArgumentError("options must be strings");
      opts.push_back(o.get<std::string>());
    }
    r.options = std::move(opts);
  }
  if (auto it = j.find("organ"); it != j.end()) {
    if (!it->is_string()) return absl::InvalidArgumentError("'organ' must be a string");
    r.organ = it->get<std::string>();
  }
  if (r.style == Style::kClosed &&
      (!r.options.has_value() ||
       std::find(r.options->begin(), r.options->end(), r.answer) == r.options->end())) {
    return absl::InvalidArgumentError("closed record's answer is not among its options");
  }
  static constexpr std::string_view kKnown[] = {"image", "prompt", "answer", "task",
                                                "style", "options", "organ"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), k) == std::end(kKnown)) r.extra[k] = v;
  }
  return r;
}

absl::Status WriteJsonl(const std::vector<SampleRecord>& records,
                        const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path.string()));
  for (const SampleRecord& r : records) out << RecordToJsonLine(r) << '\n';
  out.flush();
  if (!out) return absl::DataLossError(absl::StrCat("short write to ", path.string()));
  return absl::OkStatus();
}

absl::StatusOr<std::vector<SampleRecord>> ReadJsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  std::vector<SampleRecord> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto rec = RecordFromJsonLine(line);
    if (!rec.ok()) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "%s:%d: %s", path.string(), number, std::string(rec.status().message())));
    }
    out.push_back(std::move(*rec));
  }
  return out;
}

}  // namespace pgfc_lab
