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

#include "cli.h"

#include <glob.h>

#include <algorithm>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "json.hpp"
#include "pgfc_lab/ablation.h"
#include "pgfc_lab/checkpoint.h"
#include "pgfc_lab/mask_codec.h"
#include "pgfc_lab/pgfc.h"
#include "pgfc_lab/png_io.h"
#include "pgfc_lab/promptforge.h"
#include "pgfc_lab/status_macros.h"
#include "pgfc_lab/synthetic_slide.h"
#include "pgfc_lab/wire_format.h"

namespace pgfc_lab::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr int kReportSchemaVersion = 1;

// ---------------------------------------------------------------- helpers

absl::StatusOr<std::vector<int>> ParseIntList(const std::string& text) {
  std::vector<int> out;
  for (absl::string_view part : absl::StrSplit(text, ',', absl::SkipEmpty())) {
    int v = 0;
    if (!absl::SimpleAtoi(part, &v)) {
      return absl::InvalidArgumentError(absl::StrCat("not an integer list: ", text));
    }
    out.push_back(v);
  }
  if (out.empty()) return absl::InvalidArgumentError("empty integer list");
  return out;
}

/// Sorted matches of a shell pattern; a plain existing path matches itself.
absl::StatusOr<std::vector<fs::path>> ExpandGlob(const std::string& pattern) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<fs::path> out;
  if (rc == 0) {
    for (size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
  }
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) return absl::InternalError("glob failed");
  if (out.empty()) return absl::NotFoundError(absl::StrCat("no match for ", pattern));
  std::sort(out.begin(), out.end());
  return out;
}

absl::StatusOr<Model> LoadOrCreateModel(const std::string& path, uint64_t seed) {
  if (!path.empty()) return LoadCheckpoint(path);
  ModelConfig cfg;
  cfg.seed = seed;
  return Model::Create(cfg);
}

absl::Status WriteText(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") return absl::OkStatus();
  return WriteFileBytes(path, text);
}

json RegionJson(const Region& r) { return {r.level, r.x, r.y, r.w, r.h}; }

// ---------------------------------------------------------------- gen-wsi

struct GenWsiArgs {
  std::string out;
  uint64_t seed = 0;
  int width = 4096;
  int height = 4096;
  int lesions = 3;
  int tile = 256;
};

absl::Status GenWsi(const GenWsiArgs& a, std::ostream& out) {
  SlideSpec spec;
  spec.width = a.width;
  spec.height = a.height;
  spec.n_lesions = a.lesions;
  spec.seed = a.seed;
  spec.tile_size = a.tile;
  PGFC_ASSIGN_OR_RETURN(SyntheticSlide slide, CreateSyntheticWsi(spec));
  PGFC_RETURN_IF_ERROR(WritePyramid(slide.pyramid, a.out));
  PGFC_RETURN_IF_ERROR(WriteGroundTruth(slide.truth, fs::path(a.out) / "ground_truth.json"));
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "gen-wsi";
  j["out"] = a.out;
  j["width"] = slide.pyramid.width();
  j["height"] = slide.pyramid.height();
  j["levels"] = slide.pyramid.level_count();
  j["lesions"] = static_cast<int>(slide.truth.lesions.size());
  out << j.dump(2) << "\n";
  return absl::OkStatus();
}

// ---------------------------------------------------------------- init-model

struct InitModelArgs {
  std::string out;
  uint64_t seed = 0;
  int d_model = 32;
  int heads = 4;
  int layers = 2;
  int vit_layers = 1;
};

absl::Status InitModel(const InitModelArgs& a, std::ostream& out) {
  ModelConfig cfg;
  cfg.seed = a.seed;
  cfg.d_model = a.d_model;
  cfg.n_heads = a.heads;
  cfg.n_layers_decoder = a.layers;
  cfg.n_layers_vit = a.vit_layers;
  PGFC_ASSIGN_OR_RETURN(Model model, Model::Create(cfg));
  const std::string bytes = SerializeCheckpoint(model);
  PGFC_RETURN_IF_ERROR(WriteFileBytes(a.out, bytes));
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "init-model";
  j["out"] = a.out;
  j["bytes"] = bytes.size();
  j["config"] = json::parse(ModelConfigToJson(cfg));
  out << j.dump(2) << "\n";
  return absl::OkStatus();
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string slide;
  std::string prompt;
  std::string mode = "pgfc";
  int s = 8;
  int layer = 0;
  int pool = 2;
  uint64_t seed = 0;
  std::string model;
  std::string multiples = "1,2";
  std::string aux = "off";
  int max_tokens = 8;
  std::string heatmap;
};

absl::StatusOr<PgfcOptions> ToPgfcOptions(const InferArgs& a) {
  PgfcOptions o;
  PGFC_ASSIGN_OR_RETURN(o.mode, ParseMode(a.mode));
  o.s = a.s;
  o.layer = a.layer;
  o.pool_factor = a.pool;
  o.seed = a.seed;
  o.max_tokens = a.max_tokens;
  PGFC_ASSIGN_OR_RETURN(o.multiples, ParseIntList(a.multiples));
  o.aux = a.aux == "on";
  return o;
}

absl::Status Infer(const InferArgs& a, std::ostream& out) {
  PGFC_ASSIGN_OR_RETURN(PgfcOptions opts, ToPgfcOptions(a));
  PGFC_ASSIGN_OR_RETURN(Model model, LoadOrCreateModel(a.model, a.seed));
  PGFC_ASSIGN_OR_RETURN(PyramidImage p, ReadPyramid(a.slide));
  PGFC_ASSIGN_OR_RETURN(PgfcRunner runner, PgfcRunner::Create(model, opts));
  PGFC_ASSIGN_OR_RETURN(FirstPass first, runner.RunFirstPass(p, a.prompt));
  PGFC_ASSIGN_OR_RETURN(PgfcResult r, runner.Complete(p, first, opts.mode));
  if (!a.heatmap.empty()) {
    PGFC_RETURN_IF_ERROR(WriteAttentionHeatmap(r.grid, first.thumbnail, a.heatmap));
  }
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "infer";
  j["mode"] = std::string(ModeName(opts.mode));
  j["s"] = opts.s;
  j["layer"] = opts.layer;
  j["pool_factor"] = opts.pool_factor;
  j["answer_ids"] = r.answer.ids;
  j["first_pass_ids"] = r.first_answer.ids;
  j["first_pass_length"] = r.first_length;
  j["second_pass_length"] = r.second_length;
  j["detail_image_tokens"] = r.detail_image_tokens;
  j["detail_text_tokens"] = r.detail_text_tokens;
  j["selected"] = r.selection.indices;
  j["scores"] = r.selection.scores;
  json regions = json::array();
  for (const Region& reg : r.selection.regions) regions.push_back(RegionJson(reg));
  j["regions"] = regions;
  j["truncated"] = r.selection.truncated;
  j["upsampled"] = r.any_upsampled;
  j["tissue_cells"] = r.grid.tissue.Count();
  out << j.dump(2) << "\n";
  return absl::OkStatus();
}

// ---------------------------------------------------------------- heatmap

struct HeatmapArgs {
  std::string slide;
  std::string prompt;
  std::string out;
  std::string model;
  uint64_t seed = 0;
  int layer = 0;
};

absl::Status Heatmap(const HeatmapArgs& a, std::ostream& out) {
  PGFC_ASSIGN_OR_RETURN(Model model, LoadOrCreateModel(a.model, a.seed));
  PGFC_ASSIGN_OR_RETURN(PyramidImage p, ReadPyramid(a.slide));
  PgfcOptions opts;
  opts.layer = a.layer;
  opts.max_tokens = 1;
  PGFC_ASSIGN_OR_RETURN(PgfcRunner runner, PgfcRunner::Create(model, opts));
  PGFC_ASSIGN_OR_RETURN(FirstPass first, runner.RunFirstPass(p, a.prompt));
  PGFC_RETURN_IF_ERROR(WriteAttentionHeatmap(first.grid, first.thumbnail, a.out));
  PGFC_ASSIGN_OR_RETURN(KeyTokenContrast c,
                        ContrastKeyToken(*first.result.attention, first.e_v.dim(0),
                                         first.e_t.dim(0), a.layer));
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "heatmap";
  j["out"] = a.out;
  j["layer"] = a.layer;
  j["grid"] = first.grid.values;
  j["key_token"] = {{"index", c.key_index}, {"final_attention", c.key_final},
                    {"received", c.key_received}};
  j["ordinary_token"] = {{"index", c.ordinary_index}, {"final_attention", c.ordinary_final},
                         {"received", c.ordinary_received}};
  out << j.dump(2) << "\n";
  return absl::OkStatus();
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  std::string slides;
  int trials = 100;
  uint64_t seed = 0;
  std::string report;
  std::string model;
  int s = 8;
  int probe_slides = 8;
  int slide_px = 2048;
  int max_tokens = 2;
};

absl::Status Ablate(const AblateArgs& a, std::ostream& out) {
  AblationOptions o;
  o.seed = a.seed;
  o.trials = a.trials;
  o.probe_slides = a.probe_slides;
  o.slide_px = a.slide_px;
  o.pgfc.s = a.s;
  o.pgfc.seed = a.seed;
  o.pgfc.max_tokens = a.max_tokens;
  if (!a.slides.empty()) {
    PGFC_ASSIGN_OR_RETURN(o.slides, ExpandGlob(a.slides));
  }
  PGFC_ASSIGN_OR_RETURN(Model model, LoadOrCreateModel(a.model, a.seed));
  PGFC_ASSIGN_OR_RETURN(AblationReport report, RunAblation(model, o));
  const std::string text = AblationReportJson(report);
  if (a.report.empty() || a.report == "-") {
    out << text;
  } else {
    PGFC_RETURN_IF_ERROR(WriteFileBytes(a.report, text));
    json j;
    j["schema_version"] = kReportSchemaVersion;
    j["kind"] = "ablate-summary";
    j["report"] = a.report;
    for (const ArmSummary& arm : report.arms) {
      j["recall"][std::string(ModeName(arm.mode))] = arm.mean_recall;
    }
    out << j.dump(2) << "\n";
  }
  return absl::OkStatus();
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  std::string pred;
  std::string gt;
  std::string task = "det";
  double iou_thresh = 0.5;
  int size = 512;
};

absl::Status Score(const ScoreArgs& a, std::ostream& out) {
  PGFC_ASSIGN_OR_RETURN(std::string pred_text, ReadFileBytes(a.pred));
  PGFC_ASSIGN_OR_RETURN(std::string gt_text, ReadFileBytes(a.gt));
  if (a.task == "det") {
    PGFC_ASSIGN_OR_RETURN(DetectionSet pred, ParseDetections(pred_text));
    PGFC_ASSIGN_OR_RETURN(DetectionSet gt, ParseDetections(gt_text));
    const DetectionScore s = MatchAndScore(pred, gt, a.iou_thresh);
    out << "task=det\n"
        << "iou_thresh=" << a.iou_thresh << "\n"
        << "num_pred=" << s.num_pred << "\n"
        << "num_gt=" << s.num_gt << "\n"
        << "matched=" << s.matched << "\n"
        << "precision=" << s.precision << "\n"
        << "recall=" << s.recall << "\n"
        << "f1=" << s.f1 << "\n"
        << "mean_matched_iou=" << s.mean_matched_iou << "\n"
        << "global_box_iou=" << GlobalBoxIou(pred, gt) << "\n";
    return absl::OkStatus();
  }
  if (a.task == "seg") {
    PGFC_ASSIGN_OR_RETURN(std::vector<Polygon> pred, ParseContourList(pred_text));
    PGFC_ASSIGN_OR_RETURN(std::vector<Polygon> gt, ParseContourList(gt_text));
    PGFC_ASSIGN_OR_RETURN(BinaryMask pm, PolygonToMask(pred, a.size, a.size));
    PGFC_ASSIGN_OR_RETURN(BinaryMask gm, PolygonToMask(gt, a.size, a.size));
    PGFC_ASSIGN_OR_RETURN(double dice, Dice(pm, gm));
    PGFC_ASSIGN_OR_RETURN(double iou, MaskIou(pm, gm));
    out << "task=seg\n"
        << "raster=" << a.size << "\n"
        << "num_pred=" << pred.size() << "\n"
        << "num_gt=" << gt.size() << "\n"
        << "dice=" << dice << "\n"
        << "iou=" << iou << "\n";
    return absl::OkStatus();
  }
  return absl::InvalidArgumentError("task must be det or seg");
}

// ---------------------------------------------------------------- forge

struct ForgeArgs {
  std::string slides;
  std::string tasks = "cancer_det,cancer_seg,disease";
  int n = 100;
  uint64_t seed = 0;
  std::string out;
  double open_fraction = 0.5;
  std::string organ;
};

absl::StatusOr<SampleRecord> ForgeOne(const fs::path& slide_dir, const GroundTruth& truth,
                                      int width, int height, TaskKind kind,
                                      double open_fraction, Rng& rng) {
  const std::string image = slide_dir.generic_string();
  switch (kind) {
    case TaskKind::kCancerDet: {
      Annotations ann;
      for (const Lesion& l : truth.lesions) {
        BBox b{1.0, 1.0, 0.0, 0.0};
        for (const Point2& p : l.polygon) {
          b.x1 = std::min(b.x1, std::clamp(p.x / width, 0.0, 1.0));
          b.y1 = std::min(b.y1, std::clamp(p.y / height, 0.0, 1.0));
          b.x2 = std::max(b.x2, std::clamp(p.x / width, 0.0, 1.0));
          b.y2 = std::max(b.y2, std::clamp(p.y / height, 0.0, 1.0));
        }
        ann.boxes.push_back(b);
      }
      return MakeGeometrySample(image, ann, kind, rng);
    }
    case TaskKind::kCancerSeg: {
      Annotations ann;
      for (const Lesion& l : truth.lesions) {
        Polygon poly;
        for (const Point2& p : DecimatePolygon(l.polygon, 50)) {
          poly.vertices.push_back(
              {std::clamp(p.x / width, 0.0, 1.0), std::clamp(p.y / height, 0.0, 1.0)});
        }
        ann.polygons.push_back(std::move(poly));
      }
      return MakeGeometrySample(image, ann, kind, rng);
    }
    case TaskKind::kDisease: {
      const std::string question = RenderPrompt(kind, rng);
      const bool tumor = !truth.lesions.empty();
      SampleRecord r;
      if (rng.Uniform() < open_fraction) {
        r.prompt = question;
        r.answer = tumor ? "tumor" : "normal";
      } else {
        PGFC_ASSIGN_OR_RETURN(r, MakeClosed(question, {"tumor", "normal"}, tumor ? 0 : 1, rng));
      }
      r.image = image;
      r.task = std::string(TaskKindName(kind));
      return r;
    }
    default:
      return absl::InvalidArgumentError(absl::StrCat(
          "task ", std::string(TaskKindName(kind)),
          " cannot be derived from synthetic ground truth (supported: cancer_det, "
          "cancer_seg, disease)"));
  }
}

absl::Status Forge(const ForgeArgs& a, std::ostream& out) {
  if (a.n < 0) return absl::InvalidArgumentError("--n must be >= 0");
  if (a.open_fraction < 0.0 || a.open_fraction > 1.0) {
    return absl::InvalidArgumentError("--open-fraction must lie in [0, 1]");
  }
  std::vector<TaskKind> kinds;
  for (absl::string_view name : absl::StrSplit(a.tasks, ',', absl::SkipEmpty())) {
    PGFC_ASSIGN_OR_RETURN(TaskKind k, ParseTaskKind(std::string(name)));
    kinds.push_back(k);
  }
  if (kinds.empty()) return absl::InvalidArgumentError("--tasks is empty");
  PGFC_ASSIGN_OR_RETURN(std::vector<fs::path> dirs, ExpandGlob(a.slides));
  struct SlideInfo {
    GroundTruth truth;
    int width, height;
  };
  std::vector<SlideInfo> slides;
  for (const fs::path& d : dirs) {
    PGFC_ASSIGN_OR_RETURN(GroundTruth gt, ReadGroundTruth(d / "ground_truth.json"));
    slides.push_back({std::move(gt), 0, 0});
    // Ground truth stores the slide size with its tissue model.
    slides.back().width = slides.back().truth.tissue.width;
    slides.back().height = slides.back().truth.tissue.height;
    if (slides.back().width <= 0 || slides.back().height <= 0) {
      return absl::InvalidArgumentError(absl::StrCat("bad slide size in ", d.string()));
    }
  }
  Rng rng(a.seed);
  std::vector<SampleRecord> records;
  records.reserve(a.n);
  for (int i = 0; i < a.n; ++i) {
    const size_t si = rng.UniformInt(slides.size());
    const TaskKind kind = kinds[rng.UniformInt(kinds.size())];
    PGFC_ASSIGN_OR_RETURN(SampleRecord r,
                          ForgeOne(dirs[si], slides[si].truth, slides[si].width,
                                   slides[si].height, kind, a.open_fraction, rng));
    if (!a.organ.empty()) r.organ = a.organ;
    records.push_back(std::move(r));
  }
  PGFC_RETURN_IF_ERROR(WriteJsonl(records, a.out));
  const DatasetStats stats = ComputeDatasetStats(records);
  json j;
  j["schema_version"] = kReportSchemaVersion;
  j["kind"] = "forge";
  j["out"] = a.out;
  j["total"] = stats.total;
  j["organs"] = stats.organs;
  j["tasks"] = stats.tasks;
  out << j.dump(2) << "\n";
  return absl::OkStatus();
}

// ---------------------------------------------------------------- convert

struct ConvertArgs {
  std::string from;
  std::string to;
  std::string in;
  std::string out;
  int width = 0;
  int height = 0;
  int max_vertices = 50;
};

absl::Status Convert(const ConvertArgs& a, std::ostream& out) {
  std::string result;
  if (a.from == "mask") {
    PGFC_ASSIGN_OR_RETURN(GrayImage g, ReadGrayPng(a.in));
    const BinaryMask m = GrayToMask(g);
    if (a.to == "polygon") {
      PGFC_ASSIGN_OR_RETURN(result, SerializeContourList(MaskToPolygons(m, a.max_vertices)));
    } else if (a.to == "bbox") {
      PGFC_ASSIGN_OR_RETURN(result, SerializeBboxList(MaskToBBoxes(m)));
    } else {
      return absl::InvalidArgumentError("mask converts to polygon or bbox");
    }
  } else if (a.from == "polygon") {
    PGFC_ASSIGN_OR_RETURN(std::string text, ReadFileBytes(a.in));
    PGFC_ASSIGN_OR_RETURN(std::vector<Polygon> polys, ParseContourList(text));
    if (a.to == "mask") {
      if (a.width <= 0 || a.height <= 0) {
        return absl::InvalidArgumentError("polygon -> mask needs --width and --height");
      }
      PGFC_ASSIGN_OR_RETURN(BinaryMask m, PolygonToMask(polys, a.height, a.width));
      return WriteGrayPng(MaskToGray(m), a.out);
    } else if (a.to == "bbox") {
      std::vector<BBox> boxes;
      for (const Polygon& p : polys) {
        BBox b{1.0, 1.0, 0.0, 0.0};
        for (const Point2& v : p.vertices) {
          b.x1 = std::min(b.x1, v.x);
          b.y1 = std::min(b.y1, v.y);
          b.x2 = std::max(b.x2, v.x);
          b.y2 = std::max(b.y2, v.y);
        }
        boxes.push_back(b);
      }
      PGFC_ASSIGN_OR_RETURN(result, SerializeBboxList(boxes));
    } else {
      return absl::InvalidArgumentError("polygon converts to mask or bbox");
    }
  } else if (a.from == "bbox") {
    if (a.to != "mask") return absl::InvalidArgumentError("bbox converts to mask");
    if (a.width <= 0 || a.height <= 0) {
      return absl::InvalidArgumentError("bbox -> mask needs --width and --height");
    }
    PGFC_ASSIGN_OR_RETURN(std::string text, ReadFileBytes(a.in));
    PGFC_ASSIGN_OR_RETURN(DetectionSet set, ParseDetections(text));
    std::vector<Polygon> polys;
    for (const DetectionGroup& g : set.groups) {
      for (const BBox& b : g.boxes) {
        polys.push_back({{{b.x1, b.y1}, {b.x2, b.y1}, {b.x2, b.y2}, {b.x1, b.y2}}});
      }
    }
    PGFC_ASSIGN_OR_RETURN(BinaryMask m, PolygonToMask(polys, a.height, a.width));
    return WriteGrayPng(MaskToGray(m), a.out);
  } else {
    return absl::InvalidArgumentError("--from must be mask, polygon or bbox");
  }
  if (a.out.empty() || a.out == "-") {
    out << result << "\n";
    return absl::OkStatus();
  }
  return WriteText(a.out, result + "\n");
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"pgfc-lab: synthetic-slide playground for attention-routed detail completion"};
  app.name("pgfc-lab");
  app.require_subcommand(1);

  GenWsiArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-wsi", "Write a synthetic slide pyramid");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--width", gen.width);
  gen_cmd->add_option("--height", gen.height);
  gen_cmd->add_option("--lesions", gen.lesions);
  gen_cmd->add_option("--tile", gen.tile);

  InitModelArgs init;
  auto* init_cmd = app.add_subcommand("init-model", "Write a seeded model checkpoint");
  init_cmd->add_option("--out", init.out)->required();
  init_cmd->add_option("--seed", init.seed);
  init_cmd->add_option("--d-model", init.d_model);
  init_cmd->add_option("--heads", init.heads);
  init_cmd->add_option("--layers", init.layers, "Decoder layers");
  init_cmd->add_option("--vit-layers", init.vit_layers);

  InferArgs inf;
  auto* inf_cmd = app.add_subcommand("infer", "Two-pass inference on a slide");
  inf_cmd->add_option("--slide", inf.slide)->required();
  inf_cmd->add_option("--prompt", inf.prompt)->required();
  inf_cmd->add_option("--mode", inf.mode)->check(CLI::IsMember({"pgfc", "random", "none"}));
  inf_cmd->add_option("--s", inf.s);
  inf_cmd->add_option("--layer", inf.layer);
  inf_cmd->add_option("--pool", inf.pool);
  inf_cmd->add_option("--seed", inf.seed);
  inf_cmd->add_option("--model", inf.model, "Checkpoint (default: fresh model from --seed)");
  inf_cmd->add_option("--multiples", inf.multiples);
  inf_cmd->add_option("--aux", inf.aux)->check(CLI::IsMember({"on", "off"}));
  inf_cmd->add_option("--max-tokens", inf.max_tokens);
  inf_cmd->add_option("--heatmap", inf.heatmap, "Write the first-pass heatmap PNG");

  HeatmapArgs heat;
  auto* heat_cmd = app.add_subcommand("heatmap", "Render the final-token attention heatmap");
  heat_cmd->add_option("--slide", heat.slide)->required();
  heat_cmd->add_option("--prompt", heat.prompt)->required();
  heat_cmd->add_option("--out", heat.out)->required();
  heat_cmd->add_option("--model", heat.model);
  heat_cmd->add_option("--seed", heat.seed);
  heat_cmd->add_option("--layer", heat.layer);

  AblateArgs abl;
  auto* abl_cmd = app.add_subcommand("ablate", "Compare pgfc, random and none selection");
  abl_cmd->add_option("--slides", abl.slides, "Glob of slide directories (default: synthesize)");
  abl_cmd->add_option("--trials", abl.trials);
  abl_cmd->add_option("--seed", abl.seed);
  abl_cmd->add_option("--report", abl.report);
  abl_cmd->add_option("--model", abl.model);
  abl_cmd->add_option("--s", abl.s);
  abl_cmd->add_option("--probe-slides", abl.probe_slides);
  abl_cmd->add_option("--slide-px", abl.slide_px);
  abl_cmd->add_option("--max-tokens", abl.max_tokens);

  ScoreArgs score;
  auto* score_cmd = app.add_subcommand("score", "Score predicted boxes or contours");
  score_cmd->add_option("--pred", score.pred)->required();
  score_cmd->add_option("--gt", score.gt)->required();
  score_cmd->add_option("--task", score.task)->check(CLI::IsMember({"det", "seg"}));
  score_cmd->add_option("--iou-thresh", score.iou_thresh);
  score_cmd->add_option("--size", score.size, "Raster side for seg scoring");

  ForgeArgs forge;
  auto* forge_cmd = app.add_subcommand("forge", "Build an instruction corpus from slides");
  forge_cmd->add_option("--slides", forge.slides)->required();
  forge_cmd->add_option("--tasks", forge.tasks);
  forge_cmd->add_option("--n", forge.n);
  forge_cmd->add_option("--seed", forge.seed);
  forge_cmd->add_option("--out", forge.out)->required();
  forge_cmd->add_option("--open-fraction", forge.open_fraction);
  forge_cmd->add_option("--organ", forge.organ);

  ConvertArgs conv;
  auto* conv_cmd = app.add_subcommand("convert", "Convert between mask, polygon and bbox");
  conv_cmd->add_option("--from", conv.from)->required();
  conv_cmd->add_option("--to", conv.to)->required();
  conv_cmd->add_option("--in", conv.in)->required();
  conv_cmd->add_option("--out", conv.out);
  conv_cmd->add_option("--width", conv.width);
  conv_cmd->add_option("--height", conv.height);
  conv_cmd->add_option("--max-vertices", conv.max_vertices);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    const auto subs = app.get_subcommands();
    out << (subs.empty() ? app.help() : subs.front()->help());
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "pgfc-lab: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }

  absl::Status status;
  try {
    if (*gen_cmd) status = GenWsi(gen, out);
    else if (*init_cmd) status = InitModel(init, out);
    else if (*inf_cmd) status = Infer(inf, out);
    else if (*heat_cmd) status = Heatmap(heat, out);
    else if (*abl_cmd) status = Ablate(abl, out);
    else if (*score_cmd) status = Score(score, out);
    else if (*forge_cmd) status = Forge(forge, out);
    else if (*conv_cmd) status = Convert(conv, out);
  } catch (const std::exception& e) {
    status = absl::InternalError(e.what());
  }
  if (!status.ok()) {
    err << "pgfc-lab: " << status << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace pgfc_lab::cli
