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

#include "pgfc_lab/ablation.h"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "absl/strings/str_format.h"
#include "json.hpp"
#include "pgfc_lab/parallel.h"
#include "pgfc_lab/rng.h"
#include "pgfc_lab/status_macros.h"

namespace pgfc_lab {
namespace {

using json = nlohmann::ordered_json;

constexpr uint64_t kEvalStream = 0x6576616c00000000ULL;   // "eval"
constexpr uint64_t kProbeStream = 0x70726f6200000000ULL;  // "prob"

int ModeSlot(SelectionMode m) { return static_cast<int>(m); }

double LesionRecall(const std::vector<int>& selected, const std::vector<int>& lesion,
                    int s) {
  int hit = 0;
  for (int i : selected) {
    if (std::find(lesion.begin(), lesion.end(), i) != lesion.end()) ++hit;
  }
  return static_cast<double>(hit) / std::min<size_t>(static_cast<size_t>(s), lesion.size());
}

}  // namespace

double AblationReport::Recall(SelectionMode mode) const {
  for (const ArmSummary& a : arms) {
    if (a.mode == mode) return a.mean_recall;
  }
  return 0.0;
}

absl::StatusOr<LabeledSlide> MakeAblationSlide(const AblationOptions& options,
                                               bool training, int index) {
  SlideSpec spec;
  spec.width = spec.height = options.slide_px;
  spec.n_lesions = options.n_lesions;
  spec.tile_size = options.tile_size;
  spec.seed = DeriveSeed(options.seed, (training ? kProbeStream : kEvalStream) +
                                           static_cast<uint64_t>(index));
  PGFC_ASSIGN_OR_RETURN(SyntheticSlide slide, CreateSyntheticWsi(spec));
  LabeledSlide out;
  out.pyramid = std::move(slide.pyramid);
  out.truth = std::move(slide.truth);
  out.id = absl::StrFormat("%s-%03d", training ? "probe" : "eval", index);
  return out;
}

absl::StatusOr<LabeledSlide> LoadLabeledSlide(const std::filesystem::path& dir) {
  LabeledSlide out;
  PGFC_ASSIGN_OR_RETURN(out.pyramid, ReadPyramid(dir));
  PGFC_ASSIGN_OR_RETURN(out.truth, ReadGroundTruth(dir / "ground_truth.json"));
  out.id = dir.filename().string();
  if (out.id.empty()) out.id = dir.parent_path().filename().string();
  return out;
}

absl::StatusOr<ProbeFit> FitSaliencyProbe(const Model& model,
                                          const std::vector<LabeledSlide>& slides,
                                          double ridge, float scale,
                                          double min_coverage) {
  const ModelConfig& cfg = model.config();
  const int d = cfg.d_model;
  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  for (const LabeledSlide& s : slides) {
    PGFC_ASSIGN_OR_RETURN(Image thumb, Thumbnail(s.pyramid, cfg.grid, cfg.patch_px));
    PGFC_ASSIGN_OR_RETURN(Tensor e_v, model.vision().Encode(thumb));
    const BinaryGrid tissue = TissueMask(thumb, cfg.grid);
    for (int i = 0; i < cfg.grid.size(); ++i) {
      if (!tissue.at(i)) continue;
      PGFC_ASSIGN_OR_RETURN(Region r, MapGridIndexToRegion(i, cfg.grid, s.pyramid, 0));
      const auto e = e_v.row(i);
      rows.emplace_back(e.begin(), e.end());
      labels.push_back(LesionCoverage(s.truth, r) >= min_coverage ? 1.0 : 0.0);
    }
  }
  if (rows.empty()) return absl::FailedPreconditionError("no tissue cells to fit a probe");

  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), d + 1);
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = rows[i][j];
    x(i, d) = 1.0;
    y(i) = labels[i];
  }
  Eigen::MatrixXd gram = x.transpose() * x;
  for (int j = 0; j < d; ++j) gram(j, j) += ridge;  // bias left unpenalised
  const Eigen::VectorXd w = gram.ldlt().solve(x.transpose() * y);
  if (!w.allFinite()) return absl::InternalError("probe fit diverged");

  ProbeFit fit;
  fit.cells = static_cast<int>(rows.size());
  fit.probe.weights.resize(d);
  for (int j = 0; j < d; ++j) fit.probe.weights[j] = static_cast<float>(w(j));
  fit.probe.bias = static_cast<float>(w(d));
  fit.probe.scale = scale;
  int agree = 0;
  for (size_t i = 0; i < rows.size(); ++i) {
    fit.positives += labels[i] > 0.5 ? 1 : 0;
    const double pred = x.row(static_cast<Eigen::Index>(i)).dot(w);
    agree += ((pred > 0.5) == (labels[i] > 0.5)) ? 1 : 0;
  }
  fit.train_accuracy = static_cast<double>(agree) / rows.size();
  return fit;
}

absl::StatusOr<AblationReport> RunAblation(const Model& base_model,
                                           const AblationOptions& options) {
  if (options.slides.empty() && options.trials < 1) {
    return absl::InvalidArgumentError("need at least one trial");
  }
  if (options.probe_slides < 1) return absl::InvalidArgumentError("need probe slides");

  AblationReport report;
  report.options = options;
  report.model = base_model.config();

  std::vector<absl::StatusOr<LabeledSlide>> train(options.probe_slides,
                                                  absl::UnknownError("unset"));
  ParallelFor(train.size(), [&](size_t k) {
    train[k] = MakeAblationSlide(options, /*training=*/true, static_cast<int>(k));
  });
  std::vector<LabeledSlide> train_ok;
  for (auto& t : train) {
    if (!t.ok()) return t.status();
    train_ok.push_back(std::move(*t));
  }
  PGFC_ASSIGN_OR_RETURN(report.probe,
                        FitSaliencyProbe(base_model, train_ok, options.ridge,
                                         options.probe_scale, options.lesion_coverage));
  train_ok.clear();

  Model model = base_model;
  model.set_probe(report.probe.probe);
  PGFC_ASSIGN_OR_RETURN(PgfcRunner runner, PgfcRunner::Create(model, options.pgfc));

  const int n = options.slides.empty() ? options.trials
                                       : static_cast<int>(options.slides.size());
  const GridShape grid = model.config().grid;
  std::vector<absl::StatusOr<SlideOutcome>> outcomes(n, absl::UnknownError("unset"));
  ParallelFor(static_cast<size_t>(n), [&](size_t t) {
    outcomes[t] = [&]() -> absl::StatusOr<SlideOutcome> {
      LabeledSlide slide;
      if (options.slides.empty()) {
        PGFC_ASSIGN_OR_RETURN(slide, MakeAblationSlide(options, false, static_cast<int>(t)));
      } else {
        PGFC_ASSIGN_OR_RETURN(slide, LoadLabeledSlide(options.slides[t]));
      }
      PGFC_ASSIGN_OR_RETURN(std::vector<int> lesion,
                            LesionCells(slide.truth, slide.pyramid, grid,
                                        options.lesion_coverage));
      PGFC_ASSIGN_OR_RETURN(FirstPass first, runner.RunFirstPass(slide.pyramid, options.prompt));
      SlideOutcome o;
      o.id = slide.id;
      o.lesion_cells = static_cast<int>(lesion.size());
      o.tissue_cells = first.grid.tissue.Count();
      o.first_length = first.result.input_length;
      for (SelectionMode mode :
           {SelectionMode::kPgfc, SelectionMode::kRandom, SelectionMode::kNone}) {
        PGFC_ASSIGN_OR_RETURN(PgfcResult r,
                              runner.Complete(slide.pyramid, first, mode,
                                              DeriveSeed(options.seed, 0x5000 + t)));
        const int k = ModeSlot(mode);
        o.selected[k] = static_cast<int>(r.selection.indices.size());
        o.second_length[k] = r.second_length;
        o.recall[k] = lesion.empty() ? 0.0
                                     : LesionRecall(r.selection.indices, lesion, options.pgfc.s);
      }
      return o;
    }();
  });

  for (auto& o : outcomes) {
    if (!o.ok()) return o.status();
    report.slides.push_back(std::move(*o));
  }
  for (SelectionMode mode :
       {SelectionMode::kPgfc, SelectionMode::kRandom, SelectionMode::kNone}) {
    const int k = ModeSlot(mode);
    ArmSummary a;
    a.mode = mode;
    int counted = 0;
    double sum = 0.0, sum_sq = 0.0, sel = 0.0, second = 0.0;
    for (const SlideOutcome& o : report.slides) {
      sel += o.selected[k];
      second += o.second_length[k];
      if (o.lesion_cells == 0) continue;
      ++counted;
      sum += o.recall[k];
      sum_sq += o.recall[k] * o.recall[k];
    }
    const double n_slides = static_cast<double>(report.slides.size());
    a.mean_selected = sel / n_slides;
    a.mean_second_length = second / n_slides;
    if (counted > 0) {
      a.mean_recall = sum / counted;
      a.std_recall = std::sqrt(std::max(0.0, sum_sq / counted - a.mean_recall * a.mean_recall));
    }
    report.arms.push_back(a);
  }
  for (const SlideOutcome& o : report.slides) {
    if (o.lesion_cells == 0) ++report.slides_skipped;
  }
  // Token budget per arm follows from lengths: detail = second - first.
  for (ArmSummary& a : report.arms) {
    const int k = ModeSlot(a.mode);
    double img = 0.0, txt = 0.0;
    for (const SlideOutcome& o : report.slides) {
      const int detail = o.second_length[k] - o.first_length;
      const int pooled = o.selected[k] * (grid.size() / (options.pgfc.pool_factor *
                                                          options.pgfc.pool_factor));
      img += pooled;
      txt += detail - pooled;
    }
    a.mean_detail_image_tokens = img / report.slides.size();
    a.mean_detail_text_tokens = txt / report.slides.size();
  }
  return report;
}

std::string AblationReportJson(const AblationReport& r) {
  const AblationOptions& o = r.options;
  json j;
  j["schema_version"] = kAblationSchemaVersion;
  j["kind"] = "ablation";
  json opts;
  opts["seed"] = o.seed;
  opts["trials"] = o.slides.empty() ? o.trials : static_cast<int>(o.slides.size());
  json slide_list = json::array();
  for (const auto& p : o.slides) slide_list.push_back(p.generic_string());
  opts["slides"] = slide_list;
  opts["slide_px"] = o.slide_px;
  opts["n_lesions"] = o.n_lesions;
  opts["probe_slides"] = o.probe_slides;
  opts["ridge"] = o.ridge;
  opts["probe_scale"] = o.probe_scale;
  opts["lesion_coverage"] = o.lesion_coverage;
  opts["prompt"] = o.prompt;
  opts["s"] = o.pgfc.s;
  opts["layer"] = o.pgfc.layer;
  opts["pool_factor"] = o.pgfc.pool_factor;
  opts["max_tokens"] = o.pgfc.max_tokens;
  opts["multiples"] = o.pgfc.multiples;
  opts["aux"] = o.pgfc.aux;
  j["options"] = opts;
  json model;
  model["seed"] = r.model.seed;
  model["d_model"] = r.model.d_model;
  model["n_heads"] = r.model.n_heads;
  model["n_layers_decoder"] = r.model.n_layers_decoder;
  model["n_layers_vit"] = r.model.n_layers_vit;
  model["grid"] = {r.model.grid.rows, r.model.grid.cols};
  model["patch_px"] = r.model.patch_px;
  j["model"] = model;
  json probe;
  probe["cells"] = r.probe.cells;
  probe["positives"] = r.probe.positives;
  probe["train_accuracy"] = r.probe.train_accuracy;
  probe["bias"] = r.probe.probe.bias;
  probe["scale"] = r.probe.probe.scale;
  probe["weights"] = r.probe.probe.weights;
  j["probe"] = probe;
  json arms = json::object();
  for (const ArmSummary& a : r.arms) {
    json arm;
    arm["mean_lesion_recall"] = a.mean_recall;
    arm["std_lesion_recall"] = a.std_recall;
    arm["mean_patches"] = a.mean_selected;
    arm["mean_detail_image_tokens"] = a.mean_detail_image_tokens;
    arm["mean_detail_text_tokens"] = a.mean_detail_text_tokens;
    arm["mean_second_pass_length"] = a.mean_second_length;
    arms[std::string(ModeName(a.mode))] = arm;
  }
  j["arms"] = arms;
  j["slides_evaluated"] = static_cast<int>(r.slides.size()) - r.slides_skipped;
  j["slides_skipped"] = r.slides_skipped;
  j["recall_gap_pgfc_minus_random"] =
      r.Recall(SelectionMode::kPgfc) - r.Recall(SelectionMode::kRandom);
  json per = json::array();
  for (const SlideOutcome& s : r.slides) {
    json e;
    e["id"] = s.id;
    e["lesion_cells"] = s.lesion_cells;
    e["tissue_cells"] = s.tissue_cells;
    e["first_pass_length"] = s.first_length;
    for (SelectionMode m :
         {SelectionMode::kPgfc, SelectionMode::kRandom, SelectionMode::kNone}) {
      json arm;
      arm["recall"] = s.recall[ModeSlot(m)];
      arm["patches"] = s.selected[ModeSlot(m)];
      arm["second_pass_length"] = s.second_length[ModeSlot(m)];
      e[std::string(ModeName(m))] = arm;
    }
    per.push_back(e);
  }
  j["per_slide"] = per;
  return j.dump(2) + "\n";
}

}  // namespace pgfc_lab
