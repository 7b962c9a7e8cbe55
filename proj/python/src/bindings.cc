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

// Python bindings. Status errors surface as ValueError / FileNotFoundError /
// RuntimeError; rasters cross the boundary as numpy uint8 arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "pgfc_lab/checkpoint.h"
#include "pgfc_lab/mask_codec.h"
#include "pgfc_lab/pgfc.h"
#include "pgfc_lab/promptforge.h"
#include "pgfc_lab/pyramid.h"
#include "pgfc_lab/synthetic_slide.h"
#include "pgfc_lab/wire_format.h"

namespace py = pybind11;

namespace pgfc_lab {
namespace {

using U8Array = py::array_t<uint8_t, py::array::c_style | py::array::forcecast>;
using BoxTuple = std::tuple<double, double, double, double>;
using Ring = std::vector<std::pair<double, double>>;

[[noreturn]] void Raise(const absl::Status& s) {
  const std::string msg(s.message());
  switch (s.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kOutOfRange:
      throw py::value_error(msg);
    case absl::StatusCode::kNotFound:
      PyErr_SetString(PyExc_FileNotFoundError, msg.c_str());
      throw py::error_already_set();
    default:
      throw std::runtime_error(s.ToString());
  }
}

void Check(const absl::Status& s) {
  if (!s.ok()) Raise(s);
}

template <typename T>
T Unwrap(absl::StatusOr<T> v) {
  if (!v.ok()) Raise(v.status());
  return *std::move(v);
}

BinaryMask ToMask(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("mask must be 2-D");
  BinaryMask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  const uint8_t* src = a.data();
  for (size_t i = 0; i < m.cells.size(); ++i) m.cells[i] = src[i] != 0;
  return m;
}

U8Array FromMask(const BinaryMask& m) {
  U8Array out({m.height, m.width});
  std::copy(m.cells.begin(), m.cells.end(), out.mutable_data());
  return out;
}

U8Array FromImage(const Image& img) {
  U8Array out({img.height, img.width, 3});
  std::copy(img.pixels.begin(), img.pixels.end(), out.mutable_data());
  return out;
}

std::vector<BBox> ToBoxes(const std::vector<BoxTuple>& in) {
  std::vector<BBox> out;
  for (const auto& [x1, y1, x2, y2] : in) out.push_back({x1, y1, x2, y2});
  return out;
}

std::vector<BoxTuple> FromBoxes(const std::vector<BBox>& in) {
  std::vector<BoxTuple> out;
  for (const BBox& b : in) out.emplace_back(b.x1, b.y1, b.x2, b.y2);
  return out;
}

std::vector<Polygon> ToPolygons(const std::vector<Ring>& in) {
  std::vector<Polygon> out;
  for (const Ring& r : in) {
    Polygon p;
    for (const auto& [x, y] : r) p.vertices.push_back({x, y});
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Ring> FromPolygons(const std::vector<Polygon>& in) {
  std::vector<Ring> out;
  for (const Polygon& p : in) {
    Ring r;
    for (const Point2& v : p.vertices) r.emplace_back(v.x, v.y);
    out.push_back(std::move(r));
  }
  return out;
}

AttentionGrid MakeGrid(const std::vector<double>& values, int rows, int cols,
                       std::optional<std::vector<uint8_t>> tissue) {
  AttentionGrid g = Unwrap(ToGrid(values, GridShape{rows, cols}));
  if (tissue) {
    if (tissue->size() != g.tissue.cells.size()) throw py::value_error("tissue size mismatch");
    g.tissue.cells = *tissue;
  }
  return g;
}

py::dict SelectionDict(const SelectionResult& r) {
  py::dict d;
  d["mode"] = std::string(ModeName(r.mode));
  d["indices"] = r.indices;
  d["scores"] = r.scores;
  d["truncated"] = r.truncated;
  std::vector<std::tuple<int, int, int, int, int>> regions;
  for (const Region& g : r.regions) regions.emplace_back(g.level, g.x, g.y, g.w, g.h);
  d["regions"] = regions;
  return d;
}

}  // namespace
}  // namespace pgfc_lab

PYBIND11_MODULE(_core, m) {
  using namespace pgfc_lab;
  m.doc() = "Native core of pgfc_lab";

  // -- wire formats
  m.def("serialize_bbox_list", [](const std::vector<BoxTuple>& boxes) {
    return Unwrap(SerializeBboxList(ToBoxes(boxes)));
  });
  m.def("parse_bbox_list", [](const std::string& text) {
    return FromBoxes(Unwrap(ParseBboxList(text)));
  });
  m.def("serialize_contour_list", [](const std::vector<Ring>& polys) {
    return Unwrap(SerializeContourList(ToPolygons(polys)));
  });
  m.def("parse_contour_list", [](const std::string& text) {
    return FromPolygons(Unwrap(ParseContourList(text)));
  });

  // -- masks and metrics
  m.def("mask_to_polygons", [](const U8Array& a, int max_vertices) {
    return FromPolygons(MaskToPolygons(ToMask(a), max_vertices));
  }, py::arg("mask"), py::arg("max_vertices") = 50);
  m.def("polygon_to_mask", [](const std::vector<Ring>& polys, int height, int width) {
    return FromMask(Unwrap(PolygonToMask(ToPolygons(polys), height, width)));
  }, py::arg("polygons"), py::arg("height"), py::arg("width"));
  m.def("mask_to_bboxes", [](const U8Array& a) { return FromBoxes(MaskToBBoxes(ToMask(a))); });
  m.def("dice", [](const U8Array& a, const U8Array& b) {
    return Unwrap(Dice(ToMask(a), ToMask(b)));
  });
  m.def("mask_iou", [](const U8Array& a, const U8Array& b) {
    return Unwrap(MaskIou(ToMask(a), ToMask(b)));
  });
  m.def("box_iou", [](const BoxTuple& a, const BoxTuple& b) {
    return Iou(ToBoxes({a})[0], ToBoxes({b})[0]);
  });

  // -- selection
  m.def("select_top_s", [](const std::vector<double>& values, int rows, int cols, int s,
                           std::optional<std::vector<uint8_t>> tissue) {
    return SelectionDict(Unwrap(SelectTopS(MakeGrid(values, rows, cols, tissue), s)));
  }, py::arg("values"), py::arg("rows"), py::arg("cols"), py::arg("s"),
        py::arg("tissue") = py::none());
  m.def("random_selection", [](const std::vector<double>& values, int rows, int cols, int s,
                               uint64_t seed, std::optional<std::vector<uint8_t>> tissue) {
    return SelectionDict(
        Unwrap(RandomSelection(MakeGrid(values, rows, cols, tissue), s, seed)));
  }, py::arg("values"), py::arg("rows"), py::arg("cols"), py::arg("s"), py::arg("seed"),
        py::arg("tissue") = py::none());
  m.def("positional_text", [](int index, int rows, int cols) {
    return PositionalText(index, GridShape{rows, cols});
  });

  // -- slides
  py::class_<PyramidImage>(m, "Pyramid")
      .def_static("open", [](const std::filesystem::path& p) { return Unwrap(ReadPyramid(p)); })
      .def_property_readonly("width", &PyramidImage::width)
      .def_property_readonly("height", &PyramidImage::height)
      .def_property_readonly("level_count", &PyramidImage::level_count)
      .def_property_readonly("tile_size", &PyramidImage::tile_size)
      .def("level_size", [](const PyramidImage& p, int k) {
        if (k < 0 || k >= p.level_count()) throw py::index_error("level");
        return std::make_pair(p.level_desc(k).width, p.level_desc(k).height);
      })
      .def("region", [](const PyramidImage& p, int level, int x, int y, int w, int h) {
        return FromImage(Unwrap(ExtractRegion(p, Region{level, x, y, w, h})));
      }, py::arg("level"), py::arg("x"), py::arg("y"), py::arg("w"), py::arg("h"));

  m.def("generate_slide", [](const std::filesystem::path& out, uint64_t seed, int width,
                             int height, int lesions, int tile) {
    SlideSpec spec{width, height, lesions, seed, tile};
    SyntheticSlide s = Unwrap(CreateSyntheticWsi(spec));
    Check(WritePyramid(s.pyramid, out));
    Check(WriteGroundTruth(s.truth, out / "ground_truth.json"));
    std::vector<Ring> polys;
    for (const Lesion& l : s.truth.lesions) {
      Ring r;
      for (const Point2& v : l.polygon) r.emplace_back(v.x, v.y);
      polys.push_back(std::move(r));
    }
    return polys;
  }, py::arg("out"), py::arg("seed") = 0, py::arg("width") = 4096, py::arg("height") = 4096,
        py::arg("lesions") = 3, py::arg("tile") = 256,
        "Writes a synthetic slide; returns lesion polygons in level-0 pixels.");

  // -- model and inference
  py::class_<Model>(m, "Model")
      .def_static("create", [](uint64_t seed) {
        ModelConfig cfg;
        cfg.seed = seed;
        return Unwrap(Model::Create(cfg));
      }, py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& p) { return Unwrap(LoadCheckpoint(p)); })
      .def("save", [](const Model& model, const std::filesystem::path& p) {
        Check(SaveCheckpoint(model, p));
      });

  m.def("infer", [](const Model& model, const PyramidImage& p, const std::string& prompt,
                    const std::string& mode, int s, int layer, int pool_factor, uint64_t seed,
                    int max_tokens) {
    PgfcOptions o;
    o.mode = Unwrap(ParseMode(mode));
    o.s = s;
    o.layer = layer;
    o.pool_factor = pool_factor;
    o.seed = seed;
    o.max_tokens = max_tokens;
    PgfcResult r;
    {
      py::gil_scoped_release release;
      r = Unwrap(PgfcInfer(model, p, prompt, o));
    }
    py::dict d;
    d["answer_ids"] = r.answer.ids;
    d["first_pass_ids"] = r.first_answer.ids;
    d["first_pass_length"] = r.first_length;
    d["second_pass_length"] = r.second_length;
    d["detail_image_tokens"] = r.detail_image_tokens;
    d["detail_text_tokens"] = r.detail_text_tokens;
    d["selection"] = SelectionDict(r.selection);
    d["grid"] = r.grid.values;
    d["grid_shape"] = std::make_pair(r.grid.shape.rows, r.grid.shape.cols);
    return d;
  }, py::arg("model"), py::arg("slide"), py::arg("prompt"), py::arg("mode") = "pgfc",
        py::arg("s") = 8, py::arg("layer") = 0, py::arg("pool_factor") = 2,
        py::arg("seed") = 0, py::arg("max_tokens") = 8);

  // -- prompt forge
  m.def("task_kinds", [] {
    std::vector<std::string> out;
    for (TaskKind k : AllTaskKinds()) out.emplace_back(TaskKindName(k));
    return out;
  });
  m.def("prompt_templates", [](const std::string& kind) {
    const auto t = PromptBank::Default().Templates(Unwrap(ParseTaskKind(kind)));
    return std::vector<std::string>(t.begin(), t.end());
  });
  m.def("read_jsonl", [](const std::filesystem::path& p) {
    std::vector<std::string> lines;
    for (const SampleRecord& r : Unwrap(ReadJsonl(p))) lines.push_back(RecordToJsonLine(r));
    return lines;
  }, "Validated records, re-serialized as canonical JSON lines.");
}
