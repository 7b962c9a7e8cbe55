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

#include "pgfc_lab/pyramid.h"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "json.hpp"
#include "pgfc_lab/parallel.h"
#include "pgfc_lab/png_io.h"
#include "pgfc_lab/status_macros.h"

namespace pgfc_lab {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int CeilDiv(int a, int b) { return (a + b - 1) / b; }

LevelDesc Describe(int index, int w, int h, int tile) {
  return LevelDesc{index, w, h, CeilDiv(h, tile), CeilDiv(w, tile)};
}

std::string TileRelPath(int level, int row, int col) {
  return absl::StrFormat("level_%d/tile_%d_%d.png", level, row, col);
}

// Validates level geometry against level 0 and the tile size.
absl::Status CheckLevelGeometry(const std::vector<LevelDesc>& descs,
                                int tile_size, int downsample) {
  if (tile_size <= 0) return absl::InvalidArgumentError("tile_size must be positive");
  if (downsample < 2) return absl::InvalidArgumentError("downsample must be >= 2");
  if (descs.size() < 2) {
    return absl::InvalidArgumentError("pyramid needs at least 2 levels");
  }
  if (descs[0].width <= 0 || descs[0].height <= 0) {
    return absl::InvalidArgumentError("level 0 has empty dimensions");
  }
  int ew = descs[0].width, eh = descs[0].height;
  for (size_t k = 0; k < descs.size(); ++k) {
    if (k > 0) {
      ew = CeilDiv(ew, downsample);
      eh = CeilDiv(eh, downsample);
    }
    const LevelDesc& d = descs[k];
    if (d.index != static_cast<int>(k)) {
      return absl::InvalidArgumentError(
          absl::StrFormat("level %d listed with index %d", k, d.index));
    }
    if (d.width != ew || d.height != eh) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "dimension mismatch at level %d: %dx%d, expected %dx%d", k, d.width,
          d.height, ew, eh));
    }
    if (d.rows != CeilDiv(eh, tile_size) || d.cols != CeilDiv(ew, tile_size)) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "tile grid mismatch at level %d: %dx%d tiles, expected %dx%d", k,
          d.rows, d.cols, CeilDiv(eh, tile_size), CeilDiv(ew, tile_size)));
    }
  }
  const LevelDesc& top = descs.back();
  if (top.width > tile_size || top.height > tile_size) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "topmost level %dx%d does not fit in one %d px tile", top.width,
        top.height, tile_size));
  }
  return absl::OkStatus();
}

}  // namespace

int BinaryGrid::Count() const {
  return static_cast<int>(std::count(cells.begin(), cells.end(), 1));
}

absl::StatusOr<PyramidImage> PyramidImage::FromBaseImage(
    Image level0, int tile_size, std::optional<uint64_t> seed) {
  if (level0.empty()) return absl::InvalidArgumentError("empty base image");
  if (tile_size <= 0) return absl::InvalidArgumentError("tile_size must be positive");
  std::vector<Image> levels;
  levels.push_back(std::move(level0));
  while (levels.size() < 2 || levels.back().width > tile_size ||
         levels.back().height > tile_size) {
    levels.push_back(Downsample2x(levels.back()));
  }
  return FromLevels(std::move(levels), tile_size, 2, seed);
}

absl::StatusOr<PyramidImage> PyramidImage::FromLevels(
    std::vector<Image> levels, int tile_size, int downsample,
    std::optional<uint64_t> seed) {
  PyramidImage p;
  p.tile_size_ = tile_size;
  p.downsample_ = downsample;
  p.seed_ = seed;
  for (size_t k = 0; k < levels.size(); ++k) {
    p.descs_.push_back(Describe(static_cast<int>(k), levels[k].width,
                                levels[k].height, std::max(tile_size, 1)));
  }
  PGFC_RETURN_IF_ERROR(CheckLevelGeometry(p.descs_, tile_size, downsample));
  p.levels_ = std::move(levels);
  return p;
}

absl::StatusOr<Image> PyramidImage::Tile(int level, int row, int col) const {
  if (level < 0 || level >= level_count()) {
    return absl::OutOfRangeError(absl::StrFormat("no level %d", level));
  }
  const LevelDesc& d = descs_[level];
  if (row < 0 || row >= d.rows || col < 0 || col >= d.cols) {
    return absl::OutOfRangeError(
        absl::StrFormat("no tile (%d, %d) at level %d", row, col, level));
  }
  const int x = col * tile_size_, y = row * tile_size_;
  const int w = std::min(tile_size_, d.width - x);
  const int h = std::min(tile_size_, d.height - y);
  Image tile(tile_size_, tile_size_, 0);
  PGFC_ASSIGN_OR_RETURN(Image interior, Crop(levels_[level], x, y, w, h));
  Paste(interior, 0, 0, tile);
  return tile;
}

std::string PyramidImage::ManifestJson() const {
  json m;
  m["tile_size"] = tile_size_;
  m["downsample"] = downsample_;
  json levels = json::array();
  for (const LevelDesc& d : descs_) {
    levels.push_back({{"index", d.index},
                      {"width", d.width},
                      {"height", d.height},
                      {"rows", d.rows},
                      {"cols", d.cols}});
  }
  m["levels"] = std::move(levels);
  m["seed"] = seed_.has_value() ? json(*seed_) : json(nullptr);
  return m.dump(2) + "\n";
}

absl::Status PyramidImage::ValidateRegion(const Region& r) const {
  if (r.level < 0 || r.level >= level_count()) {
    return absl::OutOfRangeError(absl::StrFormat("no level %d", r.level));
  }
  const LevelDesc& d = descs_[r.level];
  if (r.w <= 0 || r.h <= 0 || r.x < 0 || r.y < 0 || r.x + r.w > d.width ||
      r.y + r.h > d.height) {
    return absl::OutOfRangeError(absl::StrFormat(
        "region (%d,%d %dx%d) outside level %d (%dx%d)", r.x, r.y, r.w, r.h,
        r.level, d.width, d.height));
  }
  return absl::OkStatus();
}

absl::Status WritePyramid(const PyramidImage& p, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return absl::PermissionDeniedError(absl::StrCat("mkdir ", dir.string(), ": ", ec.message()));
  struct Job {
    int level, row, col;
  };
  std::vector<Job> jobs;
  for (const LevelDesc& d : p.levels()) {
    fs::create_directories(dir / absl::StrCat("level_", d.index), ec);
    if (ec) return absl::PermissionDeniedError(ec.message());
    for (int r = 0; r < d.rows; ++r) {
      for (int c = 0; c < d.cols; ++c) jobs.push_back({d.index, r, c});
    }
  }
  std::vector<absl::Status> results(jobs.size());
  ParallelFor(jobs.size(), [&](size_t i) {
    const Job& j = jobs[i];
    auto tile = p.Tile(j.level, j.row, j.col);
    if (!tile.ok()) {
      results[i] = tile.status();
      return;
    }
    results[i] = WritePng(*tile, dir / TileRelPath(j.level, j.row, j.col));
  });
  for (const auto& s : results) PGFC_RETURN_IF_ERROR(s);
  return WriteFileBytes(dir / "manifest.json", p.ManifestJson());
}

absl::StatusOr<PyramidImage> ReadPyramid(const fs::path& path) {
  const fs::path manifest_path =
      fs::is_directory(path) ? path / "manifest.json" : path;
  const fs::path dir = manifest_path.parent_path();
  PGFC_ASSIGN_OR_RETURN(std::string text, ReadFileBytes(manifest_path));

  json m = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (m.is_discarded() || !m.is_object()) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed manifest ", manifest_path.string(), ": not JSON"));
  }
  auto malformed = [&](std::string_view what) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed manifest ", manifest_path.string(), ": ", std::string(what)));
  };
  auto get_int = [](const json& obj, const char* key) -> std::optional<int> {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number_integer()) return std::nullopt;
    return it->get<int>();
  };
  const auto tile_size = get_int(m, "tile_size");
  const auto downsample = get_int(m, "downsample");
  if (!tile_size || !downsample) return malformed("missing tile_size/downsample");
  auto levels_it = m.find("levels");
  if (levels_it == m.end() || !levels_it->is_array()) return malformed("missing levels");
  std::optional<uint64_t> seed;
  if (auto it = m.find("seed"); it != m.end() && !it->is_null()) {
    if (!it->is_number_unsigned() && !it->is_number_integer()) {
      return malformed("seed must be an integer or null");
    }
    seed = it->get<uint64_t>();
  }

  std::vector<LevelDesc> descs;
  for (const json& l : *levels_it) {
    if (!l.is_object()) return malformed("level entry is not an object");
    auto index = get_int(l, "index"), width = get_int(l, "width"),
         height = get_int(l, "height"), rows = get_int(l, "rows"),
         cols = get_int(l, "cols");
    if (!index || !width || !height || !rows || !cols) {
      return malformed("level entry missing fields");
    }
    descs.push_back({*index, *width, *height, *rows, *cols});
  }
  PGFC_RETURN_IF_ERROR(CheckLevelGeometry(descs, *tile_size, *downsample));

  struct Job {
    int level, row, col;
  };
  std::vector<Job> jobs;
  std::vector<Image> levels;
  for (const LevelDesc& d : descs) {
    levels.emplace_back(d.width, d.height);
    for (int r = 0; r < d.rows; ++r) {
      for (int c = 0; c < d.cols; ++c) jobs.push_back({d.index, r, c});
    }
  }
  // Missing tiles are reported before any decoding work starts.
  for (const Job& j : jobs) {
    const fs::path tile_path = dir / TileRelPath(j.level, j.row, j.col);
    if (!fs::exists(tile_path)) {
      return absl::NotFoundError(
          absl::StrCat("missing tile ", TileRelPath(j.level, j.row, j.col)));
    }
  }
  std::vector<absl::Status> results(jobs.size());
  ParallelFor(jobs.size(), [&](size_t i) {
    const Job& j = jobs[i];
    const std::string rel = TileRelPath(j.level, j.row, j.col);
    auto tile = ReadPng(dir / rel);
    if (!tile.ok()) {
      results[i] = tile.status();
      return;
    }
    if (tile->width != *tile_size || tile->height != *tile_size) {
      results[i] = absl::InvalidArgumentError(absl::StrFormat(
          "dimension mismatch: tile %s is %dx%d, expected %dx%d", rel,
          tile->width, tile->height, *tile_size, *tile_size));
      return;
    }
    // Tiles of one level never overlap, so concurrent pastes are disjoint.
    Paste(*tile, j.col * *tile_size, j.row * *tile_size, levels[j.level]);
  });
  for (const auto& s : results) PGFC_RETURN_IF_ERROR(s);

  PGFC_ASSIGN_OR_RETURN(
      PyramidImage p,
      PyramidImage::FromLevels(std::move(levels), *tile_size, *downsample, seed));
  p.set_manifest_path(manifest_path);
  return p;
}

absl::StatusOr<Image> Thumbnail(const PyramidImage& p, GridShape grid,
                                int cell_px, double aspect_tolerance) {
  if (grid.rows <= 0 || grid.cols <= 0 || cell_px <= 0) {
    return absl::InvalidArgumentError("grid and cell size must be positive");
  }
  const double slide_aspect = static_cast<double>(p.width()) / p.height();
  const double grid_aspect = static_cast<double>(grid.cols) / grid.rows;
  const double ratio = grid_aspect / slide_aspect;
  if (std::max(ratio, 1.0 / ratio) > 1.0 + aspect_tolerance) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "grid %dx%d distorts a %dx%d slide beyond tolerance %.3f", grid.rows,
        grid.cols, p.width(), p.height(), aspect_tolerance));
  }
  const Image& top = p.level_image(p.level_count() - 1);
  return AreaResize(top, grid.cols * cell_px, grid.rows * cell_px);
}

absl::StatusOr<Image> ExtractRegion(const PyramidImage& p, const Region& r) {
  PGFC_RETURN_IF_ERROR(p.ValidateRegion(r));
  return Crop(p.level_image(r.level), r.x, r.y, r.w, r.h);
}

BinaryGrid TissueMask(const Image& img, GridShape grid, double lum_threshold,
                      double background_majority) {
  BinaryGrid mask(grid, 1);
  for (int r = 0; r < grid.rows; ++r) {
    const int y0 = CeilDiv(r * img.height, grid.rows);
    const int y1 = CeilDiv((r + 1) * img.height, grid.rows);
    for (int c = 0; c < grid.cols; ++c) {
      const int x0 = CeilDiv(c * img.width, grid.cols);
      const int x1 = CeilDiv((c + 1) * img.width, grid.cols);
      int bright = 0, total = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          ++total;
          if (Luminance(img.At(x, y)) > lum_threshold) ++bright;
        }
      }
      if (total > 0 && bright > background_majority * total) {
        mask.cells[r * grid.cols + c] = 0;
      }
    }
  }
  return mask;
}

absl::StatusOr<Region> MapGridIndexToRegion(int index, GridShape grid,
                                            const PyramidImage& p,
                                            int target_level) {
  if (grid.rows <= 0 || grid.cols <= 0) {
    return absl::InvalidArgumentError("grid must be non-empty");
  }
  if (index < 0 || index >= grid.size()) {
    return absl::OutOfRangeError(absl::StrFormat(
        "grid index %d outside [0, %d)", index, grid.size()));
  }
  if (target_level < 0 || target_level >= p.level_count()) {
    return absl::OutOfRangeError(absl::StrFormat("no level %d", target_level));
  }
  const LevelDesc& d = p.level_desc(target_level);
  if (d.width < grid.cols || d.height < grid.rows) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "level %d (%dx%d) is smaller than the %dx%d grid", target_level,
        d.width, d.height, grid.rows, grid.cols));
  }
  const int r = index / grid.cols, c = index % grid.cols;
  const int x0 = CeilDiv(c * d.width, grid.cols);
  const int x1 = CeilDiv((c + 1) * d.width, grid.cols);
  const int y0 = CeilDiv(r * d.height, grid.rows);
  const int y1 = CeilDiv((r + 1) * d.height, grid.rows);
  return Region{target_level, x0, y0, x1 - x0, y1 - y0};
}

int GridIndexAt(double x, double y, GridShape grid, const LevelDesc& level) {
  const int c = std::clamp(
      static_cast<int>(std::floor(x * grid.cols / level.width)), 0,
      grid.cols - 1);
  const int r = std::clamp(
      static_cast<int>(std::floor(y * grid.rows / level.height)), 0,
      grid.rows - 1);
  return r * grid.cols + c;
}

}  // namespace pgfc_lab
