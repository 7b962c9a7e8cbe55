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

#ifndef PGFC_LAB_PYRAMID_H_
#define PGFC_LAB_PYRAMID_H_

/// @file pyramid.h
/// @brief Tiled multi-resolution slide store.
///
/// On disk a pyramid is a directory:
///
///   manifest.json
///   level_<k>/tile_<r>_<c>.png
///
/// Level 0 is full resolution; level k has dimensions
/// ceil(level0 / downsample^k) on both axes. Tiles are 8-bit RGB PNGs of
/// exactly tile_size x tile_size pixels; edge tiles are zero-padded on the
/// bottom/right. The topmost level fits inside a single tile.
///
/// A loaded PyramidImage keeps every level decoded in memory and is
/// immutable, so concurrent reads need no synchronization.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "pgfc_lab/image.h"

namespace pgfc_lab {

struct LevelDesc {
  int index = 0;
  int width = 0;
  int height = 0;
  int rows = 0;  // tile rows
  int cols = 0;  // tile columns
  friend bool operator==(const LevelDesc&, const LevelDesc&) = default;
};

/// Pixel window at a given pyramid level.
struct Region {
  int level = 0;
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
  friend bool operator==(const Region&, const Region&) = default;
};

/// Thumbnail / token grid shape.
struct GridShape {
  int rows = 0;
  int cols = 0;
  int size() const { return rows * cols; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

/// Row-major grid of {0, 1} cells.
struct BinaryGrid {
  GridShape shape;
  std::vector<uint8_t> cells;

  BinaryGrid() = default;
  BinaryGrid(GridShape s, uint8_t fill)
      : shape(s), cells(static_cast<size_t>(s.size()), fill) {}
  bool at(int i) const { return cells[i] != 0; }
  int Count() const;
};

class PyramidImage {
 public:
  PyramidImage() = default;

  /// Builds all levels from a full-resolution image by repeated 2x box
  /// downsampling until both axes fit in one tile (at least two levels).
  static absl::StatusOr<PyramidImage> FromBaseImage(
      Image level0, int tile_size, std::optional<uint64_t> seed);

  /// Wraps pre-built levels after validating every structural invariant.
  static absl::StatusOr<PyramidImage> FromLevels(
      std::vector<Image> levels, int tile_size, int downsample,
      std::optional<uint64_t> seed);

  int tile_size() const { return tile_size_; }
  int downsample() const { return downsample_; }
  int level_count() const { return static_cast<int>(levels_.size()); }
  const std::vector<LevelDesc>& levels() const { return descs_; }
  const LevelDesc& level_desc(int k) const { return descs_[k]; }
  const Image& level_image(int k) const { return levels_[k]; }
  int width() const { return descs_.front().width; }
  int height() const { return descs_.front().height; }
  std::optional<uint64_t> seed() const { return seed_; }
  const std::filesystem::path& manifest_path() const { return manifest_path_; }
  void set_manifest_path(std::filesystem::path p) { manifest_path_ = std::move(p); }

  /// Stored tile (r, c) of level k, zero-padded to tile_size.
  absl::StatusOr<Image> Tile(int level, int row, int col) const;

  /// manifest.json contents (pretty-printed, trailing newline).
  std::string ManifestJson() const;

  absl::Status ValidateRegion(const Region& r) const;

 private:
  int tile_size_ = 0;
  int downsample_ = 2;
  std::vector<LevelDesc> descs_;
  std::vector<Image> levels_;
  std::optional<uint64_t> seed_;
  std::filesystem::path manifest_path_;
};

/// Writes manifest.json and every tile under `dir` (created if needed).
absl::Status WritePyramid(const PyramidImage& p, const std::filesystem::path& dir);

/// Loads a pyramid from its directory or its manifest.json path. Errors:
/// NotFound naming a missing tile, InvalidArgument for malformed manifests
/// or dimension mismatches.
absl::StatusOr<PyramidImage> ReadPyramid(const std::filesystem::path& path);

/// rows*cell_px x cols*cell_px area-average rendering of the topmost level.
/// Fails when the grid aspect differs from the slide aspect by more than
/// `aspect_tolerance` (relative).
absl::StatusOr<Image> Thumbnail(const PyramidImage& p, GridShape grid,
                                int cell_px, double aspect_tolerance = 0.25);

/// Pixel-exact crop of a level.
absl::StatusOr<Image> ExtractRegion(const PyramidImage& p, const Region& r);

/// Tissue cells of `img` split into `grid`. A cell is background when more
/// than `background_majority` of its pixels have luminance above
/// `lum_threshold`; every other cell is tissue (set to 1).
BinaryGrid TissueMask(const Image& img, GridShape grid,
                      double lum_threshold = 0.9,
                      double background_majority = 0.8);

/// Footprint of row-major thumbnail cell `index` at `target_level`. Cell
/// edges are ceil(i * extent / n), which partitions the level exactly.
absl::StatusOr<Region> MapGridIndexToRegion(int index, GridShape grid,
                                            const PyramidImage& p,
                                            int target_level);

/// Inverse of MapGridIndexToRegion for a pixel position at a level.
int GridIndexAt(double x, double y, GridShape grid, const LevelDesc& level);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_PYRAMID_H_
