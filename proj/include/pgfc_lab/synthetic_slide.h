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

#ifndef PGFC_LAB_SYNTHETIC_SLIDE_H_
#define PGFC_LAB_SYNTHETIC_SLIDE_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "pgfc_lab/geometry.h"
#include "pgfc_lab/pyramid.h"

namespace pgfc_lab {

struct SlideSpec {
  int width = 4096;
  int height = 4096;
  int n_lesions = 3;
  uint64_t seed = 0;
  int tile_size = 256;
};

/// Elliptic tissue blob in level-0 pixels.
struct TissueBlob {
  double cx = 0, cy = 0, rx = 0, ry = 0;
};

/// Analytic tissue field: a pixel is tissue iff Field(x, y) > 0. Stored with
/// the ground truth so tissue coverage can be re-evaluated exactly.
struct TissueModel {
  int width = 0;
  int height = 0;
  std::vector<TissueBlob> blobs;
  int lattice = 6;             // value-noise lattice cells per axis
  std::vector<double> noise;   // (lattice + 1)^2 samples in [0, 1)
  double amplitude = 0.35;

  double Field(double x, double y) const;
  bool IsTissue(double x, double y) const { return Field(x, y) > 0.0; }
};

struct Lesion {
  std::string label;
  std::vector<Point2> polygon;  // level-0 pixel coordinates
};

struct GroundTruth {
  uint64_t seed = 0;
  std::vector<Lesion> lesions;
  TissueModel tissue;
};

struct SyntheticSlide {
  PyramidImage pyramid;
  GroundTruth truth;
};

/// White background, low-frequency tissue blobs, and dark-dot lesion texture
/// inside each ground-truth polygon. Identical specs give identical bytes.
/// Errors: dimensions below 4 tiles; lesions that cannot be placed without
/// overlap after bounded retries.
absl::StatusOr<SyntheticSlide> CreateSyntheticWsi(const SlideSpec& spec);

/// Fraction of `r` (a level-0 region) covered by lesion polygons, estimated
/// on a `samples` x `samples` lattice of sub-pixel centers.
double LesionCoverage(const GroundTruth& gt, const Region& r, int samples = 16);
/// Same for tissue.
double TissueCoverage(const GroundTruth& gt, const Region& r, int samples = 16);

/// Thumbnail cells (row-major) whose level-0 footprint has lesion coverage
/// of at least `min_coverage`.
absl::StatusOr<std::vector<int>> LesionCells(const GroundTruth& gt,
                                             const PyramidImage& p,
                                             GridShape grid,
                                             double min_coverage = 0.25);

absl::Status WriteGroundTruth(const GroundTruth& gt,
                              const std::filesystem::path& path);
absl::StatusOr<GroundTruth> ReadGroundTruth(const std::filesystem::path& path);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_SYNTHETIC_SLIDE_H_
