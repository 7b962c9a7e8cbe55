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

#ifndef PGFC_LAB_GEOMETRY_H_
#define PGFC_LAB_GEOMETRY_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"

namespace pgfc_lab {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Axis-aligned box in relative [0, 1] coordinates, top-left/bottom-right.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double Area() const { return (x2 - x1) * (y2 - y1); }
  /// Ordered corners inside the unit square.
  bool IsValid() const;
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Ordered vertex ring; coordinates are relative unless stated otherwise.
struct Polygon {
  std::vector<Point2> vertices;
  friend bool operator==(const Polygon&, const Polygon&) = default;
};

/// One `<bbox_list>`; `label` is the class attribute when classed.
struct DetectionGroup {
  std::optional<std::string> label;
  std::vector<BBox> boxes;
  friend bool operator==(const DetectionGroup&, const DetectionGroup&) =
      default;
};

struct DetectionSet {
  std::vector<DetectionGroup> groups;
  size_t BoxCount() const;
  friend bool operator==(const DetectionSet&, const DetectionSet&) = default;
};

/// Strictly binary raster, row-major, values in {0, 1}.
struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> cells;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), cells(size_t(h) * w, 0) {}

  uint8_t at(int x, int y) const { return cells[size_t(y) * width + x]; }
  void set(int x, int y, uint8_t v) { cells[size_t(y) * width + x] = v; }
  size_t Count() const;
  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

// 0..1000 integer convention. Rounding is half-to-even on coord * 1000.
absl::StatusOr<int> ToMilli(double coord);
absl::StatusOr<double> FromMilli(int milli);

/// Rounds to three decimals, half-to-even.
double Quantize3(double v);

/// Even-odd test against the closed ring `ring`.
bool PointInPolygon(std::span<const Point2> ring, Point2 p);

/// Shoelace area (signed; positive for counter-clockwise in y-up axes).
double SignedArea(std::span<const Point2> ring);

double Iou(const BBox& a, const BBox& b);

/// 2|A∩B| / (|A| + |B|); 1 when both masks are empty.
absl::StatusOr<double> Dice(const BinaryMask& a, const BinaryMask& b);
/// |A∩B| / |A∪B|; 1 when both masks are empty.
absl::StatusOr<double> MaskIou(const BinaryMask& a, const BinaryMask& b);

struct DetectionScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double mean_matched_iou = 0.0;
  int matched = 0;
  int num_pred = 0;
  int num_gt = 0;
};

/// One-to-one greedy matching: candidate same-class pairs with IoU >=
/// `iou_thresh` are taken in descending IoU order (ties by prediction index,
/// then ground-truth index), skipping pairs whose members are already used.
DetectionScore MatchAndScore(const DetectionSet& pred, const DetectionSet& gt,
                             double iou_thresh = 0.5);

/// Pixel IoU between the rasterized unions of two box sets on a
/// `resolution` x `resolution` grid.
double GlobalBoxIou(const DetectionSet& pred, const DetectionSet& gt,
                    int resolution = 1000);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_GEOMETRY_H_
