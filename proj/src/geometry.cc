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

#include "pgfc_lab/geometry.h"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <numeric>
#include <tuple>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace pgfc_lab {

bool BBox::IsValid() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  return in_unit(x1) && in_unit(y1) && in_unit(x2) && in_unit(y2) &&
         x1 <= x2 && y1 <= y2;
}

size_t DetectionSet::BoxCount() const {
  size_t n = 0;
  for (const auto& g : groups) n += g.boxes.size();
  return n;
}

size_t BinaryMask::Count() const {
  return static_cast<size_t>(std::count(cells.begin(), cells.end(), 1));
}

namespace {

// std::nearbyint honors the current rounding mode; the default mode is
// round-to-nearest-even, which is what the 3-decimal convention needs.
double RoundHalfEven(double v) {
  const int saved = std::fegetround();
  if (saved != FE_TONEAREST) std::fesetround(FE_TONEAREST);
  const double r = std::nearbyint(v);
  if (saved != FE_TONEAREST) std::fesetround(saved);
  return r;
}

}  // namespace

absl::StatusOr<int> ToMilli(double coord) {
  if (!std::isfinite(coord) || coord < 0.0 || coord > 1.0) {
    return absl::OutOfRangeError(
        absl::StrFormat("coordinate %g outside [0, 1]", coord));
  }
  return static_cast<int>(RoundHalfEven(coord * 1000.0));
}

absl::StatusOr<double> FromMilli(int milli) {
  if (milli < 0 || milli > 1000) {
    return absl::OutOfRangeError(
        absl::StrFormat("milli coordinate %d outside [0, 1000]", milli));
  }
  return milli / 1000.0;
}

double Quantize3(double v) { return RoundHalfEven(v * 1000.0) / 1000.0; }

bool PointInPolygon(std::span<const Point2> ring, Point2 p) {
  bool inside = false;
  const size_t n = ring.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = ring[i];
    const Point2& b = ring[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

double SignedArea(std::span<const Point2> ring) {
  double twice = 0.0;
  const size_t n = ring.size();
  for (size_t i = 0; i < n; ++i) {
    const Point2& a = ring[i];
    const Point2& b = ring[(i + 1) % n];
    twice += a.x * b.y - b.x * a.y;
  }
  return 0.5 * twice;
}

double Iou(const BBox& a, const BBox& b) {
  const double ix = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double iy = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = ix * iy;
  const double uni = a.Area() + b.Area() - inter;
  if (uni <= 0.0) return a == b ? 1.0 : 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

absl::Status CheckSameShape(const BinaryMask& a, const BinaryMask& b) {
  if (a.height != b.height || a.width != b.width) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "mask shape mismatch: %dx%d vs %dx%d", a.height, a.width, b.height,
        b.width));
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<double> Dice(const BinaryMask& a, const BinaryMask& b) {
  if (auto s = CheckSameShape(a, b); !s.ok()) return s;
  size_t inter = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.cells.size(); ++i) {
    na += a.cells[i];
    nb += b.cells[i];
    inter += a.cells[i] & b.cells[i];
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

absl::StatusOr<double> MaskIou(const BinaryMask& a, const BinaryMask& b) {
  if (auto s = CheckSameShape(a, b); !s.ok()) return s;
  size_t inter = 0, uni = 0;
  for (size_t i = 0; i < a.cells.size(); ++i) {
    inter += a.cells[i] & b.cells[i];
    uni += a.cells[i] | b.cells[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

struct FlatBox {
  const std::optional<std::string>* label;
  BBox box;
};

std::vector<FlatBox> Flatten(const DetectionSet& set) {
  std::vector<FlatBox> out;
  for (const auto& g : set.groups) {
    for (const auto& b : g.boxes) out.push_back({&g.label, b});
  }
  return out;
}

}  // namespace

DetectionScore MatchAndScore(const DetectionSet& pred, const DetectionSet& gt,
                             double iou_thresh) {
  const auto p = Flatten(pred);
  const auto g = Flatten(gt);
  DetectionScore score;
  score.num_pred = static_cast<int>(p.size());
  score.num_gt = static_cast<int>(g.size());

  struct Candidate {
    double iou;
    size_t pi, gi;
  };
  std::vector<Candidate> candidates;
  for (size_t i = 0; i < p.size(); ++i) {
    for (size_t j = 0; j < g.size(); ++j) {
      if (*p[i].label != *g[j].label) continue;
      const double v = Iou(p[i].box, g[j].box);
      if (v >= iou_thresh) candidates.push_back({v, i, j});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              return std::tie(b.iou, a.pi, a.gi) < std::tie(a.iou, b.pi, b.gi);
            });
  std::vector<bool> pred_used(p.size(), false), gt_used(g.size(), false);
  double iou_sum = 0.0;
  for (const auto& c : candidates) {
    if (pred_used[c.pi] || gt_used[c.gi]) continue;
    pred_used[c.pi] = gt_used[c.gi] = true;
    ++score.matched;
    iou_sum += c.iou;
  }
  score.precision = p.empty() ? 0.0 : double(score.matched) / p.size();
  score.recall = g.empty() ? 0.0 : double(score.matched) / g.size();
  const double pr = score.precision + score.recall;
  score.f1 = pr > 0.0 ? 2.0 * score.precision * score.recall / pr : 0.0;
  score.mean_matched_iou = score.matched > 0 ? iou_sum / score.matched : 0.0;
  return score;
}

double GlobalBoxIou(const DetectionSet& pred, const DetectionSet& gt,
                    int resolution) {
  auto rasterize = [resolution](const DetectionSet& set) {
    BinaryMask m(resolution, resolution);
    for (const auto& g : set.groups) {
      for (const auto& b : g.boxes) {
        const int x0 = static_cast<int>(std::lround(b.x1 * resolution));
        const int x1 = static_cast<int>(std::lround(b.x2 * resolution));
        const int y0 = static_cast<int>(std::lround(b.y1 * resolution));
        const int y1 = static_cast<int>(std::lround(b.y2 * resolution));
        for (int y = std::max(0, y0); y < std::min(resolution, y1); ++y) {
          for (int x = std::max(0, x0); x < std::min(resolution, x1); ++x) {
            m.set(x, y, 1);
          }
        }
      }
    }
    return m;
  };
  return MaskIou(rasterize(pred), rasterize(gt)).value();
}

}  // namespace pgfc_lab
