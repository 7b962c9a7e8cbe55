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

#include "pgfc_lab/synthetic_slide.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "json.hpp"
#include "pgfc_lab/png_io.h"
#include "pgfc_lab/rng.h"
#include "pgfc_lab/status_macros.h"

namespace pgfc_lab {
namespace {

using json = nlohmann::ordered_json;

constexpr int kMaxPlacementAttempts = 400;
constexpr double kTissueRgb[3] = {226, 168, 204};
constexpr double kLesionRgb[3] = {178, 112, 170};
constexpr double kNucleusRgb[3] = {72, 38, 112};
constexpr int kDotSpacing = 11;

double Bilinear(const std::vector<double>& lattice, int n, double u, double v) {
  // u, v in [0, n]
  const int i = std::clamp(static_cast<int>(u), 0, n - 1);
  const int j = std::clamp(static_cast<int>(v), 0, n - 1);
  const double fu = u - i, fv = v - j;
  const int stride = n + 1;
  const double a = lattice[j * stride + i], b = lattice[j * stride + i + 1];
  const double c = lattice[(j + 1) * stride + i];
  const double d = lattice[(j + 1) * stride + i + 1];
  return (a * (1 - fu) + b * fu) * (1 - fv) + (c * (1 - fu) + d * fu) * fv;
}

uint8_t ToByte(double v) {
  return static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Small symmetric per-pixel jitter in [-amp, amp], derived from the seed.
int PixelJitter(uint64_t seed, int x, int y, int channel, int amp) {
  const uint64_t h = Mix64(seed ^ (static_cast<uint64_t>(y) << 32) ^
                           (static_cast<uint64_t>(x) << 2) ^ channel);
  return static_cast<int>(h % (2 * amp + 1)) - amp;
}

struct PlacedLesion {
  Point2 center;
  double radius = 0;
  std::vector<Point2> polygon;
};

// Star-shaped polygon around `center`: angles strictly increasing, so the
// ring never self-intersects.
std::vector<Point2> StarPolygon(Rng& rng, Point2 center, double radius) {
  const int k = 10 + static_cast<int>(rng.UniformInt(7));
  const double step = 2.0 * std::numbers::pi / k;
  std::vector<Point2> ring;
  ring.reserve(k);
  for (int i = 0; i < k; ++i) {
    const double theta = i * step + rng.Uniform(-0.3, 0.3) * step;
    const double r = radius * rng.Uniform(0.7, 1.15);
    ring.push_back({center.x + r * std::cos(theta), center.y + r * std::sin(theta)});
  }
  return ring;
}

// Fills `mask` (bbox-local) with pixels whose centers lie inside `ring`.
void ScanlineFill(const std::vector<Point2>& ring, int bx, int by, int bw,
                  int bh, std::vector<uint8_t>& mask) {
  std::vector<double> xs;
  for (int row = 0; row < bh; ++row) {
    const double yc = by + row + 0.5;
    xs.clear();
    for (size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
      const Point2& a = ring[i];
      const Point2& b = ring[j];
      if ((a.y > yc) != (b.y > yc)) {
        xs.push_back(a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y));
      }
    }
    std::sort(xs.begin(), xs.end());
    for (size_t s = 0; s + 1 < xs.size(); s += 2) {
      const int x0 = std::max(bx, static_cast<int>(std::ceil(xs[s] - 0.5)));
      const int x1 = std::min(bx + bw, static_cast<int>(std::ceil(xs[s + 1] - 0.5)));
      for (int x = x0; x < x1; ++x) mask[row * bw + (x - bx)] = 1;
    }
  }
}

}  // namespace

double TissueModel::Field(double x, double y) const {
  double best = -1e9;
  for (const TissueBlob& b : blobs) {
    const double dx = (x - b.cx) / b.rx, dy = (y - b.cy) / b.ry;
    best = std::max(best, 1.0 - dx * dx - dy * dy);
  }
  const double n = Bilinear(noise, lattice, x / width * lattice, y / height * lattice);
  return best + amplitude * (n - 0.5);
}

absl::StatusOr<SyntheticSlide> CreateSyntheticWsi(const SlideSpec& spec) {
  if (spec.tile_size <= 0) return absl::InvalidArgumentError("tile_size must be positive");
  if (spec.width < 4 * spec.tile_size || spec.height < 4 * spec.tile_size) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "slide %dx%d too small: need at least 4 tiles (%d px) per axis",
        spec.width, spec.height, 4 * spec.tile_size));
  }
  if (spec.n_lesions < 0) return absl::InvalidArgumentError("n_lesions must be >= 0");

  const int W = spec.width, H = spec.height;
  const double min_side = std::min(W, H);
  Rng rng(spec.seed);

  GroundTruth gt;
  gt.seed = spec.seed;
  TissueModel& tissue = gt.tissue;
  tissue.width = W;
  tissue.height = H;
  const int n_blobs = 3 + static_cast<int>(rng.UniformInt(3));
  for (int i = 0; i < n_blobs; ++i) {
    TissueBlob b;
    b.cx = rng.Uniform(0.28, 0.72) * W;
    b.cy = rng.Uniform(0.28, 0.72) * H;
    b.rx = rng.Uniform(0.16, 0.28) * min_side;
    b.ry = rng.Uniform(0.16, 0.28) * min_side;
    tissue.blobs.push_back(b);
  }
  tissue.noise.resize((tissue.lattice + 1) * (tissue.lattice + 1));
  for (double& v : tissue.noise) v = rng.Uniform();

  constexpr int kShadeLattice = 5;
  std::vector<double> shade((kShadeLattice + 1) * (kShadeLattice + 1));
  for (double& v : shade) v = rng.Uniform();

  // Lesion placement.
  std::vector<PlacedLesion> placed;
  int attempts = 0;
  while (static_cast<int>(placed.size()) < spec.n_lesions) {
    if (++attempts > kMaxPlacementAttempts * std::max(1, spec.n_lesions)) {
      return absl::ResourceExhaustedError(absl::StrFormat(
          "could not place %d non-overlapping lesions (placed %d)",
          spec.n_lesions, placed.size()));
    }
    PlacedLesion lesion;
    lesion.center = {rng.Uniform(0.1, 0.9) * W, rng.Uniform(0.1, 0.9) * H};
    lesion.radius = rng.Uniform(0.055, 0.08) * min_side;
    lesion.polygon = StarPolygon(rng, lesion.center, lesion.radius);
    if (tissue.Field(lesion.center.x, lesion.center.y) <= 0.3) continue;
    bool ok = true;
    for (const Point2& v : lesion.polygon) {
      if (v.x < 0.02 * W || v.x > 0.98 * W || v.y < 0.02 * H || v.y > 0.98 * H ||
          tissue.Field(v.x, v.y) <= 0.05) {
        ok = false;
        break;
      }
    }
    for (const PlacedLesion& other : placed) {
      if (!ok) break;
      const double d = std::hypot(lesion.center.x - other.center.x,
                                  lesion.center.y - other.center.y);
      if (d <= 1.15 * (lesion.radius + other.radius) + 0.02 * min_side) ok = false;
    }
    if (ok) placed.push_back(std::move(lesion));
  }

  // Background and tissue.
  Image img(W, H);
  const uint64_t noise_seed = Mix64(spec.seed ^ 0x7173737565ULL);
  auto shade_at = [&](int x, int y) {
    return 0.88 + 0.2 * Bilinear(shade, kShadeLattice,
                                 (x + 0.5) / W * kShadeLattice,
                                 (y + 0.5) / H * kShadeLattice);
  };
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      uint8_t* px = img.At(x, y);
      if (tissue.IsTissue(x + 0.5, y + 0.5)) {
        const double s = shade_at(x, y);
        for (int c = 0; c < 3; ++c) {
          px[c] = ToByte(kTissueRgb[c] * s + PixelJitter(noise_seed, x, y, c, 6));
        }
      } else {
        const int v = 252 + PixelJitter(noise_seed, x, y, 0, 3);
        px[0] = px[1] = px[2] = static_cast<uint8_t>(v);
      }
    }
  }

  // Lesion texture: darker stroma plus a jittered lattice of dark nuclei.
  for (const PlacedLesion& lesion : placed) {
    double minx = 1e18, miny = 1e18, maxx = -1e18, maxy = -1e18;
    for (const Point2& v : lesion.polygon) {
      minx = std::min(minx, v.x);
      miny = std::min(miny, v.y);
      maxx = std::max(maxx, v.x);
      maxy = std::max(maxy, v.y);
    }
    const int bx = std::max(0, static_cast<int>(std::floor(minx)));
    const int by = std::max(0, static_cast<int>(std::floor(miny)));
    const int bw = std::min(W, static_cast<int>(std::ceil(maxx)) + 1) - bx;
    const int bh = std::min(H, static_cast<int>(std::ceil(maxy)) + 1) - by;
    std::vector<uint8_t> inside(static_cast<size_t>(bw) * bh, 0);
    ScanlineFill(lesion.polygon, bx, by, bw, bh, inside);
    for (int row = 0; row < bh; ++row) {
      for (int col = 0; col < bw; ++col) {
        if (!inside[row * bw + col]) continue;
        const int x = bx + col, y = by + row;
        const double s = shade_at(x, y);
        uint8_t* px = img.At(x, y);
        for (int c = 0; c < 3; ++c) {
          px[c] = ToByte(kLesionRgb[c] * s + PixelJitter(noise_seed, x, y, c, 6));
        }
      }
    }
    for (int gy = by; gy < by + bh; gy += kDotSpacing) {
      for (int gx = bx; gx < bx + bw; gx += kDotSpacing) {
        const double cx = gx + rng.Uniform(-3.0, 3.0);
        const double cy = gy + rng.Uniform(-3.0, 3.0);
        const int radius = 3 + static_cast<int>(rng.UniformInt(2));
        for (int dy = -radius; dy <= radius; ++dy) {
          for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy > radius * radius) continue;
            const int x = static_cast<int>(std::lround(cx)) + dx;
            const int y = static_cast<int>(std::lround(cy)) + dy;
            if (x < bx || y < by || x >= bx + bw || y >= by + bh) continue;
            if (!inside[(y - by) * bw + (x - bx)]) continue;
            uint8_t* px = img.At(x, y);
            for (int c = 0; c < 3; ++c) {
              px[c] = ToByte(kNucleusRgb[c] + PixelJitter(noise_seed, x, y, c, 8));
            }
          }
        }
      }
    }
    gt.lesions.push_back({"tumor", lesion.polygon});
  }

  PGFC_ASSIGN_OR_RETURN(PyramidImage pyramid,
                        PyramidImage::FromBaseImage(std::move(img), spec.tile_size, spec.seed));
  return SyntheticSlide{std::move(pyramid), std::move(gt)};
}

namespace {

template <typename Pred>
double Coverage(const Region& r, int samples, Pred inside) {
  int hits = 0;
  for (int i = 0; i < samples; ++i) {
    const double y = r.y + (i + 0.5) * r.h / samples;
    for (int j = 0; j < samples; ++j) {
      const double x = r.x + (j + 0.5) * r.w / samples;
      if (inside(x, y)) ++hits;
    }
  }
  return static_cast<double>(hits) / (samples * samples);
}

}  // namespace

double LesionCoverage(const GroundTruth& gt, const Region& r, int samples) {
  return Coverage(r, samples, [&](double x, double y) {
    for (const Lesion& l : gt.lesions) {
      if (PointInPolygon(l.polygon, {x, y})) return true;
    }
    return false;
  });
}

double TissueCoverage(const GroundTruth& gt, const Region& r, int samples) {
  return Coverage(r, samples,
                  [&](double x, double y) { return gt.tissue.IsTissue(x, y); });
}

absl::StatusOr<std::vector<int>> LesionCells(const GroundTruth& gt,
                                             const PyramidImage& p,
                                             GridShape grid,
                                             double min_coverage) {
  std::vector<int> cells;
  for (int i = 0; i < grid.size(); ++i) {
    PGFC_ASSIGN_OR_RETURN(Region r, MapGridIndexToRegion(i, grid, p, 0));
    if (LesionCoverage(gt, r) >= min_coverage) cells.push_back(i);
  }
  return cells;
}

absl::Status WriteGroundTruth(const GroundTruth& gt,
                              const std::filesystem::path& path) {
  json doc;
  doc["seed"] = gt.seed;
  json lesions = json::array();
  for (const Lesion& l : gt.lesions) {
    json ring = json::array();
    for (const Point2& p : l.polygon) ring.push_back({p.x, p.y});
    lesions.push_back({{"label", l.label}, {"polygon", std::move(ring)}});
  }
  doc["lesions"] = std::move(lesions);
  json blobs = json::array();
  for (const TissueBlob& b : gt.tissue.blobs) blobs.push_back({b.cx, b.cy, b.rx, b.ry});
  doc["tissue"] = {{"width", gt.tissue.width},
                   {"height", gt.tissue.height},
                   {"lattice", gt.tissue.lattice},
                   {"amplitude", gt.tissue.amplitude},
                   {"blobs", std::move(blobs)},
                   {"noise", gt.tissue.noise}};
  return WriteFileBytes(path, doc.dump(2) + "\n");
}

absl::StatusOr<GroundTruth> ReadGroundTruth(const std::filesystem::path& path) {
  PGFC_ASSIGN_OR_RETURN(std::string text, ReadFileBytes(path));
  try {
    const json doc = json::parse(text);
    GroundTruth gt;
    gt.seed = doc.at("seed").get<uint64_t>();
    for (const json& l : doc.at("lesions")) {
      Lesion lesion;
      lesion.label = l.at("label").get<std::string>();
      for (const json& p : l.at("polygon")) {
        lesion.polygon.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      }
      gt.lesions.push_back(std::move(lesion));
    }
    const json& t = doc.at("tissue");
    gt.tissue.width = t.at("width").get<int>();
    gt.tissue.height = t.at("height").get<int>();
    gt.tissue.lattice = t.at("lattice").get<int>();
    gt.tissue.amplitude = t.at("amplitude").get<double>();
    for (const json& b : t.at("blobs")) {
      gt.tissue.blobs.push_back({b.at(0).get<double>(), b.at(1).get<double>(),
                                 b.at(2).get<double>(), b.at(3).get<double>()});
    }
    gt.tissue.noise = t.at("noise").get<std::vector<double>>();
    if (gt.tissue.noise.size() !=
        static_cast<size_t>((gt.tissue.lattice + 1) * (gt.tissue.lattice + 1))) {
      return absl::InvalidArgumentError("ground truth noise lattice has wrong size");
    }
    return gt;
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        absl::StrCat("malformed ground truth ", path.string(), ": ", e.what()));
  }
}

}  // namespace pgfc_lab
