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

#include "pgfc_lab/image.h"

#include <algorithm>
#include <cmath>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"

namespace pgfc_lab {

absl::StatusOr<Image> Crop(const Image& img, int x, int y, int w, int h) {
  if (w <= 0 || h <= 0 || x < 0 || y < 0 || x + w > img.width ||
      y + h > img.height) {
    return absl::OutOfRangeError(
        absl::StrFormat("crop (%d,%d %dx%d) outside %dx%d image", x, y, w, h,
                        img.width, img.height));
  }
  Image out(w, h);
  for (int row = 0; row < h; ++row) {
    std::copy_n(img.At(x, y + row), static_cast<size_t>(w) * 3,
                out.At(0, row));
  }
  return out;
}

void Paste(const Image& src, int x, int y, Image& dst) {
  const int x0 = std::max(0, x), y0 = std::max(0, y);
  const int x1 = std::min(dst.width, x + src.width);
  const int y1 = std::min(dst.height, y + src.height);
  if (x1 <= x0 || y1 <= y0) return;
  for (int row = y0; row < y1; ++row) {
    std::copy_n(src.At(x0 - x, row - y), static_cast<size_t>(x1 - x0) * 3,
                dst.At(x0, row));
  }
}

Image Downsample2x(const Image& img) {
  const int w = (img.width + 1) / 2, h = (img.height + 1) / 2;
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    const int sy0 = 2 * y, sy1 = std::min(2 * y + 2, img.height);
    for (int x = 0; x < w; ++x) {
      const int sx0 = 2 * x, sx1 = std::min(2 * x + 2, img.width);
      const int n = (sy1 - sy0) * (sx1 - sx0);
      for (int c = 0; c < 3; ++c) {
        int sum = 0;
        for (int sy = sy0; sy < sy1; ++sy) {
          for (int sx = sx0; sx < sx1; ++sx) sum += img.At(sx, sy)[c];
        }
        out.At(x, y)[c] = static_cast<uint8_t>((sum + n / 2) / n);
      }
    }
  }
  return out;
}

namespace {

// Source spans and weights covering one destination pixel along an axis.
struct Footprint {
  int first = 0;
  std::vector<double> weights;
};

std::vector<Footprint> AreaFootprints(int src, int dst) {
  std::vector<Footprint> out(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    const double a = i * scale, b = (i + 1) * scale;
    const int first = static_cast<int>(std::floor(a));
    const int last = std::min(src - 1, static_cast<int>(std::ceil(b)) - 1);
    out[i].first = first;
    double total = 0.0;
    for (int s = first; s <= last; ++s) {
      const double cover = std::min<double>(b, s + 1) - std::max<double>(a, s);
      out[i].weights.push_back(std::max(0.0, cover));
      total += out[i].weights.back();
    }
    for (double& wgt : out[i].weights) wgt /= total;
  }
  return out;
}

uint8_t ClampByte(double v) {
  return static_cast<uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

Image AreaResize(const Image& img, int out_w, int out_h) {
  if (out_w == img.width && out_h == img.height) return img;
  const auto fx = AreaFootprints(img.width, out_w);
  const auto fy = AreaFootprints(img.height, out_h);
  // Horizontal pass into a double buffer, then vertical.
  std::vector<double> tmp(static_cast<size_t>(img.height) * out_w * 3, 0.0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc[3] = {0, 0, 0};
      for (size_t k = 0; k < fx[x].weights.size(); ++k) {
        const uint8_t* p = img.At(fx[x].first + static_cast<int>(k), y);
        for (int c = 0; c < 3; ++c) acc[c] += fx[x].weights[k] * p[c];
      }
      for (int c = 0; c < 3; ++c) {
        tmp[(static_cast<size_t>(y) * out_w + x) * 3 + c] = acc[c];
      }
    }
  }
  Image out(out_w, out_h);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      double acc[3] = {0, 0, 0};
      for (size_t k = 0; k < fy[y].weights.size(); ++k) {
        const size_t row = fy[y].first + k;
        for (int c = 0; c < 3; ++c) {
          acc[c] += fy[y].weights[k] * tmp[(row * out_w + x) * 3 + c];
        }
      }
      for (int c = 0; c < 3; ++c) out.At(x, y)[c] = ClampByte(acc[c]);
    }
  }
  return out;
}

namespace {

double CubicWeight(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

}  // namespace

Image BicubicResize(const Image& img, int out_w, int out_h) {
  if (out_w == img.width && out_h == img.height) return img;
  Image out(out_w, out_h);
  const double sx = static_cast<double>(img.width) / out_w;
  const double sy = static_cast<double>(img.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    const int iy = static_cast<int>(std::floor(src_y));
    for (int x = 0; x < out_w; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      const int ix = static_cast<int>(std::floor(src_x));
      double acc[3] = {0, 0, 0};
      for (int dy = -1; dy <= 2; ++dy) {
        const double wy = CubicWeight(src_y - (iy + dy));
        const int cy = std::clamp(iy + dy, 0, img.height - 1);
        for (int dx = -1; dx <= 2; ++dx) {
          const double wgt = wy * CubicWeight(src_x - (ix + dx));
          const int cx = std::clamp(ix + dx, 0, img.width - 1);
          const uint8_t* p = img.At(cx, cy);
          for (int c = 0; c < 3; ++c) acc[c] += wgt * p[c];
        }
      }
      for (int c = 0; c < 3; ++c) out.At(x, y)[c] = ClampByte(acc[c]);
    }
  }
  return out;
}

std::vector<double> MeanColor(const Image& img, int x, int y, int w, int h) {
  std::vector<double> mean(3, 0.0);
  for (int row = y; row < y + h; ++row) {
    for (int col = x; col < x + w; ++col) {
      for (int c = 0; c < 3; ++c) mean[c] += img.At(col, row)[c];
    }
  }
  const double n = static_cast<double>(w) * h;
  for (double& m : mean) m /= n;
  return mean;
}

}  // namespace pgfc_lab
