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

#ifndef PGFC_LAB_IMAGE_H_
#define PGFC_LAB_IMAGE_H_

#include <cstdint>
#include <vector>

#include "absl/status/statusor.h"

namespace pgfc_lab {

/// Interleaved 8-bit RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;

  Image() = default;
  Image(int w, int h, uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<size_t>(w) * h * 3, fill) {}

  bool empty() const { return width == 0 || height == 0; }
  size_t Offset(int x, int y) const {
    return (static_cast<size_t>(y) * width + x) * 3;
  }
  uint8_t* At(int x, int y) { return pixels.data() + Offset(x, y); }
  const uint8_t* At(int x, int y) const { return pixels.data() + Offset(x, y); }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Rec. 601 luma scaled to [0, 1].
inline double Luminance(const uint8_t* rgb) {
  return (0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]) / 255.0;
}

/// Crops [x, x+w) x [y, y+h). Fails when the window leaves the image.
absl::StatusOr<Image> Crop(const Image& img, int x, int y, int w, int h);

/// Pastes `src` into `dst` with its top-left at (x, y); clipped to `dst`.
void Paste(const Image& src, int x, int y, Image& dst);

/// Halves both axes (rounding up). Each output pixel is the mean of the
/// 1, 2 or 4 source pixels it covers; padding never enters the average.
Image Downsample2x(const Image& img);

/// Box-filter resampling with fractional pixel coverage. Exact area average
/// for downscaling; degenerates to nearest-area sampling when upscaling.
Image AreaResize(const Image& img, int out_w, int out_h);

/// Catmull-Rom bicubic resampling (a = -0.5), edge-clamped.
Image BicubicResize(const Image& img, int out_w, int out_h);

/// Per-channel mean over a window, in [0, 255].
std::vector<double> MeanColor(const Image& img, int x, int y, int w, int h);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_IMAGE_H_
