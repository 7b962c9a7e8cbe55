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

#ifndef PGFC_LAB_PNG_IO_H_
#define PGFC_LAB_PNG_IO_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "pgfc_lab/image.h"

namespace pgfc_lab {

/// 8-bit single-channel raster.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;
};

// Encoder settings are fixed (zlib level 6, no filters chosen adaptively by
// time, no text chunks), so identical pixels always give identical bytes.
absl::StatusOr<std::string> EncodePng(const Image& img);
absl::StatusOr<std::string> EncodeGrayPng(const GrayImage& img);

/// Decodes 8-bit PNG. Gray, gray+alpha and RGBA inputs are converted to RGB.
absl::StatusOr<Image> DecodePng(const std::string& bytes);
/// Decodes 8-bit PNG to one channel (RGB inputs are reduced by luma).
absl::StatusOr<GrayImage> DecodeGrayPng(const std::string& bytes);

absl::Status WritePng(const Image& img, const std::filesystem::path& path);
absl::Status WriteGrayPng(const GrayImage& img,
                          const std::filesystem::path& path);
absl::StatusOr<Image> ReadPng(const std::filesystem::path& path);
absl::StatusOr<GrayImage> ReadGrayPng(const std::filesystem::path& path);

absl::StatusOr<std::string> ReadFileBytes(const std::filesystem::path& path);
absl::Status WriteFileBytes(const std::filesystem::path& path,
                            const std::string& bytes);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_PNG_IO_H_
