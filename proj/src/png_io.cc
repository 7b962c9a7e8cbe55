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

#include "pgfc_lab/png_io.h"

#include <png.h>

#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "absl/strings/str_cat.h"

namespace pgfc_lab {
namespace {

struct ReadCursor {
  const std::string* bytes;
  size_t offset;
};

void ReadFromString(png_structp png, png_bytep out, png_size_t n) {
  auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cursor->offset + n > cursor->bytes->size()) {
    png_error(png, "truncated PNG stream");
  }
  std::memcpy(out, cursor->bytes->data() + cursor->offset, n);
  cursor->offset += n;
}

void WriteToString(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}

void FlushNoop(png_structp) {}

absl::StatusOr<std::string> Encode(const uint8_t* pixels, int width,
                                   int height, int channels) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return absl::InternalError("png_create_write_struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    return absl::InternalError("png_create_info_struct");
  }
  std::string out;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return absl::InternalError("libpng failed while encoding");
  }
  png_set_write_fn(png, &out, WriteToString, FlushNoop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, width, height, 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const size_t stride = static_cast<size_t>(width) * channels;
  for (int y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels + y * stride));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

// Decodes to 8-bit with `want` channels (1 or 3).
absl::StatusOr<std::vector<uint8_t>> Decode(const std::string& bytes,
                                            int want, int* width,
                                            int* height) {
  if (bytes.size() < 8 ||
      png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) !=
          0) {
    return absl::InvalidArgumentError("not a PNG stream");
  }
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) return absl::InternalError("png_create_read_struct");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return absl::InternalError("png_create_info_struct");
  }
  std::vector<uint8_t> pixels;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return absl::DataLossError("corrupt PNG stream");
  }
  ReadCursor cursor{&bytes, 0};
  png_set_read_fn(png, &cursor, ReadFromString);
  png_read_info(png, info);
  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  const bool is_gray =
      color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA;
  if (want == 3 && is_gray) png_set_gray_to_rgb(png);
  if (want == 1 && !is_gray) {
    png_set_rgb_to_gray_fixed(png, 1, -1, -1);
  }
  png_read_update_info(png, info);
  *width = static_cast<int>(png_get_image_width(png, info));
  *height = static_cast<int>(png_get_image_height(png, info));
  const size_t rowbytes = png_get_rowbytes(png, info);
  if (rowbytes != static_cast<size_t>(*width) * want) {
    png_destroy_read_struct(&png, &info, nullptr);
    return absl::InvalidArgumentError("unsupported PNG layout");
  }
  pixels.resize(rowbytes * *height);
  std::vector<png_bytep> rows(*height);
  for (int y = 0; y < *height; ++y) rows[y] = pixels.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return pixels;
}

}  // namespace

absl::StatusOr<std::string> EncodePng(const Image& img) {
  if (img.empty()) return absl::InvalidArgumentError("empty image");
  return Encode(img.pixels.data(), img.width, img.height, 3);
}

absl::StatusOr<std::string> EncodeGrayPng(const GrayImage& img) {
  if (img.width == 0 || img.height == 0) {
    return absl::InvalidArgumentError("empty image");
  }
  return Encode(img.pixels.data(), img.width, img.height, 1);
}

absl::StatusOr<Image> DecodePng(const std::string& bytes) {
  Image img;
  auto pixels = Decode(bytes, 3, &img.width, &img.height);
  if (!pixels.ok()) return pixels.status();
  img.pixels = std::move(*pixels);
  return img;
}

absl::StatusOr<GrayImage> DecodeGrayPng(const std::string& bytes) {
  GrayImage img;
  auto pixels = Decode(bytes, 1, &img.width, &img.height);
  if (!pixels.ok()) return pixels.status();
  img.pixels = std::move(*pixels);
  return img;
}

absl::StatusOr<std::string> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

absl::Status WriteFileBytes(const std::filesystem::path& path,
                            const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    return absl::PermissionDeniedError(
        absl::StrCat("cannot write ", path.string()));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) return absl::DataLossError(absl::StrCat("short write to ", path.string()));
  return absl::OkStatus();
}

absl::Status WritePng(const Image& img, const std::filesystem::path& path) {
  auto bytes = EncodePng(img);
  if (!bytes.ok()) return bytes.status();
  return WriteFileBytes(path, *bytes);
}

absl::Status WriteGrayPng(const GrayImage& img,
                          const std::filesystem::path& path) {
  auto bytes = EncodeGrayPng(img);
  if (!bytes.ok()) return bytes.status();
  return WriteFileBytes(path, *bytes);
}

absl::StatusOr<Image> ReadPng(const std::filesystem::path& path) {
  auto bytes = ReadFileBytes(path);
  if (!bytes.ok()) return bytes.status();
  auto img = DecodePng(*bytes);
  if (!img.ok()) {
    return absl::Status(img.status().code(),
                        absl::StrCat(path.string(), ": ", img.status().message()));
  }
  return img;
}

absl::StatusOr<GrayImage> ReadGrayPng(const std::filesystem::path& path) {
  auto bytes = ReadFileBytes(path);
  if (!bytes.ok()) return bytes.status();
  return DecodeGrayPng(*bytes);
}

}  // namespace pgfc_lab
