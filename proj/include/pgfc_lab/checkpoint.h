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

#ifndef PGFC_LAB_CHECKPOINT_H_
#define PGFC_LAB_CHECKPOINT_H_

// Binary checkpoint layout (all integers little-endian):
//   "PGFCCKPT" | u32 version | u32 n + config JSON | u32 tensor count |
//   per tensor: u32 n + name, u32 rank, u32 dims..., f32 values... |
//   u8 probe flag [+ u32 n, f32 weights..., f32 bias, f32 scale] |
//   u64 FNV-1a of every preceding byte.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "pgfc_lab/model.h"

namespace pgfc_lab {

inline constexpr uint32_t kCheckpointVersion = 1;

std::string ModelConfigToJson(const ModelConfig& cfg);
absl::StatusOr<ModelConfig> ModelConfigFromJson(std::string_view text);

uint64_t Fnv1a64(std::string_view bytes);

std::string SerializeCheckpoint(const Model& model);
absl::StatusOr<Model> DeserializeCheckpoint(std::string_view bytes);

absl::Status SaveCheckpoint(const Model& model, const std::filesystem::path& path);
absl::StatusOr<Model> LoadCheckpoint(const std::filesystem::path& path);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_CHECKPOINT_H_
