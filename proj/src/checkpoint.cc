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

#include "pgfc_lab/checkpoint.h"

#include <cstring>
#include <map>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "json.hpp"
#include "pgfc_lab/png_io.h"
#include "pgfc_lab/status_macros.h"

namespace pgfc_lab {
namespace {

using json = nlohmann::ordered_json;

constexpr char kMagic[] = "PGFCCKPT";
constexpr size_t kMagicLen = 8;

class Writer {
 public:
  void U8(uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void U32(uint32_t v) {
    for (int i = 0; i < 4; ++i) U8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void U64(uint64_t v) {
    for (int i = 0; i < 8; ++i) U8(static_cast<uint8_t>(v >> (8 * i)));
  }
  void F32(float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    U32(bits);
  }
  void Str(std::string_view s) {
    U32(static_cast<uint32_t>(s.size()));
    out_.append(s);
  }
  void Raw(std::string_view s) { out_.append(s); }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}

  absl::StatusOr<uint8_t> U8() {
    if (pos_ + 1 > in_.size()) return Truncated();
    return static_cast<uint8_t>(in_[pos_++]);
  }
  absl::StatusOr<uint32_t> U32() {
    if (pos_ + 4 > in_.size()) return Truncated();
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(in_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  absl::StatusOr<float> F32() {
    PGFC_ASSIGN_OR_RETURN(uint32_t bits, U32());
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
  }
  absl::StatusOr<std::string> Str() {
    PGFC_ASSIGN_OR_RETURN(uint32_t n, U32());
    if (pos_ + n > in_.size()) return Truncated();
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  size_t remaining() const { return in_.size() - pos_; }

 private:
  static absl::Status Truncated() {
    return absl::DataLossError("checkpoint truncated");
  }
  std::string_view in_;
  size_t pos_ = 0;
};

}  // namespace

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ModelConfigToJson(const ModelConfig& cfg) {
  json j;
  j["d_model"] = cfg.d_model;
  j["n_heads"] = cfg.n_heads;
  j["n_layers_decoder"] = cfg.n_layers_decoder;
  j["n_layers_vit"] = cfg.n_layers_vit;
  j["patch_px"] = cfg.patch_px;
  j["grid_rows"] = cfg.grid.rows;
  j["grid_cols"] = cfg.grid.cols;
  j["vocab_size"] = cfg.vocab_size;
  j["seed"] = cfg.seed;
  j["vit_attention"] = cfg.vit_attention;
  j["vit_positional"] = cfg.vit_positional;
  j["mlp_ratio"] = cfg.mlp_ratio;
  return j.dump();
}

absl::StatusOr<ModelConfig> ModelConfigFromJson(std::string_view text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("model config is not a JSON object");
  }
  ModelConfig cfg;
  try {
    cfg.d_model = j.at("d_model").get<int>();
    cfg.n_heads = j.at("n_heads").get<int>();
    cfg.n_layers_decoder = j.at("n_layers_decoder").get<int>();
    cfg.n_layers_vit = j.at("n_layers_vit").get<int>();
    cfg.patch_px = j.at("patch_px").get<int>();
    cfg.grid.rows = j.at("grid_rows").get<int>();
    cfg.grid.cols = j.at("grid_cols").get<int>();
    cfg.vocab_size = j.at("vocab_size").get<int>();
    cfg.seed = j.at("seed").get<uint64_t>();
    cfg.vit_attention = j.value("vit_attention", true);
    cfg.vit_positional = j.value("vit_positional", true);
    cfg.mlp_ratio = j.value("mlp_ratio", 4);
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("model config: ", e.what()));
  }
  PGFC_RETURN_IF_ERROR(cfg.Validate());
  return cfg;
}

std::string SerializeCheckpoint(const Model& model) {
  Writer w;
  w.Raw(std::string_view(kMagic, kMagicLen));
  w.U32(kCheckpointVersion);
  w.Str(ModelConfigToJson(model.config()));
  std::vector<std::pair<std::string, const Tensor*>> tensors;
  model.VisitParameters(ConstParameterVisitor(
      [&](const std::string& name, const Tensor& t) { tensors.emplace_back(name, &t); }));
  w.U32(static_cast<uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    w.Str(name);
    w.U32(static_cast<uint32_t>(t->rank()));
    for (int d : t->shape()) w.U32(static_cast<uint32_t>(d));
    for (float v : t->values()) w.F32(v);
  }
  const SaliencyProbe& probe = model.probe();
  if (probe.weights.empty()) {
    w.U8(0);
  } else {
    w.U8(1);
    w.U32(static_cast<uint32_t>(probe.weights.size()));
    for (float v : probe.weights) w.F32(v);
    w.F32(probe.bias);
    w.F32(probe.scale);
  }
  w.U64(Fnv1a64(w.bytes()));
  return std::move(w.bytes());
}

absl::StatusOr<Model> DeserializeCheckpoint(std::string_view bytes) {
  if (bytes.size() < kMagicLen + 8 ||
      bytes.substr(0, kMagicLen) != std::string_view(kMagic, kMagicLen)) {
    return absl::InvalidArgumentError("not a pgfc-lab checkpoint (bad magic)");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) {
    stored |= uint64_t(uint8_t(bytes[body.size() + i])) << (8 * i);
  }
  if (stored != Fnv1a64(body)) {
    return absl::DataLossError("checkpoint content hash mismatch");
  }
  Reader r(body.substr(kMagicLen));
  PGFC_ASSIGN_OR_RETURN(uint32_t version, r.U32());
  if (version != kCheckpointVersion) {
    return absl::UnimplementedError(
        absl::StrFormat("unsupported checkpoint version %u", version));
  }
  PGFC_ASSIGN_OR_RETURN(std::string cfg_text, r.Str());
  PGFC_ASSIGN_OR_RETURN(ModelConfig cfg, ModelConfigFromJson(cfg_text));
  PGFC_ASSIGN_OR_RETURN(Model model, Model::Create(cfg));

  PGFC_ASSIGN_OR_RETURN(uint32_t count, r.U32());
  std::map<std::string, Tensor> loaded;
  for (uint32_t i = 0; i < count; ++i) {
    PGFC_ASSIGN_OR_RETURN(std::string name, r.Str());
    PGFC_ASSIGN_OR_RETURN(uint32_t rank, r.U32());
    if (rank == 0 || rank > 4) return absl::DataLossError("bad tensor rank");
    std::vector<int> shape;
    size_t n = 1;
    for (uint32_t k = 0; k < rank; ++k) {
      PGFC_ASSIGN_OR_RETURN(uint32_t d, r.U32());
      shape.push_back(static_cast<int>(d));
      n *= d;
    }
    if (n * 4 > r.remaining()) return absl::DataLossError("checkpoint truncated");
    std::vector<float> values(n);
    for (float& v : values) { PGFC_ASSIGN_OR_RETURN(v, r.F32()); }
    loaded.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  absl::Status status;
  size_t matched = 0;
  model.VisitParameters(ParameterVisitor([&](const std::string& name, Tensor& t) {
    if (!status.ok()) return;
    auto it = loaded.find(name);
    if (it == loaded.end()) {
      status = absl::DataLossError(absl::StrCat("checkpoint lacks tensor ", name));
    } else if (it->second.shape() != t.shape()) {
      status = absl::DataLossError(absl::StrCat("shape mismatch for tensor ", name));
    } else {
      t = std::move(it->second);
      ++matched;
    }
  }));
  PGFC_RETURN_IF_ERROR(status);
  if (matched != loaded.size()) {
    return absl::DataLossError("checkpoint holds unknown tensors");
  }
  PGFC_ASSIGN_OR_RETURN(uint8_t has_probe, r.U8());
  if (has_probe == 1) {
    SaliencyProbe probe;
    PGFC_ASSIGN_OR_RETURN(uint32_t n, r.U32());
    if (static_cast<int>(n) != cfg.d_model) {
      return absl::DataLossError("probe width differs from d_model");
    }
    probe.weights.resize(n);
    for (float& v : probe.weights) { PGFC_ASSIGN_OR_RETURN(v, r.F32()); }
    PGFC_ASSIGN_OR_RETURN(probe.bias, r.F32());
    PGFC_ASSIGN_OR_RETURN(probe.scale, r.F32());
    model.set_probe(std::move(probe));
  } else if (has_probe != 0) {
    return absl::DataLossError("bad probe flag");
  }
  if (r.remaining() != 0) return absl::DataLossError("trailing bytes in checkpoint");
  return model;
}

absl::Status SaveCheckpoint(const Model& model, const std::filesystem::path& path) {
  return WriteFileBytes(path, SerializeCheckpoint(model));
}

absl::StatusOr<Model> LoadCheckpoint(const std::filesystem::path& path) {
  PGFC_ASSIGN_OR_RETURN(std::string bytes, ReadFileBytes(path));
  return DeserializeCheckpoint(bytes);
}

}  // namespace pgfc_lab
