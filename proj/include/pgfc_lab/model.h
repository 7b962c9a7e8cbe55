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

#ifndef PGFC_LAB_MODEL_H_
#define PGFC_LAB_MODEL_H_

/// @file model.h
/// @brief Toy vision-language stack: vision encoder, byte-level text
/// encoder and a causal decoder that records every attention map.
///
/// Weights are drawn from N(0, 0.02^2) with per-tensor streams derived from
/// the config seed; layer-norm gains start at 1 and biases at 0. Generation
/// is greedy, so outputs are a pure function of weights and inputs.

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "pgfc_lab/image.h"
#include "pgfc_lab/pyramid.h"
#include "pgfc_lab/tensor.h"

namespace pgfc_lab {

inline constexpr int kBosToken = 256;
inline constexpr int kEosToken = 257;
inline constexpr int kMaskToken = 258;
inline constexpr int kSepToken = 259;
inline constexpr int kMinVocab = 260;

struct ModelConfig {
  int d_model = 32;
  int n_heads = 4;
  int n_layers_decoder = 2;
  int n_layers_vit = 1;
  int patch_px = 16;
  GridShape grid{8, 8};
  int vocab_size = kMinVocab;
  uint64_t seed = 0;
  // Degenerate-configuration switches used by locality/equivariance checks.
  bool vit_attention = true;
  bool vit_positional = true;
  int mlp_ratio = 4;

  absl::Status Validate() const;
  int image_tokens() const { return grid.size(); }
  int image_width() const { return grid.cols * patch_px; }
  int image_height() const { return grid.rows * patch_px; }
};

struct TokenSeq {
  std::vector<int> ids;
  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

struct LayerAttention {
  std::vector<Tensor> heads;  // each (L, L)
  Tensor mean;                // head average, (L, L)
};

/// Attention captured during one decoder forward pass.
struct AttentionRecord {
  int length = 0;
  std::vector<LayerAttention> layers;

  /// Head-averaged matrix of `layer`.
  const Tensor& Psi(int layer) const { return layers[layer].mean; }
};

/// Pre-norm transformer block parameters.
struct BlockWeights {
  Tensor ln1_gamma, ln1_beta;
  Tensor wq, wk, wv, wo;
  Tensor ln2_gamma, ln2_beta;
  Tensor w1, b1, w2, b2;
};

using ParameterVisitor = std::function<void(const std::string& name, Tensor& t)>;
using ConstParameterVisitor =
    std::function<void(const std::string& name, const Tensor& t)>;

struct VisionEncoderConfig {
  int d_model = 32;
  int n_heads = 4;
  int n_layers = 1;
  int patch_px = 16;
  GridShape grid{8, 8};
  uint64_t seed = 0;
  bool attention = true;
  bool positional = true;
  int mlp_ratio = 4;

  absl::Status Validate() const;
};

/// Patch embedding + non-causal transformer blocks + linear projection.
class VisionEncoder {
 public:
  static absl::StatusOr<VisionEncoder> Create(const VisionEncoderConfig& cfg);

  /// (grid.rows*patch_px, grid.cols*patch_px) image -> (N, d_model). Token
  /// order is row-major over the patch grid. When `attention` is non-null it
  /// receives one head-averaged (N, N) map per layer.
  absl::StatusOr<Tensor> Encode(const Image& img,
                                std::vector<Tensor>* attention = nullptr) const;

  const VisionEncoderConfig& config() const { return cfg_; }
  void VisitParameters(const ParameterVisitor& fn);
  void VisitParameters(const ConstParameterVisitor& fn) const;

 private:
  VisionEncoderConfig cfg_;
  Tensor patch_w_, patch_b_, position_;
  std::vector<BlockWeights> blocks_;
  Tensor final_gamma_, final_beta_, proj_w_, proj_b_;
};

/// Byte-level tokenizer with BOS/EOS specials and a learned embedding table.
class TextEncoder {
 public:
  static absl::StatusOr<TextEncoder> Create(int vocab_size, int d_model,
                                            uint64_t seed);

  /// [BOS, bytes..., EOS].
  static TokenSeq Tokenize(std::string_view text);
  /// Token embeddings plus a scaled sinusoidal position term (positions
  /// start at `start_position`).
  absl::StatusOr<Tensor> Embed(std::span<const int> ids,
                               int start_position = 0) const;
  absl::StatusOr<Tensor> Encode(std::string_view text) const;
  /// Position term alone, (n, d_model).
  Tensor PositionTerm(int n, int start_position = 0) const;

  int vocab_size() const { return vocab_size_; }
  int d_model() const { return d_model_; }
  void VisitParameters(const ParameterVisitor& fn);
  void VisitParameters(const ConstParameterVisitor& fn) const;

 private:
  int vocab_size_ = 0;
  int d_model_ = 0;
  Tensor table_;
};

struct ForwardOptions {
  bool capture_attention = true;
  /// Optional additive logit bias per key position (length L or empty).
  std::span<const float> key_bias;
};

struct DecoderOutput {
  Tensor logits;  // (L, vocab)
  std::optional<AttentionRecord> attention;
};

class Decoder {
 public:
  static absl::StatusOr<Decoder> Create(int d_model, int n_heads, int n_layers,
                                        int vocab_size, int mlp_ratio,
                                        uint64_t seed);

  absl::StatusOr<DecoderOutput> Forward(const Tensor& seq,
                                        const ForwardOptions& options = {}) const;

  int d_model() const { return d_model_; }
  int n_heads() const { return n_heads_; }
  int n_layers() const { return static_cast<int>(blocks_.size()); }
  void VisitParameters(const ParameterVisitor& fn);
  void VisitParameters(const ConstParameterVisitor& fn) const;

 private:
  int d_model_ = 0;
  int n_heads_ = 0;
  int vocab_size_ = 0;
  std::vector<BlockWeights> blocks_;
  Tensor final_gamma_, final_beta_, lm_head_;
};

/// Linear read-out on image-token embeddings added to every decoder
/// attention logit that targets an image token: bias_j = scale * (w . e_j + b).
struct SaliencyProbe {
  std::vector<float> weights;
  float bias = 0.0f;
  float scale = 0.0f;

  bool enabled() const { return !weights.empty() && scale != 0.0f; }
  float Score(std::span<const float> embedding) const;
};

class Model {
 public:
  static absl::StatusOr<Model> Create(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  const VisionEncoder& vision() const { return vision_; }
  const TextEncoder& text() const { return text_; }
  const Decoder& decoder() const { return decoder_; }
  const SaliencyProbe& probe() const { return probe_; }
  void set_probe(SaliencyProbe probe) { probe_ = std::move(probe); }

  void VisitParameters(const ParameterVisitor& fn);
  void VisitParameters(const ConstParameterVisitor& fn) const;

 private:
  ModelConfig cfg_;
  VisionEncoder vision_;
  TextEncoder text_;
  Decoder decoder_;
  SaliencyProbe probe_;
};

/// Extra inputs appended after (e_v, e_t): all detail-image blocks, then all
/// detail-text blocks.
struct Completion {
  std::vector<Tensor> detail_image;
  std::vector<Tensor> detail_text;

  int TokenCount() const;
};

struct GenerateOptions {
  int max_tokens = 8;
  bool capture_attention = true;
};

struct GenerateResult {
  TokenSeq output;
  /// Attention of the prefill pass over exactly the input sequence. Causal
  /// masking makes these rows identical in every later decoding step.
  std::optional<AttentionRecord> attention;
  int input_length = 0;
  int image_tokens = 0;
  int text_tokens = 0;
};

/// Greedy decoding of y = M(e_v, e_t[, detail_v, detail_t]).
absl::StatusOr<GenerateResult> Generate(const Model& model, const Tensor& e_v,
                                        const Tensor& e_t,
                                        const Completion* completion,
                                        const GenerateOptions& options = {});

/// Input sequence assembled exactly as Generate feeds it to the decoder.
absl::StatusOr<Tensor> AssembleInput(const Tensor& e_v, const Tensor& e_t,
                                     const Completion* completion);

}  // namespace pgfc_lab

#endif  // PGFC_LAB_MODEL_H_
