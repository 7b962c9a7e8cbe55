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

#include "pgfc_lab/model.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "pgfc_lab/rng.h"
#include "pgfc_lab/status_macros.h"

namespace pgfc_lab {
namespace {

constexpr float kInitStd = 0.02f;
constexpr float kPositionScale = 0.02f;

uint64_t NameHash(std::string_view name) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

Tensor RandomNormal(std::vector<int> shape, uint64_t seed, std::string_view name) {
  Tensor t(std::move(shape));
  Rng rng(DeriveSeed(seed, NameHash(name)));
  for (float& v : t.values()) v = static_cast<float>(rng.Normal()) * kInitStd;
  return t;
}

BlockWeights MakeBlock(int d, int mlp_ratio, uint64_t seed, const std::string& prefix) {
  BlockWeights b;
  b.ln1_gamma = Tensor({d}, 1.0f);
  b.ln1_beta = Tensor({d}, 0.0f);
  b.wq = RandomNormal({d, d}, seed, prefix + ".wq");
  b.wk = RandomNormal({d, d}, seed, prefix + ".wk");
  b.wv = RandomNormal({d, d}, seed, prefix + ".wv");
  b.wo = RandomNormal({d, d}, seed, prefix + ".wo");
  b.ln2_gamma = Tensor({d}, 1.0f);
  b.ln2_beta = Tensor({d}, 0.0f);
  b.w1 = RandomNormal({d, d * mlp_ratio}, seed, prefix + ".w1");
  b.b1 = Tensor({d * mlp_ratio}, 0.0f);
  b.w2 = RandomNormal({d * mlp_ratio, d}, seed, prefix + ".w2");
  b.b2 = Tensor({d}, 0.0f);
  return b;
}

template <typename Block, typename Fn>
void VisitBlock(Block& b, const std::string& prefix, const Fn& fn) {
  fn(prefix + ".ln1_gamma", b.ln1_gamma);
  fn(prefix + ".ln1_beta", b.ln1_beta);
  fn(prefix + ".wq", b.wq);
  fn(prefix + ".wk", b.wk);
  fn(prefix + ".wv", b.wv);
  fn(prefix + ".wo", b.wo);
  fn(prefix + ".ln2_gamma", b.ln2_gamma);
  fn(prefix + ".ln2_beta", b.ln2_beta);
  fn(prefix + ".w1", b.w1);
  fn(prefix + ".b1", b.b1);
  fn(prefix + ".w2", b.w2);
  fn(prefix + ".b2", b.b2);
}

Tensor Linear(const Tensor& x, const Tensor& w, const Tensor* bias = nullptr) {
  const int rows = x.rows(), k = w.dim(0), n = w.dim(1);
  Tensor y({rows, n});
  kernels::MatMul(x.data(), w.data(), y.data(), rows, k, n);
  if (bias != nullptr) {
    for (int r = 0; r < rows; ++r) {
      auto yr = y.row(r);
      for (int j = 0; j < n; ++j) yr[j] += bias->data()[j];
    }
  }
  return y;
}

Tensor Norm(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  Tensor y(x.shape());
  kernels::LayerNormRows(x.data(), gamma.data(), beta.data(), y.data(), x.rows(),
                         x.shape().back(), 1e-5f);
  return y;
}

void AddInPlace(Tensor& x, const Tensor& y) {
  float* a = x.data();
  const float* b = y.data();
  for (size_t i = 0; i < x.size(); ++i) a[i] += b[i];
}

// Multi-head self-attention sublayer on normalized input `h`. When `maps` is
// non-null it receives one (L, L) map per head; masked entries stay 0.
Tensor SelfAttention(const BlockWeights& w, int n_heads, bool causal,
                     std::span<const float> key_bias, const Tensor& h,
                     std::vector<Tensor>* maps) {
  const int L = h.dim(0), d = h.dim(1), hd = d / n_heads;
  const Tensor q = Linear(h, w.wq), k = Linear(h, w.wk), v = Linear(h, w.wv);
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  Tensor ctx({L, d});
  if (maps != nullptr) {
    maps->assign(n_heads, Tensor());
    for (auto& m : *maps) m = Tensor({L, L});
  }
  std::vector<float> scores(L);
  for (int head = 0; head < n_heads; ++head) {
    const int off = head * hd;
    for (int i = 0; i < L; ++i) {
      const int last = causal ? i : L - 1;
      const float* qi = q.data() + static_cast<size_t>(i) * d + off;
      for (int j = 0; j <= last; ++j) {
        const float* kj = k.data() + static_cast<size_t>(j) * d + off;
        float acc = 0.0f;
        for (int p = 0; p < hd; ++p) acc += qi[p] * kj[p];
        scores[j] = acc * scale + (key_bias.empty() ? 0.0f : key_bias[j]);
      }
      kernels::SoftmaxInPlace(scores.data(), last + 1);
      float* ci = ctx.data() + static_cast<size_t>(i) * d + off;
      for (int j = 0; j <= last; ++j) {
        const float a = scores[j];
        const float* vj = v.data() + static_cast<size_t>(j) * d + off;
        for (int p = 0; p < hd; ++p) ci[p] += a * vj[p];
      }
      if (maps != nullptr) {
        std::copy_n(scores.data(), last + 1, (*maps)[head].row(i).data());
      }
    }
  }
  return Linear(ctx, w.wo);
}

void MlpInPlace(const BlockWeights& w, Tensor& x) {
  const Tensor h = Norm(x, w.ln2_gamma, w.ln2_beta);
  Tensor mid = Linear(h, w.w1, &w.b1);
  for (float& v : mid.values()) v = kernels::GeluScalar(v);
  AddInPlace(x, Linear(mid, w.w2, &w.b2));
}

Tensor HeadMean(const std::vector<Tensor>& heads) {
  Tensor mean(heads.front().shape());
  for (const Tensor& h : heads) {
    for (size_t i = 0; i < mean.size(); ++i) mean.data()[i] += h.data()[i];
  }
  const float inv = 1.0f / static_cast<float>(heads.size());
  for (float& v : mean.values()) v *= inv;
  return mean;
}

}  // namespace

absl::Status VisionEncoderConfig::Validate() const {
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "d_model %d must be a positive multiple of n_heads %d", d_model, n_heads));
  }
  if (n_layers < 0 || patch_px <= 0 || grid.rows <= 0 || grid.cols <= 0 ||
      mlp_ratio <= 0) {
    return absl::InvalidArgumentError("invalid vision encoder geometry");
  }
  return absl::OkStatus();
}

absl::Status ModelConfig::Validate() const {
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "d_model %d must be a positive multiple of n_heads %d", d_model, n_heads));
  }
  if (n_layers_decoder < 1) return absl::InvalidArgumentError("need >= 1 decoder layer");
  if (n_layers_vit < 0) return absl::InvalidArgumentError("n_layers_vit must be >= 0");
  if (patch_px <= 0 || grid.rows <= 0 || grid.cols <= 0 || mlp_ratio <= 0) {
    return absl::InvalidArgumentError("invalid patch/grid geometry");
  }
  if (vocab_size < kMinVocab) {
    return absl::InvalidArgumentError(
        absl::StrFormat("vocab_size %d below %d (bytes + specials)", vocab_size, kMinVocab));
  }
  return absl::OkStatus();
}

// ---------------------------------------------------------------- vision

absl::StatusOr<VisionEncoder> VisionEncoder::Create(const VisionEncoderConfig& cfg) {
  PGFC_RETURN_IF_ERROR(cfg.Validate());
  VisionEncoder enc;
  enc.cfg_ = cfg;
  const int d = cfg.d_model;
  const int patch_dim = cfg.patch_px * cfg.patch_px * 3;
  enc.patch_w_ = RandomNormal({patch_dim, d}, cfg.seed, "vision.patch_w");
  enc.patch_b_ = Tensor({d}, 0.0f);
  enc.position_ = RandomNormal({cfg.grid.size(), d}, cfg.seed, "vision.position");
  for (int l = 0; l < cfg.n_layers; ++l) {
    enc.blocks_.push_back(
        MakeBlock(d, cfg.mlp_ratio, cfg.seed, absl::StrCat("vision.block", l)));
  }
  enc.final_gamma_ = Tensor({d}, 1.0f);
  enc.final_beta_ = Tensor({d}, 0.0f);
  enc.proj_w_ = RandomNormal({d, d}, cfg.seed, "vision.proj_w");
  enc.proj_b_ = Tensor({d}, 0.0f);
  return enc;
}

absl::StatusOr<Tensor> VisionEncoder::Encode(const Image& img,
                                             std::vector<Tensor>* attention) const {
  const int pw = cfg_.patch_px;
  if (img.width != cfg_.grid.cols * pw || img.height != cfg_.grid.rows * pw) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "vision encoder expects %dx%d input, got %dx%d", cfg_.grid.cols * pw,
        cfg_.grid.rows * pw, img.width, img.height));
  }
  const int n = cfg_.grid.size();
  const int patch_dim = pw * pw * 3;
  Tensor patches({n, patch_dim});
  for (int r = 0; r < cfg_.grid.rows; ++r) {
    for (int c = 0; c < cfg_.grid.cols; ++c) {
      float* dst = patches.row(r * cfg_.grid.cols + c).data();
      for (int y = 0; y < pw; ++y) {
        const uint8_t* src = img.At(c * pw, r * pw + y);
        for (int i = 0; i < pw * 3; ++i) *dst++ = src[i] / 255.0f - 0.5f;
      }
    }
  }
  Tensor x = Linear(patches, patch_w_, &patch_b_);
  if (cfg_.positional) AddInPlace(x, position_);
  if (attention != nullptr) attention->clear();
  for (const BlockWeights& b : blocks_) {
    if (cfg_.attention) {
      std::vector<Tensor> maps;
      const Tensor h = Norm(x, b.ln1_gamma, b.ln1_beta);
      AddInPlace(x, SelfAttention(b, cfg_.n_heads, /*causal=*/false, {}, h,
                                  attention != nullptr ? &maps : nullptr));
      if (attention != nullptr) attention->push_back(HeadMean(maps));
    }
    MlpInPlace(b, x);
  }
  return Linear(Norm(x, final_gamma_, final_beta_), proj_w_, &proj_b_);
}

void VisionEncoder::VisitParameters(const ParameterVisitor& fn) {
  fn("vision.patch_w", patch_w_);
  fn("vision.patch_b", patch_b_);
  fn("vision.position", position_);
  for (size_t l = 0; l < blocks_.size(); ++l) {
    VisitBlock(blocks_[l], absl::StrCat("vision.block", l), fn);
  }
  fn("vision.final_gamma", final_gamma_);
  fn("vision.final_beta", final_beta_);
  fn("vision.proj_w", proj_w_);
  fn("vision.proj_b", proj_b_);
}

void VisionEncoder::VisitParameters(const ConstParameterVisitor& fn) const {
  const_cast<VisionEncoder*>(this)->VisitParameters(
      ParameterVisitor([&](const std::string& n, Tensor& t) { fn(n, t); }));
}

// ---------------------------------------------------------------- text

absl::StatusOr<TextEncoder> TextEncoder::Create(int vocab_size, int d_model,
                                                uint64_t seed) {
  if (vocab_size < kMinVocab || d_model <= 0) {
    return absl::InvalidArgumentError("invalid text encoder dimensions");
  }
  TextEncoder enc;
  enc.vocab_size_ = vocab_size;
  enc.d_model_ = d_model;
  enc.table_ = RandomNormal({vocab_size, d_model}, seed, "text.table");
  return enc;
}

TokenSeq TextEncoder::Tokenize(std::string_view text) {
  TokenSeq seq;
  seq.ids.reserve(text.size() + 2);
  seq.ids.push_back(kBosToken);
  for (char ch : text) seq.ids.push_back(static_cast<uint8_t>(ch));
  seq.ids.push_back(kEosToken);
  return seq;
}

Tensor TextEncoder::PositionTerm(int n, int start_position) const {
  Tensor pe({n, d_model_});
  for (int i = 0; i < n; ++i) {
    const double pos = start_position + i;
    for (int j = 0; j < d_model_; ++j) {
      const double freq = std::pow(10000.0, -2.0 * (j / 2) / d_model_);
      const double v = (j % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
      pe.at(i, j) = static_cast<float>(v) * kPositionScale;
    }
  }
  return pe;
}

absl::StatusOr<Tensor> TextEncoder::Embed(std::span<const int> ids,
                                          int start_position) const {
  if (ids.empty()) return absl::InvalidArgumentError("no tokens to embed");
  Tensor out = PositionTerm(static_cast<int>(ids.size()), start_position);
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= vocab_size_) {
      return absl::OutOfRangeError(absl::StrFormat("token id %d outside vocab", ids[i]));
    }
    const auto src = table_.row(ids[i]);
    auto dst = out.row(static_cast<int>(i));
    for (int j = 0; j < d_model_; ++j) dst[j] += src[j];
  }
  return out;
}

absl::StatusOr<Tensor> TextEncoder::Encode(std::string_view text) const {
  return Embed(Tokenize(text).ids, 0);
}

void TextEncoder::VisitParameters(const ParameterVisitor& fn) { fn("text.table", table_); }

void TextEncoder::VisitParameters(const ConstParameterVisitor& fn) const {
  fn("text.table", table_);
}

// ---------------------------------------------------------------- decoder

absl::StatusOr<Decoder> Decoder::Create(int d_model, int n_heads, int n_layers,
                                        int vocab_size, int mlp_ratio,
                                        uint64_t seed) {
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0 || n_layers < 1 ||
      vocab_size <= 0 || mlp_ratio <= 0) {
    return absl::InvalidArgumentError("invalid decoder dimensions");
  }
  Decoder dec;
  dec.d_model_ = d_model;
  dec.n_heads_ = n_heads;
  dec.vocab_size_ = vocab_size;
  for (int l = 0; l < n_layers; ++l) {
    dec.blocks_.push_back(MakeBlock(d_model, mlp_ratio, seed, absl::StrCat("decoder.block", l)));
  }
  dec.final_gamma_ = Tensor({d_model}, 1.0f);
  dec.final_beta_ = Tensor({d_model}, 0.0f);
  dec.lm_head_ = RandomNormal({d_model, vocab_size}, seed, "decoder.lm_head");
  return dec;
}

absl::StatusOr<DecoderOutput> Decoder::Forward(const Tensor& seq,
                                               const ForwardOptions& options) const {
  if (seq.rank() != 2 || seq.dim(0) < 1 || seq.dim(1) != d_model_) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "decoder expects (L >= 1, %d) input", d_model_));
  }
  const int L = seq.dim(0);
  if (!options.key_bias.empty() && static_cast<int>(options.key_bias.size()) != L) {
    return absl::InvalidArgumentError("key_bias length differs from sequence length");
  }
  for (float b : options.key_bias) {
    if (!std::isfinite(b)) return absl::InvalidArgumentError("non-finite key_bias");
  }
  if (!seq.AllFinite()) return absl::InvalidArgumentError("non-finite decoder input");
  DecoderOutput out;
  if (options.capture_attention) {
    out.attention.emplace();
    out.attention->length = L;
  }
  Tensor x = seq;
  for (const BlockWeights& b : blocks_) {
    std::vector<Tensor> maps;
    const Tensor h = Norm(x, b.ln1_gamma, b.ln1_beta);
    AddInPlace(x, SelfAttention(b, n_heads_, /*causal=*/true, options.key_bias, h,
                                options.capture_attention ? &maps : nullptr));
    if (options.capture_attention) {
      LayerAttention layer;
      layer.mean = HeadMean(maps);
      layer.heads = std::move(maps);
      out.attention->layers.push_back(std::move(layer));
    }
    MlpInPlace(b, x);
  }
  out.logits = Linear(Norm(x, final_gamma_, final_beta_), lm_head_);
  return out;
}

void Decoder::VisitParameters(const ParameterVisitor& fn) {
  for (size_t l = 0; l < blocks_.size(); ++l) {
    VisitBlock(blocks_[l], absl::StrCat("decoder.block", l), fn);
  }
  fn("decoder.final_gamma", final_gamma_);
  fn("decoder.final_beta", final_beta_);
  fn("decoder.lm_head", lm_head_);
}

void Decoder::VisitParameters(const ConstParameterVisitor& fn) const {
  const_cast<Decoder*>(this)->VisitParameters(
      ParameterVisitor([&](const std::string& n, Tensor& t) { fn(n, t); }));
}

// ---------------------------------------------------------------- model

float SaliencyProbe::Score(std::span<const float> embedding) const {
  double acc = bias;
  const size_t n = std::min(weights.size(), embedding.size());
  for (size_t i = 0; i < n; ++i) acc += static_cast<double>(weights[i]) * embedding[i];
  return static_cast<float>(acc);
}

absl::StatusOr<Model> Model::Create(const ModelConfig& cfg) {
  PGFC_RETURN_IF_ERROR(cfg.Validate());
  Model m;
  m.cfg_ = cfg;
  VisionEncoderConfig vc;
  vc.d_model = cfg.d_model;
  vc.n_heads = cfg.n_heads;
  vc.n_layers = cfg.n_layers_vit;
  vc.patch_px = cfg.patch_px;
  vc.grid = cfg.grid;
  vc.seed = DeriveSeed(cfg.seed, 1);
  vc.attention = cfg.vit_attention;
  vc.positional = cfg.vit_positional;
  vc.mlp_ratio = cfg.mlp_ratio;
  PGFC_ASSIGN_OR_RETURN(m.vision_, VisionEncoder::Create(vc));
  PGFC_ASSIGN_OR_RETURN(m.text_, TextEncoder::Create(cfg.vocab_size, cfg.d_model,
                                                     DeriveSeed(cfg.seed, 2)));
  PGFC_ASSIGN_OR_RETURN(m.decoder_,
                        Decoder::Create(cfg.d_model, cfg.n_heads, cfg.n_layers_decoder,
                                        cfg.vocab_size, cfg.mlp_ratio,
                                        DeriveSeed(cfg.seed, 3)));
  return m;
}

void Model::VisitParameters(const ParameterVisitor& fn) {
  vision_.VisitParameters(fn);
  text_.VisitParameters(fn);
  decoder_.VisitParameters(fn);
}

void Model::VisitParameters(const ConstParameterVisitor& fn) const {
  vision_.VisitParameters(fn);
  text_.VisitParameters(fn);
  decoder_.VisitParameters(fn);
}

int Completion::TokenCount() const {
  int n = 0;
  for (const Tensor& t : detail_image) n += t.dim(0);
  for (const Tensor& t : detail_text) n += t.dim(0);
  return n;
}

absl::StatusOr<Tensor> AssembleInput(const Tensor& e_v, const Tensor& e_t,
                                     const Completion* completion) {
  std::vector<Tensor> parts = {e_v, e_t};
  if (completion != nullptr) {
    for (const Tensor& t : completion->detail_image) parts.push_back(t);
    for (const Tensor& t : completion->detail_text) parts.push_back(t);
  }
  return ConcatRows(parts);
}

absl::StatusOr<GenerateResult> Generate(const Model& model, const Tensor& e_v,
                                        const Tensor& e_t,
                                        const Completion* completion,
                                        const GenerateOptions& options) {
  if (options.max_tokens <= 0) {
    return absl::InvalidArgumentError("max_tokens must be positive");
  }
  const int d = model.config().d_model;
  if (e_v.rank() != 2 || e_t.rank() != 2 || e_v.dim(1) != d || e_t.dim(1) != d) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "embeddings must be (n, %d); got e_v %dx%d, e_t %dx%d", d,
        e_v.rank() == 2 ? e_v.dim(0) : -1, e_v.rank() == 2 ? e_v.dim(1) : -1,
        e_t.rank() == 2 ? e_t.dim(0) : -1, e_t.rank() == 2 ? e_t.dim(1) : -1));
  }
  PGFC_ASSIGN_OR_RETURN(Tensor seq, AssembleInput(e_v, e_t, completion));

  GenerateResult result;
  result.input_length = seq.dim(0);
  result.image_tokens = e_v.dim(0);
  result.text_tokens = e_t.dim(0);

  std::vector<float> bias;
  const SaliencyProbe& probe = model.probe();
  if (probe.enabled()) {
    bias.assign(seq.dim(0), 0.0f);
    for (int j = 0; j < e_v.dim(0); ++j) bias[j] = probe.scale * probe.Score(e_v.row(j));
  }

  std::vector<float> rows(seq.values().begin(), seq.values().end());
  for (int step = 0; step < options.max_tokens; ++step) {
    const int L = static_cast<int>(rows.size() / d);
    Tensor current({L, d}, rows);
    ForwardOptions fo;
    fo.capture_attention = options.capture_attention && step == 0;
    fo.key_bias = bias;
    PGFC_ASSIGN_OR_RETURN(DecoderOutput out, model.decoder().Forward(current, fo));
    if (step == 0) result.attention = std::move(out.attention);
    const auto last = out.logits.row(L - 1);
    const int next = static_cast<int>(std::max_element(last.begin(), last.end()) - last.begin());
    result.output.ids.push_back(next);
    if (next == kEosToken || step + 1 == options.max_tokens) break;
    const int id[] = {next};
    PGFC_ASSIGN_OR_RETURN(Tensor emb, model.text().Embed(id, step));
    rows.insert(rows.end(), emb.values().begin(), emb.values().end());
    if (!bias.empty()) bias.push_back(0.0f);
  }
  return result;
}

}  // namespace pgfc_lab
