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

#include "pgfc_lab/mask_codec.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "absl/strings/str_format.h"
#include "pgfc_lab/rng.h"
#include "pgfc_lab/status_macros.h"

namespace pgfc_lab {
namespace {

constexpr double kInitStd = 0.02;

Matrix RandomMatrix(int rows, int cols, uint64_t seed, uint64_t stream) {
  Rng rng(DeriveSeed(seed, stream));
  Matrix m(rows, cols);
  // Row-major fill so the stream does not depend on Eigen's storage order.
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng.Normal() * kInitStd;
  }
  return m;
}

Matrix ToMatrix(const Tensor& t) {
  Matrix m(t.dim(0), t.dim(1));
  for (int r = 0; r < t.dim(0); ++r) {
    for (int c = 0; c < t.dim(1); ++c) m(r, c) = t.at(r, c);
  }
  return m;
}

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + e^z) without overflow.
double Softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

absl::Status CheckShapes(const MaskLogits& z, const BinaryMask& t) {
  if (z.height != t.height || z.width != t.width ||
      z.values.size() != t.cells.size() || t.cells.empty()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "logits %dx%d vs target %dx%d", z.height, z.width, t.height, t.width));
  }
  return absl::OkStatus();
}

struct DecoderTrace {
  Matrix qin, q, k, v, attn, h, z;
};

absl::StatusOr<DecoderTrace> DecoderForward(const MaskCodecConfig& cfg,
                                            const MaskDecoderWeights& w,
                                            const Tensor& e_v, const Tensor& token) {
  const int d = cfg.d_model;
  if (e_v.rank() != 2 || e_v.dim(1) != d || token.rank() != 2 ||
      token.dim(0) != 1 || token.dim(1) != d) {
    return absl::InvalidArgumentError(
        absl::StrFormat("mask decoder expects d_model %d inputs", d));
  }
  if (e_v.dim(0) != cfg.cells()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "mask decoder expects %d image tokens, got %d", cfg.cells(), e_v.dim(0)));
  }
  const Matrix e = ToMatrix(e_v);
  const RowVector t = ToMatrix(token).row(0);
  DecoderTrace tr;
  tr.qin = w.cell_query.rowwise() + t;
  tr.q = tr.qin * w.wq;
  tr.k = e * w.wk;
  tr.v = e * w.wv;
  Matrix s = (tr.q * tr.k.transpose()) / std::sqrt(static_cast<double>(d));
  for (int i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - mx).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
  tr.attn = std::move(s);
  tr.h = (tr.attn * tr.v + e).rowwise() + t;
  tr.z = (tr.h * w.w_out).rowwise() + w.b_out;
  return tr;
}

MaskLogits ToLogits(const MaskCodecConfig& cfg, const Matrix& z) {
  MaskLogits out;
  out.height = out.width = cfg.mask_side;
  out.values.assign(static_cast<size_t>(cfg.mask_side) * cfg.mask_side, 0.0);
  const int g = cfg.cells_per_side(), s = cfg.stride;
  for (int i = 0; i < cfg.cells(); ++i) {
    const int cy = i / g, cx = i % g;
    for (int p = 0; p < s * s; ++p) {
      const int y = cy * s + p / s, x = cx * s + p % s;
      out.values[static_cast<size_t>(y) * cfg.mask_side + x] = z(i, p);
    }
  }
  return out;
}

Matrix FromPixelGrad(const MaskCodecConfig& cfg, const std::vector<double>& g_pix) {
  const int g = cfg.cells_per_side(), s = cfg.stride;
  Matrix dz(cfg.cells(), s * s);
  for (int i = 0; i < cfg.cells(); ++i) {
    const int cy = i / g, cx = i % g;
    for (int p = 0; p < s * s; ++p) {
      const int y = cy * s + p / s, x = cx * s + p % s;
      dz(i, p) = g_pix[static_cast<size_t>(y) * cfg.mask_side + x];
    }
  }
  return dz;
}

}  // namespace

absl::Status MaskCodecConfig::Validate() const {
  if (mask_side <= 0 || stride <= 0 || mask_side % stride != 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "stride %d must divide mask side %d", stride, mask_side));
  }
  if (d_model <= 0) return absl::InvalidArgumentError("d_model must be positive");
  return absl::OkStatus();
}

// ---------------------------------------------------------------- encoder

absl::StatusOr<MaskEncoder> MaskEncoder::Create(const MaskCodecConfig& cfg) {
  PGFC_RETURN_IF_ERROR(cfg.Validate());
  MaskEncoder enc;
  enc.cfg_ = cfg;
  enc.head_ = cfg.zero_heads ? Matrix::Zero(cfg.cells(), cfg.d_model)
                             : RandomMatrix(cfg.cells(), cfg.d_model, cfg.seed, 11);
  enc.bias_ = RowVector::Zero(cfg.d_model);
  return enc;
}

absl::StatusOr<Tensor> MaskEncoder::Encode(const BinaryMask& m) const {
  if (m.height != cfg_.mask_side || m.width != cfg_.mask_side) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "mask is %dx%d, encoder expects %d", m.height, m.width, cfg_.mask_side));
  }
  const int g = cfg_.cells_per_side(), s = cfg_.stride;
  RowVector pooled = RowVector::Zero(cfg_.cells());
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (m.at(x, y)) pooled((y / s) * g + x / s) += 1.0;
    }
  }
  pooled /= static_cast<double>(s * s);
  const RowVector e = pooled * head_ + bias_;
  Tensor out({1, cfg_.d_model});
  for (int j = 0; j < cfg_.d_model; ++j) out.at(0, j) = static_cast<float>(e(j));
  return out;
}

// ---------------------------------------------------------------- decoder

absl::StatusOr<MaskDecoderWeights> MaskDecoderWeights::Init(const MaskCodecConfig& cfg) {
  PGFC_RETURN_IF_ERROR(cfg.Validate());
  const int d = cfg.d_model, ss = cfg.stride * cfg.stride;
  MaskDecoderWeights w;
  w.cell_query = RandomMatrix(cfg.cells(), d, cfg.seed, 21);
  w.wq = RandomMatrix(d, d, cfg.seed, 22);
  w.wk = RandomMatrix(d, d, cfg.seed, 23);
  w.wv = RandomMatrix(d, d, cfg.seed, 24);
  w.w_out = cfg.zero_heads ? Matrix::Zero(d, ss) : RandomMatrix(d, ss, cfg.seed, 25);
  w.b_out = RowVector::Zero(ss);
  return w;
}

std::vector<double*> MaskDecoderWeights::Parameters() {
  std::vector<double*> out;
  out.reserve(ParameterCount());
  for (Matrix* m : {&cell_query, &wq, &wk, &wv, &w_out}) {
    for (Eigen::Index i = 0; i < m->size(); ++i) out.push_back(m->data() + i);
  }
  for (Eigen::Index i = 0; i < b_out.size(); ++i) out.push_back(b_out.data() + i);
  return out;
}

size_t MaskDecoderWeights::ParameterCount() const {
  return cell_query.size() + wq.size() + wk.size() + wv.size() + w_out.size() +
         b_out.size();
}

absl::StatusOr<MaskLogits> MaskDecode(const MaskCodecConfig& cfg,
                                      const MaskDecoderWeights& w,
                                      const Tensor& e_v, const Tensor& token) {
  PGFC_RETURN_IF_ERROR(cfg.Validate());
  PGFC_ASSIGN_OR_RETURN(DecoderTrace tr, DecoderForward(cfg, w, e_v, token));
  return ToLogits(cfg, tr.z);
}

// ---------------------------------------------------------------- losses

absl::StatusOr<double> BceLoss(const MaskLogits& z, const BinaryMask& target) {
  PGFC_RETURN_IF_ERROR(CheckShapes(z, target));
  double acc = 0.0;
  for (size_t i = 0; i < z.values.size(); ++i) {
    acc += Softplus(z.values[i]) - (target.cells[i] ? z.values[i] : 0.0);
  }
  return acc / static_cast<double>(z.values.size());
}

absl::StatusOr<double> DiceLoss(const MaskLogits& z, const BinaryMask& target, double eps) {
  PGFC_RETURN_IF_ERROR(CheckShapes(z, target));
  double inter = 0.0, sp = 0.0, st = 0.0;
  for (size_t i = 0; i < z.values.size(); ++i) {
    const double p = Sigmoid(z.values[i]);
    const double t = target.cells[i] ? 1.0 : 0.0;
    inter += p * t;
    sp += p;
    st += t;
  }
  return 1.0 - (2.0 * inter + eps) / (sp + st + eps);
}

absl::StatusOr<double> CombinedLoss(const MaskLogits& z, const BinaryMask& target,
                                    const LossWeights& weights,
                                    std::vector<double>* grad_z) {
  PGFC_RETURN_IF_ERROR(CheckShapes(z, target));
  const size_t n = z.values.size();
  std::vector<double> p(n);
  double bce = 0.0, inter = 0.0, sp = 0.0, st = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double zi = z.values[i], t = target.cells[i] ? 1.0 : 0.0;
    p[i] = Sigmoid(zi);
    bce += Softplus(zi) - t * zi;
    inter += p[i] * t;
    sp += p[i];
    st += t;
  }
  bce /= static_cast<double>(n);
  const double eps = kDiceEpsilon;
  const double num = 2.0 * inter + eps, den = sp + st + eps;
  const double dice = 1.0 - num / den;
  if (grad_z != nullptr) {
    grad_z->assign(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
      const double t = target.cells[i] ? 1.0 : 0.0;
      const double d_bce = (p[i] - t) / static_cast<double>(n);
      const double d_dice_dp = -(2.0 * t * den - num) / (den * den);
      (*grad_z)[i] = weights.bce * d_bce + weights.dice * d_dice_dp * p[i] * (1.0 - p[i]);
    }
  }
  return weights.bce * bce + weights.dice * dice;
}

absl::StatusOr<double> MaskLossAndGrads(const MaskCodecConfig& cfg,
                                        const MaskDecoderWeights& w,
                                        const Tensor& e_v, const Tensor& token,
                                        const BinaryMask& target,
                                        const LossWeights& weights,
                                        MaskDecoderGrads* grads) {
  PGFC_RETURN_IF_ERROR(cfg.Validate());
  PGFC_ASSIGN_OR_RETURN(DecoderTrace tr, DecoderForward(cfg, w, e_v, token));
  const MaskLogits z = ToLogits(cfg, tr.z);
  std::vector<double> g_pix;
  PGFC_ASSIGN_OR_RETURN(double loss, CombinedLoss(z, target, weights, &g_pix));
  if (grads == nullptr) return loss;

  const Matrix e = ToMatrix(e_v);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
  const Matrix dz = FromPixelGrad(cfg, g_pix);
  grads->w_out = tr.h.transpose() * dz;
  grads->b_out = dz.colwise().sum();
  const Matrix dh = dz * w.w_out.transpose();
  // h = attn v + e + t; only attn v depends on the attention weights.
  const Matrix dattn = dh * tr.v.transpose();
  const Matrix dv = tr.attn.transpose() * dh;
  Matrix ds(tr.attn.rows(), tr.attn.cols());
  for (int i = 0; i < ds.rows(); ++i) {
    const double dot = tr.attn.row(i).dot(dattn.row(i));
    ds.row(i) = tr.attn.row(i).array() * (dattn.row(i).array() - dot);
  }
  const Matrix dq = ds * tr.k * inv_sqrt_d;
  const Matrix dk = ds.transpose() * tr.q * inv_sqrt_d;
  grads->wq = tr.qin.transpose() * dq;
  grads->cell_query = dq * w.wq.transpose();
  grads->wk = e.transpose() * dk;
  grads->wv = e.transpose() * dv;
  return loss;
}

absl::StatusOr<double> TrainStep(const MaskCodecConfig& cfg, MaskDecoderWeights& w,
                                 const Tensor& e_v, const Tensor& token,
                                 const BinaryMask& target, double lr,
                                 const LossWeights& weights) {
  MaskDecoderGrads g;
  PGFC_ASSIGN_OR_RETURN(double loss,
                        MaskLossAndGrads(cfg, w, e_v, token, target, weights, &g));
  std::vector<double*> params = w.Parameters();
  std::vector<double*> grads = g.Parameters();
  if (!std::isfinite(loss)) return absl::InternalError("non-finite loss");
  for (double* gp : grads) {
    if (!std::isfinite(*gp)) return absl::InternalError("non-finite gradient");
  }
  for (size_t i = 0; i < params.size(); ++i) *params[i] -= lr * *grads[i];
  return loss;
}

BinaryMask Threshold(const MaskLogits& z) {
  BinaryMask m(z.height, z.width);
  for (size_t i = 0; i < z.values.size(); ++i) m.cells[i] = z.values[i] > 0.0 ? 1 : 0;
  return m;
}

// ---------------------------------------------------------------- geometry

ComponentLabels LabelComponents(const BinaryMask& m) {
  ComponentLabels out;
  out.labels.assign(m.cells.size(), 0);
  std::vector<int> stack;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const size_t seed = static_cast<size_t>(y) * m.width + x;
      if (!m.cells[seed] || out.labels[seed] != 0) continue;
      const int label = ++out.count;
      out.labels[seed] = label;
      stack.assign(1, static_cast<int>(seed));
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        const int cx = cur % m.width, cy = cur / m.width;
        const std::array<std::pair<int, int>, 4> nbrs = {
            {{cx + 1, cy}, {cx - 1, cy}, {cx, cy + 1}, {cx, cy - 1}}};
        for (auto [nx, ny] : nbrs) {
          if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
          const size_t k = static_cast<size_t>(ny) * m.width + nx;
          if (m.cells[k] && out.labels[k] == 0) {
            out.labels[k] = label;
            stack.push_back(static_cast<int>(k));
          }
        }
      }
    }
  }
  return out;
}

namespace {

// Headings in y-down coordinates: E, S, W, N. A right turn is +1.
constexpr int kDx[4] = {1, 0, -1, 0};
constexpr int kDy[4] = {0, 1, 0, -1};

std::vector<Point2> TraceComponent(const ComponentLabels& lab, int width, int height,
                                   int label, int x0, int y0) {
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < width && y < height &&
           lab.labels[static_cast<size_t>(y) * width + x] == label;
  };
  std::vector<Point2> ring;
  int cx = x0, cy = y0, dir = 0;
  while (true) {
    // Pixels straddling the edge ahead: right of the heading, then left.
    const int rx = -kDy[dir], ry = kDx[dir];
    const int ahead_right_x = cx + (kDx[dir] + rx - 1) / 2;
    const int ahead_right_y = cy + (kDy[dir] + ry - 1) / 2;
    const int ahead_left_x = cx + (kDx[dir] - rx - 1) / 2;
    const int ahead_left_y = cy + (kDy[dir] - ry - 1) / 2;
    int next = dir;
    if (!inside(ahead_right_x, ahead_right_y)) {
      next = (dir + 1) % 4;
    } else if (inside(ahead_left_x, ahead_left_y)) {
      next = (dir + 3) % 4;
    }
    if (next != dir) ring.push_back({static_cast<double>(cx), static_cast<double>(cy)});
    if (cx == x0 && cy == y0 && next == 0 && !ring.empty()) break;
    dir = next;
    cx += kDx[dir];
    cy += kDy[dir];
  }
  return ring;
}

}  // namespace

std::vector<Point2> DecimatePolygon(std::vector<Point2> ring, int max_vertices) {
  const size_t budget = static_cast<size_t>(std::max(3, max_vertices));
  while (ring.size() > budget) {
    const size_t n = ring.size();
    size_t best = 0;
    double best_dev = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
      const Point2& a = ring[(i + n - 1) % n];
      const Point2& p = ring[i];
      const Point2& b = ring[(i + 1) % n];
      const double ex = b.x - a.x, ey = b.y - a.y;
      const double len = std::hypot(ex, ey);
      const double dev = len > 0.0
                             ? std::abs(ex * (p.y - a.y) - ey * (p.x - a.x)) / len
                             : std::hypot(p.x - a.x, p.y - a.y);
      if (dev < best_dev) {
        best_dev = dev;
        best = i;
      }
    }
    ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return ring;
}

std::vector<Polygon> MaskToPolygons(const BinaryMask& m, int max_vertices) {
  std::vector<Polygon> out;
  if (m.cells.empty()) return out;
  const ComponentLabels lab = LabelComponents(m);
  std::vector<bool> done(static_cast<size_t>(lab.count) + 1, false);
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const int label = lab.labels[static_cast<size_t>(y) * m.width + x];
      if (label == 0 || done[label]) continue;
      done[label] = true;
      std::vector<Point2> ring =
          DecimatePolygon(TraceComponent(lab, m.width, m.height, label, x, y), max_vertices);
      Polygon poly;
      for (const Point2& p : ring) {
        poly.vertices.push_back({p.x / m.width, p.y / m.height});
      }
      out.push_back(std::move(poly));
    }
  }
  return out;
}

absl::StatusOr<BinaryMask> PolygonToMask(const std::vector<Polygon>& polys, int height,
                                         int width) {
  if (height <= 0 || width <= 0) return absl::InvalidArgumentError("empty mask size");
  BinaryMask m(height, width);
  for (const Polygon& poly : polys) {
    if (poly.vertices.size() < 3) {
      return absl::InvalidArgumentError("degenerate polygon (< 3 vertices)");
    }
    for (int y = 0; y < height; ++y) {
      const double py = (y + 0.5) / height;
      for (int x = 0; x < width; ++x) {
        if (PointInPolygon(poly.vertices, {(x + 0.5) / width, py})) m.set(x, y, 1);
      }
    }
  }
  return m;
}

std::vector<BBox> MaskToBBoxes(const BinaryMask& m) {
  const ComponentLabels lab = LabelComponents(m);
  std::vector<std::array<int, 4>> ext(lab.count, {m.width, m.height, -1, -1});
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const int l = lab.labels[static_cast<size_t>(y) * m.width + x];
      if (l == 0) continue;
      auto& e = ext[l - 1];
      e[0] = std::min(e[0], x);
      e[1] = std::min(e[1], y);
      e[2] = std::max(e[2], x);
      e[3] = std::max(e[3], y);
    }
  }
  std::vector<BBox> out;
  for (const auto& e : ext) {
    out.push_back({static_cast<double>(e[0]) / m.width, static_cast<double>(e[1]) / m.height,
                   static_cast<double>(e[2] + 1) / m.width,
                   static_cast<double>(e[3] + 1) / m.height});
  }
  return out;
}

GrayImage MaskToGray(const BinaryMask& m) {
  GrayImage g{m.width, m.height, std::vector<uint8_t>(m.cells.size())};
  for (size_t i = 0; i < m.cells.size(); ++i) g.pixels[i] = m.cells[i] ? 255 : 0;
  return g;
}

BinaryMask GrayToMask(const GrayImage& g) {
  BinaryMask m(g.height, g.width);
  for (size_t i = 0; i < g.pixels.size(); ++i) m.cells[i] = g.pixels[i] >= 128 ? 1 : 0;
  return m;
}

}  // namespace pgfc_lab
