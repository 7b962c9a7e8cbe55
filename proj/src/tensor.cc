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

#include "pgfc_lab/tensor.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "absl/status/status.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"

namespace pgfc_lab {
namespace {

size_t Product(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) n *= static_cast<size_t>(d);
  return n;
}

std::string ShapeString(const std::vector<int>& shape) {
  return absl::StrCat("(", absl::StrJoin(shape, ", "), ")");
}

absl::Status CheckFinite(const Tensor& t, const char* what) {
  if (!t.AllFinite()) {
    return absl::InvalidArgumentError(absl::StrFormat("%s has non-finite values", what));
  }
  return absl::OkStatus();
}

}  // namespace

Tensor::Tensor(std::vector<int> shape, float fill)
    : shape_(std::move(shape)), data_(Product(shape_), fill) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {}

absl::StatusOr<Tensor> Tensor::FromData(std::vector<int> shape,
                                        std::vector<float> data) {
  for (int d : shape) {
    if (d <= 0) return absl::InvalidArgumentError("tensor dims must be positive");
  }
  if (Product(shape) != data.size()) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "shape %s needs %d values, got %d", ShapeString(shape), Product(shape),
        data.size()));
  }
  return Tensor(std::move(shape), std::move(data));
}

absl::StatusOr<Tensor> Tensor::Reshape(std::vector<int> shape) const {
  return FromData(std::move(shape), data_);
}

bool Tensor::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

namespace kernels {

void MatMul(const float* a, const float* b, float* c, int m, int k, int n) {
  std::fill(c, c + static_cast<size_t>(m) * n, 0.0f);
  for (int i = 0; i < m; ++i) {
    float* ci = c + static_cast<size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const float av = a[static_cast<size_t>(i) * k + p];
      const float* bp = b + static_cast<size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

void MatMulTransposedB(const float* a, const float* b, float* c, int m, int k,
                       int n) {
  for (int i = 0; i < m; ++i) {
    const float* ai = a + static_cast<size_t>(i) * k;
    for (int j = 0; j < n; ++j) {
      const float* bj = b + static_cast<size_t>(j) * k;
      float acc = 0.0f;
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      c[static_cast<size_t>(i) * n + j] = acc;
    }
  }
}

void SoftmaxInPlace(float* row, int n) {
  float mx = row[0];
  for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  double sum = 0.0;
  for (int j = 0; j < n; ++j) {
    row[j] = std::exp(row[j] - mx);
    sum += row[j];
  }
  const float inv = static_cast<float>(1.0 / sum);
  for (int j = 0; j < n; ++j) row[j] *= inv;
}

void LayerNormRows(const float* x, const float* gamma, const float* beta,
                   float* out, int rows, int d, float eps) {
  for (int r = 0; r < rows; ++r) {
    const float* xr = x + static_cast<size_t>(r) * d;
    float* yr = out + static_cast<size_t>(r) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < d; ++j) {
      yr[j] = static_cast<float>((xr[j] - mean) * inv) * gamma[j] + beta[j];
    }
  }
}

float GeluScalar(float x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  return 0.5f * x * (1.0f + std::tanh(kC * (x + 0.044715f * x * x * x)));
}

}  // namespace kernels

absl::StatusOr<Tensor> MatMul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "matmul shape mismatch %s x %s", ShapeString(a.shape()),
        ShapeString(b.shape())));
  }
  if (auto s = CheckFinite(a, "matmul lhs"); !s.ok()) return s;
  if (auto s = CheckFinite(b, "matmul rhs"); !s.ok()) return s;
  Tensor c({a.dim(0), b.dim(1)});
  kernels::MatMul(a.data(), b.data(), c.data(), a.dim(0), a.dim(1), b.dim(1));
  return c;
}

absl::StatusOr<Tensor> SoftmaxRows(const Tensor& x) {
  if (x.rank() < 1 || x.empty()) return absl::InvalidArgumentError("softmax of empty tensor");
  if (auto s = CheckFinite(x, "softmax input"); !s.ok()) return s;
  Tensor y = x;
  const int n = x.shape().back();
  for (int r = 0; r < y.rows(); ++r) kernels::SoftmaxInPlace(y.row(r).data(), n);
  return y;
}

absl::StatusOr<Tensor> LayerNorm(const Tensor& x, const Tensor& gamma,
                                 const Tensor& beta, float eps) {
  if (x.rank() < 1 || gamma.size() != static_cast<size_t>(x.shape().back()) ||
      beta.size() != gamma.size()) {
    return absl::InvalidArgumentError("layer_norm parameter shape mismatch");
  }
  if (auto s = CheckFinite(x, "layer_norm input"); !s.ok()) return s;
  Tensor y(x.shape());
  kernels::LayerNormRows(x.data(), gamma.data(), beta.data(), y.data(), x.rows(),
                         x.shape().back(), eps);
  return y;
}

absl::StatusOr<Tensor> Gelu(const Tensor& x) {
  if (auto s = CheckFinite(x, "gelu input"); !s.ok()) return s;
  Tensor y = x;
  for (float& v : y.values()) v = kernels::GeluScalar(v);
  return y;
}

absl::StatusOr<Tensor> MeanPool2d(const Tensor& x, int factor) {
  if (x.rank() != 3) return absl::InvalidArgumentError("mean_pool_2d expects (H, W, C)");
  if (factor <= 0 || x.dim(0) % factor != 0 || x.dim(1) % factor != 0) {
    return absl::InvalidArgumentError(absl::StrFormat(
        "pool factor %d does not divide %dx%d", factor, x.dim(0), x.dim(1)));
  }
  if (auto s = CheckFinite(x, "mean_pool_2d input"); !s.ok()) return s;
  const int h = x.dim(0) / factor, w = x.dim(1) / factor, c = x.dim(2);
  Tensor y({h, w, c});
  const double inv = 1.0 / (factor * factor);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      for (int ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (int di = 0; di < factor; ++di) {
          for (int dj = 0; dj < factor; ++dj) {
            const size_t src = (static_cast<size_t>(i * factor + di) * x.dim(1) +
                                (j * factor + dj)) * c + ch;
            acc += x.data()[src];
          }
        }
        y.data()[(static_cast<size_t>(i) * w + j) * c + ch] =
            static_cast<float>(acc * inv);
      }
    }
  }
  return y;
}

absl::StatusOr<Tensor> ConcatRows(std::span<const Tensor> parts) {
  if (parts.empty()) return absl::InvalidArgumentError("nothing to concatenate");
  const int d = parts.front().shape().back();
  int total = 0;
  for (const Tensor& t : parts) {
    if (t.rank() != 2 || t.dim(1) != d) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "row concat width mismatch: %s vs width %d", ShapeString(t.shape()), d));
    }
    total += t.dim(0);
  }
  std::vector<float> data;
  data.reserve(static_cast<size_t>(total) * d);
  for (const Tensor& t : parts) data.insert(data.end(), t.values().begin(), t.values().end());
  return Tensor({total, d}, std::move(data));
}

absl::StatusOr<Tensor> ConcatColumns(std::span<const Tensor> parts) {
  if (parts.empty()) return absl::InvalidArgumentError("nothing to concatenate");
  const int n = parts.front().dim(0);
  int width = 0;
  for (const Tensor& t : parts) {
    if (t.rank() != 2 || t.dim(0) != n) {
      return absl::InvalidArgumentError(absl::StrFormat(
          "column concat row mismatch: %s vs %d rows", ShapeString(t.shape()), n));
    }
    width += t.dim(1);
  }
  Tensor out({n, width});
  for (int r = 0; r < n; ++r) {
    float* dst = out.row(r).data();
    for (const Tensor& t : parts) {
      const auto src = t.row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

Tensor SoftmaxRowsBackward(const Tensor& y, const Tensor& dy) {
  Tensor dx(y.shape());
  const int n = y.shape().back();
  for (int r = 0; r < y.rows(); ++r) {
    const auto yr = y.row(r);
    const auto gr = dy.row(r);
    double dot = 0.0;
    for (int j = 0; j < n; ++j) dot += yr[j] * gr[j];
    auto out = dx.row(r);
    for (int j = 0; j < n; ++j) out[j] = static_cast<float>(yr[j] * (gr[j] - dot));
  }
  return dx;
}

void MatMulBackward(const Tensor& a, const Tensor& b, const Tensor& dc,
                    Tensor* da, Tensor* db) {
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (da != nullptr) {
    *da = Tensor({m, k});
    // dA = dC (m, n) * B^T; B is (k, n) so B rows act as the transposed operand.
    kernels::MatMulTransposedB(dc.data(), b.data(), da->data(), m, n, k);
  }
  if (db != nullptr) {
    *db = Tensor({k, n});
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p) {
        const float av = a.at(i, p);
        float* dbp = db->data() + static_cast<size_t>(p) * n;
        const float* dci = dc.data() + static_cast<size_t>(i) * n;
        for (int j = 0; j < n; ++j) dbp[j] += av * dci[j];
      }
    }
  }
}

}  // namespace pgfc_lab
