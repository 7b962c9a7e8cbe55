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

#ifndef PGFC_LAB_TENSOR_H_
#define PGFC_LAB_TENSOR_H_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "absl/status/statusor.h"

namespace pgfc_lab {

/// Dense row-major float32 array with an explicit shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape, float fill = 0.0f);
  /// Requires data.size() == product(shape); checked by FromData.
  Tensor(std::vector<int> shape, std::vector<float> data);

  static absl::StatusOr<Tensor> FromData(std::vector<int> shape,
                                         std::vector<float> data);

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int axis) const { return shape_[axis]; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  // 2-D accessors; rank is not checked.
  float& at(int r, int c) { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  float at(int r, int c) const { return data_[static_cast<size_t>(r) * shape_[1] + c]; }
  std::span<float> row(int r) {
    return {data_.data() + static_cast<size_t>(r) * shape_.back(),
            static_cast<size_t>(shape_.back())};
  }
  std::span<const float> row(int r) const {
    return {data_.data() + static_cast<size_t>(r) * shape_.back(),
            static_cast<size_t>(shape_.back())};
  }
  /// Number of rows when viewed as (size / last_dim) x last_dim.
  int rows() const { return shape_.empty() ? 0 : static_cast<int>(size() / shape_.back()); }

  absl::StatusOr<Tensor> Reshape(std::vector<int> shape) const;
  bool AllFinite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

/// (m, k) x (k, n) -> (m, n).
absl::StatusOr<Tensor> MatMul(const Tensor& a, const Tensor& b);
/// Softmax over the last axis.
absl::StatusOr<Tensor> SoftmaxRows(const Tensor& x);
/// Normalizes over the last axis, then scales/shifts by gamma/beta.
absl::StatusOr<Tensor> LayerNorm(const Tensor& x, const Tensor& gamma,
                                 const Tensor& beta, float eps = 1e-5f);
/// tanh approximation.
absl::StatusOr<Tensor> Gelu(const Tensor& x);
/// (H, W, C) -> (H/f, W/f, C) by non-overlapping mean pooling.
absl::StatusOr<Tensor> MeanPool2d(const Tensor& x, int factor);
/// Stacks (L_i, d) blocks into (sum L_i, d).
absl::StatusOr<Tensor> ConcatRows(std::span<const Tensor> parts);
/// Joins (N, C_i) blocks into (N, sum C_i).
absl::StatusOr<Tensor> ConcatColumns(std::span<const Tensor> parts);

/// Gradient of SoftmaxRows given its output y and upstream dy.
Tensor SoftmaxRowsBackward(const Tensor& y, const Tensor& dy);
/// dA = dC * B^T and dB = A^T * dC for C = A B.
void MatMulBackward(const Tensor& a, const Tensor& b, const Tensor& dc,
                    Tensor* da, Tensor* db);

namespace kernels {

// Unchecked kernels shared by the model code. Shapes are the caller's
// responsibility.
void MatMul(const float* a, const float* b, float* c, int m, int k, int n);
/// c = a * b^T with b stored (n, k).
void MatMulTransposedB(const float* a, const float* b, float* c, int m, int k,
                       int n);
void SoftmaxInPlace(float* row, int n);
void LayerNormRows(const float* x, const float* gamma, const float* beta,
                   float* out, int rows, int d, float eps);
float GeluScalar(float x);

}  // namespace kernels

}  // namespace pgfc_lab

#endif  // PGFC_LAB_TENSOR_H_
