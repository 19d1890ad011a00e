// Copyright 2026 The Blossom Authors.
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace blossom {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);

/**
 * Dense row-major array of 64-bit reals.
 *
 * Tensors are plain values: copying copies the data. Rank-2 accessors are
 * provided for the matrix-heavy code paths; higher ranks are addressed
 * through flat indexing.
 */
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor identity(std::size_t n);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  // Rank-2 view. A rank-1 tensor reads as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  Tensor reshaped(Shape shape) const;
  void fill(double value);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

std::size_t shape_volume(const Shape& shape);

// Numeric-core operations on plain tensors (no differentiation).

// Standard matrix product of rank-2 tensors. Throws DimensionError when the
// inner extents disagree.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

/**
 * Softmax along `axis` with an optional multiplicative visibility mask of the
 * same shape (nonzero = visible). Masked entries behave as logit -inf. A slice
 * with no visible entry yields all zeros rather than NaN.
 */
Tensor masked_softmax(const Tensor& logits, const std::vector<std::uint8_t>* mask = nullptr,
                      std::size_t axis = static_cast<std::size_t>(-1));

// Normalizes over the last axis (eps = 1e-5) then applies gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta);

inline constexpr double kLayerNormEps = 1e-5;

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace blossom
