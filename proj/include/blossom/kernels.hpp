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

// Hot loops of the library. Every kernel exists twice: `serial` is the
// straightforward reference kept for testing, `parallel` is the OpenMP
// version used by the model. Parallel kernels partition work by output
// element, so their results do not depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace blossom::kernels {

/// Per-query list of visible key positions, stored CSR-style.
struct VisibleSet {
  std::vector<std::uint32_t> offsets{0};
  std::vector<std::uint32_t> indices;

  std::size_t rows() const { return offsets.size() - 1; }
  std::size_t nnz() const { return indices.size(); }
  std::span<const std::uint32_t> row(std::size_t i) const {
    return {indices.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  // Appends a row; `positions` must be sorted ascending without duplicates.
  void push_row(std::span<const std::uint32_t> positions);

  static VisibleSet causal(std::size_t len);

  friend bool operator==(const VisibleSet&, const VisibleSet&) = default;
};

/// Geometry of grouped-query attention over one sequence.
/// q is len x (heads * d_head); k and v are len x (groups * d_head).
/// Head h reads the key/value columns of group h / (heads / groups).
struct AttentionDims {
  std::size_t len = 0;
  std::size_t heads = 1;
  std::size_t groups = 1;
  std::size_t d_head = 1;
  double scale = 1.0;

  std::size_t group_of(std::size_t head) const { return head / (heads / groups); }
};

// `visibility` holds either one set shared by every group or one per group.
const VisibleSet& visibility_for_group(std::span<const VisibleSet> visibility,
                                       std::size_t group);

// Offset of head h inside the saved-probability buffer, plus the total size.
std::vector<std::size_t> probability_offsets(std::span<const VisibleSet> visibility,
                                             const AttentionDims& dims);

namespace serial {

// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
// c[m x n] = a[m x k] * b[n x k]^T
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
// c[m x n] = a[k x m]^T * b[k x n]
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);

void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<const VisibleSet> visibility,
                       const AttentionDims& dims, std::span<double> out,
                       std::span<double> probs);

// Accumulates into dq, dk, dv.
void attention_backward(std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const VisibleSet> visibility,
                        const AttentionDims& dims, std::span<const double> probs,
                        std::span<const double> dout, std::span<double> dq,
                        std::span<double> dk, std::span<double> dv);

}  // namespace serial

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n);

void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<const VisibleSet> visibility,
                       const AttentionDims& dims, std::span<double> out,
                       std::span<double> probs);

void attention_backward(std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const VisibleSet> visibility,
                        const AttentionDims& dims, std::span<const double> probs,
                        std::span<const double> dout, std::span<double> dq,
                        std::span<double> dk, std::span<double> dv);

}  // namespace parallel

}  // namespace blossom::kernels
