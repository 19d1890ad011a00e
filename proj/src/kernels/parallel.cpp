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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "blossom/kernels.hpp"

namespace blossom::kernels::parallel {
namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelWork = 1 << 15;

std::ptrdiff_t signed_extent(std::size_t n) { return static_cast<std::ptrdiff_t>(n); }

}  // namespace

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const bool wide = m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t si = 0; si < signed_extent(m); ++si) {
    const auto i = static_cast<std::size_t>(si);
    double* ci = &c[i * n];
    std::fill(ci, ci + n, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
      const double air = a[i * k + r];
      const double* br = &b[r * n];
      for (std::size_t j = 0; j < n; ++j) ci[j] += air * br[j];
    }
  }
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  const bool wide = m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t si = 0; si < signed_extent(m); ++si) {
    const auto i = static_cast<std::size_t>(si);
    const double* ai = &a[i * k];
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = &b[j * k];
      double acc = 0.0;
      for (std::size_t r = 0; r < k; ++r) acc += ai[r] * bj[r];
      c[i * n + j] = acc;
    }
  }
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
               std::size_t m, std::size_t k, std::size_t n) {
  const bool wide = m * k * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t si = 0; si < signed_extent(m); ++si) {
    const auto i = static_cast<std::size_t>(si);
    double* ci = &c[i * n];
    std::fill(ci, ci + n, 0.0);
    for (std::size_t r = 0; r < k; ++r) {
      const double ari = a[r * m + i];
      const double* br = &b[r * n];
      for (std::size_t j = 0; j < n; ++j) ci[j] += ari * br[j];
    }
  }
}

void attention_forward(std::span<const double> q, std::span<const double> k,
                       std::span<const double> v, std::span<const VisibleSet> visibility,
                       const AttentionDims& dims, std::span<double> out,
                       std::span<double> probs) {
  const auto offsets = probability_offsets(visibility, dims);
  const std::size_t dh = dims.d_head;
  const std::size_t q_stride = dims.heads * dh;
  const std::size_t kv_stride = dims.groups * dh;
  const auto work = signed_extent(dims.heads * dims.len);
  const bool wide = (offsets.back() * dh) >= kParallelWork;

#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t item = 0; item < work; ++item) {
    const std::size_t h = static_cast<std::size_t>(item) / dims.len;
    const std::size_t i = static_cast<std::size_t>(item) % dims.len;
    const std::size_t g = dims.group_of(h);
    const VisibleSet& vis = visibility_for_group(visibility, g);
    const auto row = vis.row(i);
    double* o = &out[i * q_stride + h * dh];
    std::fill(o, o + dh, 0.0);
    if (row.empty()) continue;
    double* p = &probs[offsets[h] + vis.offsets[i]];
    const double* qi = &q[i * q_stride + h * dh];

    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < row.size(); ++t) {
      const double* kj = &k[row[t] * kv_stride + g * dh];
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
      p[t] = s * dims.scale;
      top = std::max(top, p[t]);
    }
    double total = 0.0;
    for (std::size_t t = 0; t < row.size(); ++t) {
      p[t] = std::exp(p[t] - top);
      total += p[t];
    }
    for (std::size_t t = 0; t < row.size(); ++t) {
      p[t] /= total;
      const double* vj = &v[row[t] * kv_stride + g * dh];
      for (std::size_t c = 0; c < dh; ++c) o[c] += p[t] * vj[c];
    }
  }
}

void attention_backward(std::span<const double> q, std::span<const double> k,
                        std::span<const double> v, std::span<const VisibleSet> visibility,
                        const AttentionDims& dims, std::span<const double> probs,
                        std::span<const double> dout, std::span<double> dq,
                        std::span<double> dk, std::span<double> dv) {
  const auto offsets = probability_offsets(visibility, dims);
  const std::size_t dh = dims.d_head;
  const std::size_t q_stride = dims.heads * dh;
  const std::size_t kv_stride = dims.groups * dh;
  const std::size_t head_block = dims.len * dh;
  const bool wide = (offsets.back() * dh) >= kParallelWork;

  // Key/value gradients are scattered, so each head writes a private buffer
  // and the buffers are folded in head order afterwards.
  std::vector<double> dk_heads(dims.heads * head_block, 0.0);
  std::vector<double> dv_heads(dims.heads * head_block, 0.0);

#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t sh = 0; sh < signed_extent(dims.heads); ++sh) {
    const auto h = static_cast<std::size_t>(sh);
    const std::size_t g = dims.group_of(h);
    const VisibleSet& vis = visibility_for_group(visibility, g);
    double* dk_h = &dk_heads[h * head_block];
    double* dv_h = &dv_heads[h * head_block];
    std::vector<double> dp;
    for (std::size_t i = 0; i < dims.len; ++i) {
      const auto row = vis.row(i);
      if (row.empty()) continue;
      const double* p = &probs[offsets[h] + vis.offsets[i]];
      const double* qi = &q[i * q_stride + h * dh];
      const double* go = &dout[i * q_stride + h * dh];
      double* dqi = &dq[i * q_stride + h * dh];
      dp.assign(row.size(), 0.0);
      double weighted = 0.0;
      for (std::size_t t = 0; t < row.size(); ++t) {
        const double* vj = &v[row[t] * kv_stride + g * dh];
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += go[c] * vj[c];
        dp[t] = s;
        weighted += p[t] * s;
      }
      for (std::size_t t = 0; t < row.size(); ++t) {
        const std::size_t j = row[t];
        const double ds = p[t] * (dp[t] - weighted) * dims.scale;
        const double* kj = &k[j * kv_stride + g * dh];
        for (std::size_t c = 0; c < dh; ++c) {
          dqi[c] += ds * kj[c];
          dk_h[j * dh + c] += ds * qi[c];
          dv_h[j * dh + c] += p[t] * go[c];
        }
      }
    }
  }

  const auto rows = signed_extent(dims.len);
#pragma omp parallel for schedule(static) if (wide)
  for (std::ptrdiff_t sj = 0; sj < rows; ++sj) {
    const auto j = static_cast<std::size_t>(sj);
    for (std::size_t h = 0; h < dims.heads; ++h) {
      const std::size_t g = dims.group_of(h);
      for (std::size_t c = 0; c < dh; ++c) {
        dk[j * kv_stride + g * dh + c] += dk_heads[h * head_block + j * dh + c];
        dv[j * kv_stride + g * dh + c] += dv_heads[h * head_block + j * dh + c];
      }
    }
  }
}

}  // namespace blossom::kernels::parallel
