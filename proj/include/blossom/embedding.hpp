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

#include <random>
#include <span>
#include <vector>

#include "blossom/autodiff.hpp"
#include "blossom/data.hpp"
#include "blossom/tensor.hpp"

namespace blossom {

/// Item embeddings; row 0 is the padding vector and stays zero.
struct EmbeddingTable {
  ad::Parameter weights;

  EmbeddingTable() = default;
  EmbeddingTable(std::size_t num_items, std::size_t dim, double init_std, std::mt19937_64& rng);

  std::size_t rows() const { return weights.value.shape()[0]; }
  std::size_t dim() const { return weights.value.shape()[1]; }
  // Re-zeroes the padding row and its gradient.
  void clear_padding();
};

// B x L x d lookup of a padded batch; padded positions map to zeros.
Tensor embed(const data::SeqBatch& batch, const EmbeddingTable& table);

/// Cosine/sine tables for rotary position encoding.
class RoPECache {
 public:
  RoPECache() = default;
  RoPECache(std::size_t d_head, std::size_t max_positions, double base = 10000.0);

  std::size_t d_head() const { return d_head_; }
  std::size_t max_positions() const { return max_positions_; }
  double cos(std::size_t position, std::size_t pair) const;
  double sin(std::size_t position, std::size_t pair) const;

 private:
  std::size_t d_head_ = 0;
  std::size_t max_positions_ = 0;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

/**
 * Rotates consecutive pairs (2i, 2i+1) of every d_head-wide head in each
 * row of `x` by angle position * base^(-2i/d_head). `positions[r]` is the
 * position of row r.
 */
Tensor apply_rope(const Tensor& x, std::span<const std::size_t> positions, const RoPECache& cache);

// Differentiable form with row r at position r.
ad::Var apply_rope(ad::Var x, const RoPECache& cache);

}  // namespace blossom
