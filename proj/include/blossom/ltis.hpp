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

// Long-term interest selection: overlapping key blocks are compressed by a
// learnable map, scored against each query, remapped onto selection blocks,
// summed over the heads of a KV group, and the top-k selection blocks are
// gathered for attention.

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "blossom/autodiff.hpp"
#include "blossom/config.hpp"
#include "blossom/kernels.hpp"
#include "blossom/tensor.hpp"

namespace blossom::ltis {

// Zeros prepended to K so that a sequence shorter than one block still
// yields a single compression block.
std::size_t compression_left_pad(std::size_t len, const AttentionConfig& cfg);
// M = floor((L - l) / s) + 1, after short-sequence padding.
std::size_t block_count(std::size_t len, const AttentionConfig& cfg);
std::size_t selection_block_count(std::size_t len, const AttentionConfig& cfg);

// Block i covers positions [i*s, i*s + l).
std::vector<Tensor> split_blocks(const Tensor& keys, const AttentionConfig& cfg);

// A compression block is usable by a query once it lies entirely at or
// before the query position.
bool compression_block_visible(std::size_t block, std::size_t query, std::size_t len,
                               const AttentionConfig& cfg);
// A selection block is usable once its first position is at or before the query.
bool selection_block_visible(std::size_t block, std::size_t query, const AttentionConfig& cfg);

/**
 * Maps an l x d_head block to one d_head vector:
 * out_w * gelu(hidden_w^T * flatten(block + position_bias) + hidden_b) + out_b.
 */
struct CompressionMLP {
  ad::Parameter position_bias;  // l x d_head
  ad::Parameter hidden_w;       // (l * d_head) x d_head
  ad::Parameter hidden_b;       // d_head
  ad::Parameter out_w;          // d_head x d_head
  ad::Parameter out_b;          // d_head

  CompressionMLP() = default;
  CompressionMLP(const std::string& prefix, const AttentionConfig& cfg, double init_std,
                 std::mt19937_64& rng);
  std::vector<ad::Parameter*> parameters();
};

// Compresses every block of one group's keys (L x d_head) to M x d_head.
ad::Var compress_blocks(ad::Var keys, CompressionMLP& phi, const AttentionConfig& cfg);
Tensor compress_block(const Tensor& block, CompressionMLP& phi);

struct CompressedKV {
  Tensor keys;    // M x d_head
  Tensor values;  // M x d_head
};

CompressedKV compress_kv(const Tensor& keys, const Tensor& values, CompressionMLP& key_phi,
                         CompressionMLP& value_phi, const AttentionConfig& cfg);

// L x M softmax over the visible compression blocks with scale 1/sqrt(d_head);
// invisible blocks score zero.
Tensor importance_scores(const Tensor& queries, const Tensor& compressed_keys,
                         const AttentionConfig& cfg);

// sel[j] = sum_{m < l'/s} sum_{n < l/s} cmp[(l'/s) j - m - n], out-of-range terms
// dropped. Works row-wise on rows x M input.
Tensor remap_scores(const Tensor& cmp_scores, const AttentionConfig& cfg,
                    std::size_t selection_blocks);

// Sums per-head selection scores over the heads of each KV group.
std::vector<Tensor> aggregate_group_scores(const std::vector<Tensor>& per_head,
                                           const AttentionConfig& cfg);

// Per query: indices of the k highest-scoring visible selection blocks, ties
// to the lower index, returned in ascending block order.
std::vector<std::vector<std::uint32_t>> select_topk(const Tensor& shared_scores,
                                                   const AttentionConfig& cfg);

// Positions of the chosen blocks that are at or before each query.
kernels::VisibleSet gather_positions(const std::vector<std::vector<std::uint32_t>>& selected,
                                     std::size_t len, const AttentionConfig& cfg);

struct Selection {
  // [group][query] -> chosen selection blocks
  std::vector<std::vector<std::vector<std::uint32_t>>> blocks;
  std::shared_ptr<const std::vector<kernels::VisibleSet>> visibility;
};

/// Runs scoring, remapping, aggregation and top-k for every group.
/// `queries` is L x (heads*d_head); `compressed_keys[g]` is M x d_head.
Selection plan_selection(const Tensor& queries, const std::vector<Tensor>& compressed_keys,
                         const AttentionConfig& cfg);

// Attention of each query over its gathered positions (per-head outputs,
// L x heads*d_head, before the output projection).
ad::Var ltis_attention(ad::Var q, ad::Var k, ad::Var v, const Selection& selection,
                       const AttentionConfig& cfg);

}  // namespace blossom::ltis
