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
#include <string>

namespace blossom {

/// Sparsity and architecture hyperparameters of one attention layer.
struct AttentionConfig {
  std::size_t compress_size = 32;  // l: compression block length
  std::size_t stride = 16;         // s: distance between compression block starts
  std::size_t select_size = 16;    // l': selection block length
  std::size_t top_k = 4;           // k: selection blocks gathered per query
  std::size_t window = 8;          // win: local window, in mask blocks
  std::size_t mask_block = 1;      // blk: power-mask block length
  std::size_t heads = 8;
  std::size_t kv_groups = 2;
  std::size_t d_model = 64;
  std::size_t d_head = 8;

  // Throws ConfigError naming the violated constraint.
  void validate() const;

  std::size_t q_width() const { return heads * d_head; }
  std::size_t kv_width() const { return kv_groups * d_head; }
  std::size_t heads_per_group() const { return heads / kv_groups; }
  std::size_t group_of_head(std::size_t head) const { return head / heads_per_group(); }
  // w = win * blk, the half-width of the local window in positions.
  std::size_t window_span() const { return window * mask_block; }

  std::string describe() const;
};

}  // namespace blossom
