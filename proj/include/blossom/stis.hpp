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

// Short-term interest selection: attention restricted by the power-law mask.
// Position j is visible from i when |i - j| < win*blk, when their mask
// blocks are a power of two apart (2^0 included), or when j lies in the
// final blk positions. Causal masks additionally require j <= i.

#include <iosfwd>
#include <memory>
#include <vector>

#include "blossom/autodiff.hpp"
#include "blossom/config.hpp"
#include "blossom/kernels.hpp"

namespace blossom::stis {

class SparseMask {
 public:
  SparseMask() = default;
  SparseMask(std::size_t len, std::size_t blk, std::size_t win, bool causal,
             kernels::VisibleSet rows);

  std::size_t len() const { return len_; }
  std::size_t block() const { return blk_; }
  std::size_t window() const { return win_; }
  bool causal() const { return causal_; }

  std::span<const std::uint32_t> row(std::size_t i) const { return rows_->row(i); }
  std::size_t nnz() const { return rows_->nnz(); }
  bool visible(std::size_t i, std::size_t j) const;
  const kernels::VisibleSet& rows() const { return *rows_; }
  std::shared_ptr<const std::vector<kernels::VisibleSet>> shared_rows() const { return rows_vec_; }

  std::vector<std::uint8_t> to_dense() const;

 private:
  std::size_t len_ = 0;
  std::size_t blk_ = 1;
  std::size_t win_ = 1;
  bool causal_ = true;
  std::shared_ptr<const std::vector<kernels::VisibleSet>> rows_vec_;
  const kernels::VisibleSet* rows_ = nullptr;
};

SparseMask build_power_mask(std::size_t len, std::size_t blk, std::size_t win, bool causal);
SparseMask build_power_mask(std::size_t len, const AttentionConfig& cfg, bool causal = true);

// Grouped attention under the mask (per-head outputs, before projection).
ad::Var stis_attention(ad::Var q, ad::Var k, ad::Var v, const SparseMask& mask,
                       const AttentionConfig& cfg);

// `row,visible_index` CSV with a header line.
void write_mask_csv(const SparseMask& mask, std::ostream& out);

}  // namespace blossom::stis
