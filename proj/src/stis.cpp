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

#include "blossom/stis.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "blossom/errors.hpp"

namespace blossom::stis {

SparseMask::SparseMask(std::size_t len, std::size_t blk, std::size_t win, bool causal,
                       kernels::VisibleSet rows)
    : len_(len), blk_(blk), win_(win), causal_(causal) {
  auto holder = std::make_shared<std::vector<kernels::VisibleSet>>();
  holder->push_back(std::move(rows));
  rows_ = &holder->front();
  rows_vec_ = std::move(holder);
}

bool SparseMask::visible(std::size_t i, std::size_t j) const {
  const auto r = row(i);
  return std::binary_search(r.begin(), r.end(), static_cast<std::uint32_t>(j));
}

std::vector<std::uint8_t> SparseMask::to_dense() const {
  std::vector<std::uint8_t> dense(len_ * len_, 0);
  for (std::size_t i = 0; i < len_; ++i)
    for (std::uint32_t j : row(i)) dense[i * len_ + j] = 1;
  return dense;
}

SparseMask build_power_mask(std::size_t len, std::size_t blk, std::size_t win, bool causal) {
  if (len == 0 || blk == 0 || win == 0) {
    throw ConfigError("build_power_mask: length, block and window must be positive");
  }
  const std::size_t span = win * blk;
  const std::size_t n_blocks = (len + blk - 1) / blk;
  const std::size_t last_start = len > blk ? len - blk : 0;

  kernels::VisibleSet rows;
  rows.offsets.reserve(len + 1);
  std::vector<std::uint32_t> row;
  auto add_range = [&](std::size_t lo, std::size_t hi, std::size_t i) {  // [lo, hi)
    if (causal) hi = std::min(hi, i + 1);
    for (std::size_t j = lo; j < hi; ++j) row.push_back(static_cast<std::uint32_t>(j));
  };
  for (std::size_t i = 0; i < len; ++i) {
    row.clear();
    add_range(i + 1 >= span ? i + 1 - span : 0, std::min(len, i + span), i);
    const std::size_t bq = i / blk;
    for (std::size_t dist = 1; dist < n_blocks; dist *= 2) {
      if (bq >= dist) add_range((bq - dist) * blk, (bq - dist + 1) * blk, i);
      if (bq + dist < n_blocks) add_range((bq + dist) * blk, std::min(len, (bq + dist + 1) * blk), i);
    }
    add_range(last_start, len, i);
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    rows.push_row(row);
  }
  return SparseMask(len, blk, win, causal, std::move(rows));
}

SparseMask build_power_mask(std::size_t len, const AttentionConfig& cfg, bool causal) {
  return build_power_mask(len, cfg.mask_block, cfg.window, causal);
}

ad::Var stis_attention(ad::Var q, ad::Var k, ad::Var v, const SparseMask& mask,
                       const AttentionConfig& cfg) {
  const std::size_t len = q.shape()[0];
  if (mask.len() != len || k.shape()[0] != len || v.shape()[0] != len) {
    throw DimensionError("stis_attention: mask built for length " + std::to_string(mask.len()) +
                         " applied to sequence of length " + std::to_string(len));
  }
  kernels::AttentionDims dims;
  dims.len = len;
  dims.heads = cfg.heads;
  dims.groups = cfg.kv_groups;
  dims.d_head = cfg.d_head;
  dims.scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_head));
  return ad::attention(q, k, v, mask.shared_rows(), dims);
}

void write_mask_csv(const SparseMask& mask, std::ostream& out) {
  out << "row,visible_index\n";
  for (std::size_t i = 0; i < mask.len(); ++i)
    for (std::uint32_t j : mask.row(i)) out << i << ',' << j << '\n';
}

}  // namespace blossom::stis
