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

#include "blossom/ltis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "blossom/errors.hpp"

namespace blossom::ltis {

std::size_t compression_left_pad(std::size_t len, const AttentionConfig& cfg) {
  return len < cfg.compress_size ? cfg.compress_size - len : 0;
}

std::size_t block_count(std::size_t len, const AttentionConfig& cfg) {
  const std::size_t padded = len + compression_left_pad(len, cfg);
  return (padded - cfg.compress_size) / cfg.stride + 1;
}

std::size_t selection_block_count(std::size_t len, const AttentionConfig& cfg) {
  return (len + cfg.select_size - 1) / cfg.select_size;
}

std::vector<Tensor> split_blocks(const Tensor& keys, const AttentionConfig& cfg) {
  if (keys.rank() != 2) throw DimensionError("split_blocks: keys must be L x d_head");
  const std::size_t len = keys.rows(), d = keys.cols();
  const std::size_t pad = compression_left_pad(len, cfg);
  std::vector<Tensor> blocks;
  for (std::size_t i = 0; i < block_count(len, cfg); ++i) {
    Tensor block({cfg.compress_size, d});
    for (std::size_t r = 0; r < cfg.compress_size; ++r) {
      const std::size_t padded_pos = i * cfg.stride + r;
      if (padded_pos < pad) continue;
      const auto src = keys.row(padded_pos - pad);
      std::copy(src.begin(), src.end(), block.row(r).begin());
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

bool compression_block_visible(std::size_t block, std::size_t query, std::size_t len,
                               const AttentionConfig& cfg) {
  const std::size_t pad = compression_left_pad(len, cfg);
  const std::size_t last_padded = block * cfg.stride + cfg.compress_size - 1;
  return last_padded >= pad && last_padded - pad <= query;
}

bool selection_block_visible(std::size_t block, std::size_t query, const AttentionConfig& cfg) {
  return block * cfg.select_size <= query;
}

CompressionMLP::CompressionMLP(const std::string& prefix, const AttentionConfig& cfg,
                               double init_std, std::mt19937_64& rng) {
  const std::size_t l = cfg.compress_size, dh = cfg.d_head;
  std::normal_distribution<double> normal(0.0, init_std);
  auto random = [&](Shape shape) {
    Tensor t(std::move(shape));
    for (auto& x : t.storage()) x = normal(rng);
    return t;
  };
  position_bias = ad::Parameter(prefix + ".position_bias", random({l, dh}));
  hidden_w = ad::Parameter(prefix + ".hidden_w", random({l * dh, dh}));
  hidden_b = ad::Parameter(prefix + ".hidden_b", Tensor({dh}));
  out_w = ad::Parameter(prefix + ".out_w", random({dh, dh}));
  out_b = ad::Parameter(prefix + ".out_b", Tensor({dh}));
}

std::vector<ad::Parameter*> CompressionMLP::parameters() {
  return {&position_bias, &hidden_w, &hidden_b, &out_w, &out_b};
}

ad::Var compress_blocks(ad::Var keys, CompressionMLP& phi, const AttentionConfig& cfg) {
  ad::Tape& tape = keys.tape();
  const std::size_t len = keys.shape()[0];
  if (keys.shape()[1] != cfg.d_head) {
    throw DimensionError("compress_blocks: keys must be L x d_head");
  }
  ad::Var flat = ad::unfold_blocks(keys, cfg.compress_size, cfg.stride,
                                   compression_left_pad(len, cfg));
  ad::Var biased = ad::add_bias(flat, tape.param(phi.position_bias));
  ad::Var hidden = ad::gelu(ad::add_bias(ad::matmul(biased, tape.param(phi.hidden_w)),
                                         tape.param(phi.hidden_b)));
  return ad::add_bias(ad::matmul(hidden, tape.param(phi.out_w)), tape.param(phi.out_b));
}

Tensor compress_block(const Tensor& block, CompressionMLP& phi) {
  const std::size_t l = phi.position_bias.value.shape()[0];
  const std::size_t dh = phi.position_bias.value.shape()[1];
  if (block.rank() != 2 || block.rows() != l || block.cols() != dh) {
    throw DimensionError("compress_block: block must be " + shape_string({l, dh}));
  }
  AttentionConfig cfg;
  cfg.compress_size = l;
  cfg.stride = l;
  cfg.d_head = dh;
  ad::Tape tape(false);
  ad::Var out = compress_blocks(tape.constant(block), phi, cfg);
  return out.value().reshaped({dh});
}

CompressedKV compress_kv(const Tensor& keys, const Tensor& values, CompressionMLP& key_phi,
                         CompressionMLP& value_phi, const AttentionConfig& cfg) {
  ad::Tape tape(false);
  CompressedKV out;
  out.keys = compress_blocks(tape.constant(keys), key_phi, cfg).value();
  out.values = compress_blocks(tape.constant(values), value_phi, cfg).value();
  return out;
}

Tensor importance_scores(const Tensor& queries, const Tensor& compressed_keys,
                         const AttentionConfig& cfg) {
  if (queries.rank() != 2 || compressed_keys.rank() != 2 ||
      queries.cols() != compressed_keys.cols()) {
    throw DimensionError("importance_scores: query " + shape_string(queries.shape()) +
                         " vs compressed keys " + shape_string(compressed_keys.shape()));
  }
  const std::size_t len = queries.rows(), m = compressed_keys.rows(), dh = queries.cols();
  if (m != block_count(len, cfg)) {
    throw DimensionError("importance_scores: compressed key count does not match block count");
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor logits({len, m});
  std::vector<std::uint8_t> visible(len * m, 0);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t b = 0; b < m; ++b) {
      if (!compression_block_visible(b, i, len, cfg)) continue;
      visible[i * m + b] = 1;
      double s = 0.0;
      for (std::size_t c = 0; c < dh; ++c) s += queries(i, c) * compressed_keys(b, c);
      logits(i, b) = s * scale;
    }
  }
  return masked_softmax(logits, &visible, 1);
}

Tensor remap_scores(const Tensor& cmp_scores, const AttentionConfig& cfg,
                    std::size_t selection_blocks) {
  if (cfg.stride == 0 || cfg.compress_size % cfg.stride != 0 ||
      cfg.select_size % cfg.stride != 0) {
    throw ConfigError("remap_scores: stride must divide compress_size and select_size");
  }
  const std::size_t rows = cmp_scores.rows(), m = cmp_scores.cols();
  const auto sel_ratio = static_cast<std::ptrdiff_t>(cfg.select_size / cfg.stride);
  const auto cmp_ratio = static_cast<std::ptrdiff_t>(cfg.compress_size / cfg.stride);
  Tensor out({rows, selection_blocks});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < selection_blocks; ++j) {
      double total = 0.0;
      for (std::ptrdiff_t a = 0; a < sel_ratio; ++a) {
        for (std::ptrdiff_t b = 0; b < cmp_ratio; ++b) {
          const std::ptrdiff_t idx = sel_ratio * static_cast<std::ptrdiff_t>(j) - a - b;
          if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(m)) {
            total += cmp_scores(r, static_cast<std::size_t>(idx));
          }
        }
      }
      out(r, j) = total;
    }
  }
  return out;
}

std::vector<Tensor> aggregate_group_scores(const std::vector<Tensor>& per_head,
                                           const AttentionConfig& cfg) {
  if (per_head.size() != cfg.heads) {
    throw DimensionError("aggregate_group_scores: expected one score tensor per head");
  }
  std::vector<Tensor> groups(cfg.kv_groups);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    Tensor& acc = groups[cfg.group_of_head(h)];
    if (acc.empty()) {
      acc = per_head[h];
      continue;
    }
    if (acc.shape() != per_head[h].shape()) {
      throw DimensionError("aggregate_group_scores: head score shapes differ");
    }
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += per_head[h][i];
  }
  return groups;
}

std::vector<std::vector<std::uint32_t>> select_topk(const Tensor& shared_scores,
                                                   const AttentionConfig& cfg) {
  const std::size_t len = shared_scores.rows(), n = shared_scores.cols();
  std::vector<std::vector<std::uint32_t>> selected(len);
  std::vector<std::uint32_t> candidates;
  for (std::size_t i = 0; i < len; ++i) {
    candidates.clear();
    for (std::uint32_t b = 0; b < n; ++b)
      if (selection_block_visible(b, i, cfg)) candidates.push_back(b);
    const std::size_t keep = std::min(cfg.top_k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [&](std::uint32_t a, std::uint32_t b) {
                        const double sa = shared_scores(i, a), sb = shared_scores(i, b);
                        return sa != sb ? sa > sb : a < b;
                      });
    selected[i].assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep));
    std::sort(selected[i].begin(), selected[i].end());
  }
  return selected;
}

kernels::VisibleSet gather_positions(const std::vector<std::vector<std::uint32_t>>& selected,
                                     std::size_t len, const AttentionConfig& cfg) {
  if (selected.size() != len) throw DimensionError("gather_positions: one selection per query");
  kernels::VisibleSet set;
  std::vector<std::uint32_t> row;
  for (std::size_t i = 0; i < len; ++i) {
    row.clear();
    for (std::uint32_t b : selected[i]) {
      const std::size_t start = b * cfg.select_size;
      const std::size_t stop = std::min({start + cfg.select_size, len, i + 1});
      for (std::size_t j = start; j < stop; ++j) row.push_back(static_cast<std::uint32_t>(j));
    }
    set.push_row(row);
  }
  return set;
}

Selection plan_selection(const Tensor& queries, const std::vector<Tensor>& compressed_keys,
                         const AttentionConfig& cfg) {
  const std::size_t len = queries.rows(), dh = cfg.d_head;
  if (queries.cols() != cfg.q_width() || compressed_keys.size() != cfg.kv_groups) {
    throw DimensionError("plan_selection: query width or group count does not match config");
  }
  const std::size_t n_sel = selection_block_count(len, cfg);
  std::vector<Tensor> per_head;
  per_head.reserve(cfg.heads);
  Tensor q_head({len, dh});
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < dh; ++c) q_head(i, c) = queries(i, h * dh + c);
    const Tensor cmp = importance_scores(q_head, compressed_keys[cfg.group_of_head(h)], cfg);
    per_head.push_back(remap_scores(cmp, cfg, n_sel));
  }
  const auto shared = aggregate_group_scores(per_head, cfg);

  Selection selection;
  auto visibility = std::make_shared<std::vector<kernels::VisibleSet>>();
  for (std::size_t g = 0; g < cfg.kv_groups; ++g) {
    selection.blocks.push_back(select_topk(shared[g], cfg));
    visibility->push_back(gather_positions(selection.blocks.back(), len, cfg));
  }
  selection.visibility = std::move(visibility);
  return selection;
}

ad::Var ltis_attention(ad::Var q, ad::Var k, ad::Var v, const Selection& selection,
                       const AttentionConfig& cfg) {
  kernels::AttentionDims dims;
  dims.len = q.shape()[0];
  dims.heads = cfg.heads;
  dims.groups = cfg.kv_groups;
  dims.d_head = cfg.d_head;
  dims.scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_head));
  return ad::attention(q, k, v, selection.visibility, dims);
}

}  // namespace blossom::ltis
