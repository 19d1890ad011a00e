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

#include "blossom/kernels.hpp"

#include "blossom/errors.hpp"

namespace blossom::kernels {

void VisibleSet::push_row(std::span<const std::uint32_t> positions) {
  indices.insert(indices.end(), positions.begin(), positions.end());
  offsets.push_back(static_cast<std::uint32_t>(indices.size()));
}

VisibleSet VisibleSet::causal(std::size_t len) {
  VisibleSet set;
  set.offsets.reserve(len + 1);
  set.indices.reserve(len * (len + 1) / 2);
  for (std::size_t i = 0; i < len; ++i) {
    for (std::size_t j = 0; j <= i; ++j) set.indices.push_back(static_cast<std::uint32_t>(j));
    set.offsets.push_back(static_cast<std::uint32_t>(set.indices.size()));
  }
  return set;
}

const VisibleSet& visibility_for_group(std::span<const VisibleSet> visibility,
                                       std::size_t group) {
  if (visibility.empty()) throw DimensionError("attention: empty visibility");
  return visibility.size() == 1 ? visibility[0] : visibility[group];
}

std::vector<std::size_t> probability_offsets(std::span<const VisibleSet> visibility,
                                             const AttentionDims& dims) {
  if (dims.groups == 0 || dims.heads % dims.groups != 0) {
    throw ConfigError("attention: heads must be divisible by kv groups");
  }
  if (visibility.size() != 1 && visibility.size() != dims.groups) {
    throw DimensionError("attention: visibility must be shared or one per group");
  }
  std::vector<std::size_t> offsets(dims.heads + 1, 0);
  for (std::size_t h = 0; h < dims.heads; ++h) {
    const VisibleSet& vis = visibility_for_group(visibility, dims.group_of(h));
    if (vis.rows() != dims.len) {
      throw DimensionError("attention: visibility rows do not match sequence length");
    }
    offsets[h + 1] = offsets[h] + vis.nnz();
  }
  return offsets;
}

}  // namespace blossom::kernels
