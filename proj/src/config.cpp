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

#include "blossom/config.hpp"

#include <sstream>

#include "blossom/errors.hpp"

namespace blossom {

void AttentionConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string("attention config: ") + name + " must be positive");
  };
  positive(compress_size, "compress_size");
  positive(stride, "stride");
  positive(select_size, "select_size");
  positive(top_k, "top_k");
  positive(window, "window");
  positive(mask_block, "mask_block");
  positive(heads, "heads");
  positive(kv_groups, "kv_groups");
  positive(d_model, "d_model");
  positive(d_head, "d_head");
  if (stride > compress_size) throw ConfigError("attention config: stride must not exceed compress_size");
  if (compress_size % stride != 0) throw ConfigError("attention config: stride must divide compress_size");
  if (select_size % stride != 0) throw ConfigError("attention config: stride must divide select_size");
  if (heads % kv_groups != 0) throw ConfigError("attention config: heads must be divisible by kv_groups");
}

std::string AttentionConfig::describe() const {
  std::ostringstream out;
  out << "l=" << compress_size << " s=" << stride << " l_sel=" << select_size
      << " k=" << top_k << " win=" << window << " blk=" << mask_block << " heads=" << heads
      << " kv_groups=" << kv_groups << " d_model=" << d_model << " d_head=" << d_head;
  return out.str();
}

}  // namespace blossom
