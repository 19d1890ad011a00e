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

// Flat `key = value` run configuration shared by the CLI commands.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "blossom/config.hpp"
#include "blossom/fusion.hpp"
#include "blossom/recommender.hpp"

namespace blossom {

struct RunConfig {
  std::string data;
  AttentionConfig attention;
  std::size_t layers = 2;
  double learning_rate = 1e-3;
  std::size_t batch_size = 2048;
  double dropout = 0.3;
  std::uint64_t seed = 42;
  std::size_t epochs = 200;
  std::size_t patience = 15;
  std::size_t eval_k = 10;
  std::size_t negatives = 100;
  std::size_t max_len = 100;
  std::size_t min_len = 3;
  double clip_norm = 5.0;
  double init_std = 0.05;
  fusion::Branch branch = fusion::Branch::kFused;

  // Sets one field from its textual value. Unknown keys and unparsable
  // values throw ConfigError naming the key. `d_head = 0` means
  // d_model / heads.
  void set(const std::string& key, const std::string& value);

  // Applies `key = value` lines; '#' starts a comment.
  void apply_text(std::istream& in, const std::string& source = "<config>");
  void apply_file(const std::filesystem::path& path);

  // Fills in derived values and validates.
  void finalize();

  static std::vector<std::string> keys();
  // Canonical `key = value` rendering, in keys() order.
  std::string to_text() const;

  ModelConfig model_config(std::size_t num_items) const;
  TrainConfig train_config() const;
};

/**
 * Defaults, then the config file (if any), then explicit overrides, in that
 * order. `overrides` maps key to value as given on the command line.
 */
RunConfig resolve_run_config(const std::filesystem::path* file,
                             const std::map<std::string, std::string>& overrides);

}  // namespace blossom
