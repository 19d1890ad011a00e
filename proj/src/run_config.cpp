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

#include "blossom/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "blossom/errors.hpp"

namespace blossom {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError("config key '" + key + "': expected an unsigned integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || p != end)
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::vector<std::string> RunConfig::keys() {
  return {"data",       "compress_size", "stride",     "select_size", "top_k",
          "window",     "mask_block",    "heads",      "kv_groups",   "d_model",
          "d_head",     "layers",        "learning_rate", "batch_size", "dropout",
          "seed",       "epochs",        "patience",   "eval_k",      "negatives",
          "max_len",    "min_len",       "clip_norm",  "init_std",    "branch"};
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  auto& a = attention;
  if (key == "data") data = v;
  else if (key == "compress_size") a.compress_size = to_size(key, v);
  else if (key == "stride") a.stride = to_size(key, v);
  else if (key == "select_size") a.select_size = to_size(key, v);
  else if (key == "top_k") a.top_k = to_size(key, v);
  else if (key == "window") a.window = to_size(key, v);
  else if (key == "mask_block") a.mask_block = to_size(key, v);
  else if (key == "heads") a.heads = to_size(key, v);
  else if (key == "kv_groups") a.kv_groups = to_size(key, v);
  else if (key == "d_model") a.d_model = to_size(key, v);
  else if (key == "d_head") a.d_head = to_size(key, v);
  else if (key == "layers") layers = to_size(key, v);
  else if (key == "learning_rate") learning_rate = to_double(key, v);
  else if (key == "batch_size") batch_size = to_size(key, v);
  else if (key == "dropout") dropout = to_double(key, v);
  else if (key == "seed") seed = to_u64(key, v);
  else if (key == "epochs") epochs = to_size(key, v);
  else if (key == "patience") patience = to_size(key, v);
  else if (key == "eval_k") eval_k = to_size(key, v);
  else if (key == "negatives") negatives = to_size(key, v);
  else if (key == "max_len") max_len = to_size(key, v);
  else if (key == "min_len") min_len = to_size(key, v);
  else if (key == "clip_norm") clip_norm = to_double(key, v);
  else if (key == "init_std") init_std = to_double(key, v);
  else if (key == "branch") {
    try {
      branch = fusion::parse_branch(v);
    } catch (const ConfigError& e) {
      throw ConfigError("config key 'branch': " + std::string(e.what()));
    }
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void RunConfig::apply_text(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected 'key = value'");
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  apply_text(in, path.string());
}

void RunConfig::finalize() {
  if (attention.d_head == 0) {
    if (attention.heads == 0 || attention.d_model % attention.heads != 0)
      throw ConfigError("d_head = 0 requires heads to divide d_model");
    attention.d_head = attention.d_model / attention.heads;
  }
  attention.validate();
  if (layers == 0) throw ConfigError("config key 'layers' must be positive");
  if (batch_size == 0) throw ConfigError("config key 'batch_size' must be positive");
  if (max_len == 0) throw ConfigError("config key 'max_len' must be positive");
  if (eval_k == 0) throw ConfigError("config key 'eval_k' must be positive");
  if (learning_rate < 0) throw ConfigError("config key 'learning_rate' must be non-negative");
  if (dropout < 0 || dropout >= 1) throw ConfigError("config key 'dropout' must be in [0, 1)");
  if (min_len < 3) throw ConfigError("config key 'min_len' must be at least 3");
}

std::string RunConfig::to_text() const {
  const auto& a = attention;
  std::ostringstream out;
  out << "data = " << data << '\n'
      << "compress_size = " << a.compress_size << '\n'
      << "stride = " << a.stride << '\n'
      << "select_size = " << a.select_size << '\n'
      << "top_k = " << a.top_k << '\n'
      << "window = " << a.window << '\n'
      << "mask_block = " << a.mask_block << '\n'
      << "heads = " << a.heads << '\n'
      << "kv_groups = " << a.kv_groups << '\n'
      << "d_model = " << a.d_model << '\n'
      << "d_head = " << a.d_head << '\n'
      << "layers = " << layers << '\n'
      << "learning_rate = " << fmt(learning_rate) << '\n'
      << "batch_size = " << batch_size << '\n'
      << "dropout = " << fmt(dropout) << '\n'
      << "seed = " << seed << '\n'
      << "epochs = " << epochs << '\n'
      << "patience = " << patience << '\n'
      << "eval_k = " << eval_k << '\n'
      << "negatives = " << negatives << '\n'
      << "max_len = " << max_len << '\n'
      << "min_len = " << min_len << '\n'
      << "clip_norm = " << fmt(clip_norm) << '\n'
      << "init_std = " << fmt(init_std) << '\n'
      << "branch = " << fusion::branch_name(branch) << '\n';
  return out.str();
}

ModelConfig RunConfig::model_config(std::size_t num_items) const {
  ModelConfig m;
  m.attention = attention;
  m.num_items = num_items;
  m.layers = layers;
  m.max_len = max_len;
  m.dropout = dropout;
  m.init_std = init_std;
  m.branch = branch;
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.learning_rate = learning_rate;
  t.batch_size = batch_size;
  t.epochs = epochs;
  t.patience = patience;
  t.clip_norm = clip_norm;
  t.seed = seed;
  t.eval.k = eval_k;
  t.eval.negatives = negatives;
  t.eval.seed = seed;
  return t;
}

RunConfig resolve_run_config(const std::filesystem::path* file,
                             const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  if (file) cfg.apply_file(*file);
  for (const auto& [k, v] : overrides) cfg.set(k, v);
  cfg.finalize();
  return cfg;
}

}  // namespace blossom
