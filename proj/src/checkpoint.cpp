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

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "blossom/errors.hpp"
#include "blossom/recommender.hpp"

namespace blossom {
namespace {

constexpr const char* kMagic = "blossom-checkpoint";
constexpr int kVersion = 1;

std::string hex(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", x);
  return buf;
}

std::map<std::string, std::string> config_entries(const ModelConfig& c) {
  const AttentionConfig& a = c.attention;
  return {
      {"num_items", std::to_string(c.num_items)},
      {"layers", std::to_string(c.layers)},
      {"max_len", std::to_string(c.max_len)},
      {"dropout", hex(c.dropout)},
      {"init_std", hex(c.init_std)},
      {"branch", fusion::branch_name(c.branch)},
      {"compress_size", std::to_string(a.compress_size)},
      {"stride", std::to_string(a.stride)},
      {"select_size", std::to_string(a.select_size)},
      {"top_k", std::to_string(a.top_k)},
      {"window", std::to_string(a.window)},
      {"mask_block", std::to_string(a.mask_block)},
      {"heads", std::to_string(a.heads)},
      {"kv_groups", std::to_string(a.kv_groups)},
      {"d_model", std::to_string(a.d_model)},
      {"d_head", std::to_string(a.d_head)},
  };
}

std::size_t to_size(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw CheckpointError("checkpoint: missing config key " + key);
  try {
    return static_cast<std::size_t>(std::stoull(it->second));
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint: bad value for " + key);
  }
}

double to_real(const std::map<std::string, std::string>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw CheckpointError("checkpoint: missing config key " + key);
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str()) throw CheckpointError("checkpoint: bad value for " + key);
  return v;
}

}  // namespace

void save_checkpoint(Model& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << kMagic << ' ' << kVersion << '\n';
  for (const auto& [key, value] : config_entries(model.config())) {
    out << "config " << key << " = " << value << '\n';
  }
  const auto params = model.parameters();
  out << "tensors " << params.size() << '\n';
  for (auto* p : params) {
    const auto& shape = p->value.shape();
    out << "tensor " << p->name << ' ' << shape.size();
    for (auto e : shape) out << ' ' << e;
    out << '\n';
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      if (i) out << ' ';
      out << hex(p->value[i]);
    }
    out << '\n';
  }
  out << "end\n";
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != kMagic) throw CheckpointError("not a blossom checkpoint: " + path.string());
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }

  std::map<std::string, std::string> entries;
  std::string word;
  std::size_t tensor_count = 0;
  while (in >> word) {
    if (word == "config") {
      std::string key, eq, value;
      in >> key >> eq >> value;
      if (eq != "=") throw CheckpointError("checkpoint: malformed config line for " + key);
      entries[key] = value;
    } else if (word == "tensors") {
      in >> tensor_count;
      break;
    } else {
      throw CheckpointError("checkpoint: unexpected token '" + word + "'");
    }
  }

  ModelConfig cfg;
  cfg.num_items = to_size(entries, "num_items");
  cfg.layers = to_size(entries, "layers");
  cfg.max_len = to_size(entries, "max_len");
  cfg.dropout = to_real(entries, "dropout");
  cfg.init_std = to_real(entries, "init_std");
  cfg.branch = fusion::parse_branch(entries.count("branch") ? entries["branch"] : "fused");
  cfg.attention.compress_size = to_size(entries, "compress_size");
  cfg.attention.stride = to_size(entries, "stride");
  cfg.attention.select_size = to_size(entries, "select_size");
  cfg.attention.top_k = to_size(entries, "top_k");
  cfg.attention.window = to_size(entries, "window");
  cfg.attention.mask_block = to_size(entries, "mask_block");
  cfg.attention.heads = to_size(entries, "heads");
  cfg.attention.kv_groups = to_size(entries, "kv_groups");
  cfg.attention.d_model = to_size(entries, "d_model");
  cfg.attention.d_head = to_size(entries, "d_head");

  Model model = [&] {
    try {
      return Model(cfg, 0);
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("checkpoint: invalid model config: ") + e.what());
    }
  }();
  std::map<std::string, ad::Parameter*> by_name;
  for (auto* p : model.parameters()) by_name[p->name] = p;
  if (tensor_count != by_name.size()) {
    throw CheckpointError("checkpoint: holds " + std::to_string(tensor_count) +
                          " tensors, model expects " + std::to_string(by_name.size()));
  }
  for (std::size_t t = 0; t < tensor_count; ++t) {
    std::string tag, name;
    std::size_t rank = 0;
    in >> tag >> name >> rank;
    if (tag != "tensor") throw CheckpointError("checkpoint: truncated tensor list");
    auto it = by_name.find(name);
    if (it == by_name.end()) throw CheckpointError("checkpoint: unknown tensor " + name);
    Shape shape(rank);
    for (auto& e : shape) in >> e;
    if (shape != it->second->value.shape()) {
      throw CheckpointError("checkpoint: tensor " + name + " has shape " + shape_string(shape) +
                            ", model expects " + shape_string(it->second->value.shape()));
    }
    for (double& x : it->second->value.storage()) {
      std::string token;
      in >> token;
      char* end = nullptr;
      x = std::strtod(token.c_str(), &end);
      if (token.empty() || end != token.c_str() + token.size()) {
        throw CheckpointError("checkpoint: bad value in tensor " + name);
      }
    }
  }
  in >> word;
  if (word != "end") throw CheckpointError("checkpoint: missing end marker");
  return model;
}

}  // namespace blossom
