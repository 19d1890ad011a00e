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

// blossom: train, evaluate and inspect the sparse-attention recommender.
//
// Exit codes: 0 ok, 1 unexpected failure, 2 configuration, 3 data,
// 4 checkpoint, 5 io.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "blossom/analysis.hpp"
#include "blossom/data.hpp"
#include "blossom/errors.hpp"
#include "blossom/metrics.hpp"
#include "blossom/recommender.hpp"
#include "blossom/run_config.hpp"
#include "blossom/stis.hpp"
#include "blossom/verify.hpp"

namespace fs = std::filesystem;
using namespace blossom;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kData = 3, kCheckpoint = 4, kIo = 5 };

std::string flag_name(const std::string& key) {
  std::string out = "--" + key;
  for (auto& c : out)
    if (c == '_') c = '-';
  return out;
}

// One optional flag per run-config key, collected as raw strings so that the
// precedence logic lives in resolve_run_config.
struct ConfigFlags {
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;  // --set key=value
  std::string file;

  void attach(CLI::App* app, const std::vector<std::string>& keys) {
    app->add_option("--config", file, "flat key = value configuration file");
    app->add_option("--set", sets, "override any key: --set key=value");
    for (const auto& key : keys) {
      app->add_option_function<std::string>(
          flag_name(key), [this, key](const std::string& v) { values[key] = v; },
          "config key " + key);
    }
  }

  // defaults < BLOSSOM_SEED < config file < flags
  RunConfig resolve() const {
    RunConfig cfg;
    if (const char* env = std::getenv("BLOSSOM_SEED"); env && *env) cfg.set("seed", env);
    if (!file.empty()) cfg.apply_file(file);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [k, v] : values) cfg.set(k, v);
    cfg.finalize();
    return cfg;
  }
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

data::SplitData load_split(const RunConfig& cfg, data::InteractionLog* log_out = nullptr) {
  if (cfg.data.empty()) throw DataError("no dataset given (use --data or 'data = ...')");
  if (!fs::exists(cfg.data)) throw DataError("dataset not found: " + cfg.data);
  auto log = data::load_interactions(cfg.data);
  auto split = data::leave_one_out_split(log, cfg.min_len);
  if (split.users.empty()) throw DataError("dataset has no user with at least min_len items");
  if (log_out) *log_out = std::move(log);
  return split;
}

int run_train(const ConfigFlags& flags, const std::string& out_dir, std::string metrics_path,
              std::string checkpoint_path, bool quiet) {
  const RunConfig cfg = flags.resolve();
  data::InteractionLog log;
  const auto split = load_split(cfg, &log);
  if (metrics_path.empty()) metrics_path = (fs::path(out_dir) / "metrics.jsonl").string();
  if (checkpoint_path.empty()) checkpoint_path = (fs::path(out_dir) / "model.ckpt").string();

  auto metrics = open_output(metrics_path);
  {
    auto config_out = open_output(fs::path(checkpoint_path).replace_extension(".config"));
    config_out << cfg.to_text();
  }
  // item ids are assigned in first-seen order; keep the mapping with the model
  data::write_id_mapping(log, fs::path(checkpoint_path).replace_extension(".items"));
  // negatives are drawn from items outside the user's history
  std::size_t short_users = 0;
  for (const auto& us : split.users) {
    auto seen = us.history();
    std::sort(seen.begin(), seen.end());
    const auto distinct = static_cast<std::size_t>(std::unique(seen.begin(), seen.end()) - seen.begin());
    if (split.num_items < distinct + cfg.negatives) ++short_users;
  }
  if (short_users == split.users.size()) {
    throw DataError("no user has " + std::to_string(cfg.negatives) +
                    " unseen items to sample as negatives; lower --negatives");
  }
  if (short_users > 0 && !quiet) {
    std::cerr << "warning: " << short_users << " users lack " << cfg.negatives
              << " unseen items and are skipped during validation\n";
  }
  Model model(cfg.model_config(split.num_items), cfg.seed);
  const auto state = train(model, split, cfg.train_config(), [&](const EpochRecord& rec) {
    metrics << rec.to_json() << '\n';
    metrics.flush();
    if (!quiet) std::cerr << rec.to_json() << '\n';
  });
  if (!metrics) throw IoError("failed writing " + metrics_path);
  save_checkpoint(model, checkpoint_path);
  if (!quiet) {
    std::cerr << "best epoch " << state.best_epoch << " valid ndcg " << state.best_metric
              << (state.stopped_early ? " (early stop)" : "") << "\nwrote " << checkpoint_path
              << '\n';
  }
  return kOk;
}

int run_eval(const std::string& checkpoint, const std::string& data_path,
             const std::string& split_name, std::size_t k, std::size_t negatives,
             std::optional<std::uint64_t> seed, std::size_t min_len, const std::string& format) {
  const auto which = metrics::parse_split(split_name);
  if (format != "json" && format != "kv") throw ConfigError("unknown format '" + format + "'");
  if (!fs::exists(checkpoint)) throw CheckpointError("checkpoint not found: " + checkpoint);
  Model model = load_checkpoint(checkpoint);
  RunConfig cfg;
  cfg.data = data_path;
  cfg.min_len = min_len;
  const auto split = load_split(cfg);
  metrics::EvalOptions options;
  options.k = k;
  options.negatives = negatives;
  if (seed) {
    options.seed = *seed;
  } else if (const char* env = std::getenv("BLOSSOM_SEED"); env && *env) {
    RunConfig probe;
    probe.set("seed", env);
    options.seed = probe.seed;
  }
  const auto result = evaluate_model(model, split, which, options);
  if (result.num_users == 0) {
    throw DataError("no user could be evaluated: " +
                    (result.diagnostics.empty() ? std::string("empty split") : result.diagnostics.front()));
  }
  if (result.skipped_users > 0) {
    std::cerr << "warning: skipped " << result.skipped_users << " users, e.g. "
              << result.diagnostics.front() << '\n';
  }
  std::cout << (format == "json" ? result.to_json() + "\n" : result.to_key_value());
  return kOk;
}

std::vector<std::size_t> parse_lengths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    RunConfig probe;
    probe.set("max_len", part);  // reuses the integer parser and its diagnostics
    if (probe.max_len == 0) throw ConfigError("lengths must be positive");
    out.push_back(probe.max_len);
  }
  if (out.empty()) throw ConfigError("--lengths is empty");
  return out;
}

int run_report(const ConfigFlags& flags, bool paper_defaults, const std::string& lengths,
               const std::string& format) {
  // The attention defaults already are the published settings; the flag
  // discards any file so that the table is reproducible from nothing.
  RunConfig cfg;
  if (paper_defaults) {
    cfg.finalize();
  } else {
    cfg = flags.resolve();
  }
  const auto fmt = analysis::parse_format(format);
  std::vector<analysis::SparsityReport> sparsity;
  std::vector<analysis::ComplexityReport> complexity;
  for (auto len : parse_lengths(lengths)) {
    sparsity.push_back(analysis::count_participating(len, cfg.attention));
    complexity.push_back(analysis::complexity_report(len, cfg.attention));
  }
  if (fmt == analysis::ReportFormat::kTable) std::cout << cfg.attention.describe() << "\n\n";
  std::cout << analysis::format_reports(sparsity, complexity, fmt);
  return kOk;
}

int run_dump_mask(std::size_t length, std::size_t blk, std::size_t win, bool causal,
                  const std::string& out_path) {
  if (length == 0 || blk == 0 || win == 0)
    throw ConfigError("dump-mask: length, blk and win must be positive");
  const auto mask = stis::build_power_mask(length, blk, win, causal);
  if (out_path.empty() || out_path == "-") {
    stis::write_mask_csv(mask, std::cout);
    return kOk;
  }
  auto out = open_output(out_path);
  stis::write_mask_csv(mask, out);
  if (!out) throw IoError("failed writing " + out_path);
  return kOk;
}

int run_synth(data::SyntheticSpec spec, std::optional<std::uint64_t> seed, const std::string& out_path,
              const std::string& mapping) {
  if (seed) {
    spec.seed = *seed;
  } else if (const char* env = std::getenv("BLOSSOM_SEED"); env && *env) {
    RunConfig probe;
    probe.set("seed", env);
    spec.seed = probe.seed;
  }
  const auto log = data::make_synthetic(spec);
  if (out_path.empty() || out_path == "-") {
    data::write_interactions(log, std::cout);
  } else {
    auto out = open_output(out_path);
    data::write_interactions(log, out);
    if (!out) throw IoError("failed writing " + out_path);
  }
  if (!mapping.empty()) data::write_id_mapping(log, mapping);
  return kOk;
}

int run_verify(std::optional<std::uint64_t> seed) {
  std::uint64_t s = 42;
  if (seed) {
    s = *seed;
  } else if (const char* env = std::getenv("BLOSSOM_SEED"); env && *env) {
    RunConfig probe;
    probe.set("seed", env);
    s = probe.seed;
  }
  bool ok = true;
  for (const auto& r : verify::run_all(s)) {
    std::printf("%s %-20s %7.2fs  %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds,
                r.detail.c_str());
    ok = ok && r.passed;
  }
  return ok ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blossom: block-sparse fused attention for sequential recommendation"};
  app.require_subcommand(1);
  const auto keys = RunConfig::keys();

  auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
  ConfigFlags train_flags;
  train_flags.attach(train_cmd, keys);
  std::string out_dir = "run";
  std::string metrics_path, checkpoint_path;
  bool quiet = false;
  train_cmd->add_option("--out", out_dir, "output directory (metrics.jsonl, model.ckpt)");
  train_cmd->add_option("--metrics", metrics_path, "metric log path (overrides --out)");
  train_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint path (overrides --out)");
  train_cmd->add_flag("--quiet", quiet, "no progress on stderr");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_format = "json";
  std::size_t eval_k = 10, eval_neg = 100, eval_min_len = 3;
  std::optional<std::uint64_t> eval_seed;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "interaction TSV")->required();
  eval_cmd->add_option("--split", eval_split, "valid or test");
  eval_cmd->add_option("--k", eval_k, "ranking cutoff");
  eval_cmd->add_option("--negatives", eval_neg, "sampled negatives per user");
  eval_cmd->add_option("--seed", eval_seed, "negative-sampling seed");
  eval_cmd->add_option("--min-len", eval_min_len, "drop users with fewer interactions");
  eval_cmd->add_option("--format", eval_format, "json or kv");

  auto* report_cmd = app.add_subcommand("report", "participating-interaction and complexity tables");
  ConfigFlags report_flags;
  report_flags.attach(report_cmd, keys);
  bool paper_defaults = false;
  std::string lengths = "256,512,1024,2048", report_format = "table";
  report_cmd->add_flag("--paper-defaults", paper_defaults, "use the published hyperparameters");
  report_cmd->add_option("--lengths", lengths, "comma-separated sequence lengths");
  report_cmd->add_option("--format", report_format, "table or kv");

  auto* dump_cmd = app.add_subcommand("dump-mask", "write the short-term mask as CSV");
  std::size_t dump_len = 16, dump_blk = 1, dump_win = 2;
  bool dump_causal = false;
  std::string dump_out = "-";
  dump_cmd->add_option("--length", dump_len, "sequence length");
  dump_cmd->add_option("--blk", dump_blk, "mask block length");
  dump_cmd->add_option("--win", dump_win, "window, in blocks");
  dump_cmd->add_flag("--causal", dump_causal, "drop future positions");
  dump_cmd->add_option("--out", dump_out, "CSV path ('-' for stdout)");

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic interaction log");
  data::SyntheticSpec spec;
  std::optional<std::uint64_t> synth_seed;
  std::string synth_out = "-", synth_mapping;
  synth_cmd->add_option("--users", spec.num_users);
  synth_cmd->add_option("--items", spec.num_items);
  synth_cmd->add_option("--blocks", spec.blocks_per_user, "interest blocks per user");
  synth_cmd->add_option("--block-len", spec.block_len, "interactions per block");
  synth_cmd->add_option("--noise", spec.noise_rate, "fraction of uniform draws");
  synth_cmd->add_option("--cluster-size", spec.cluster_size, "items per interest cluster");
  synth_cmd->add_option("--seed", synth_seed);
  synth_cmd->add_option("--out", synth_out, "TSV path ('-' for stdout)");
  synth_cmd->add_option("--mapping", synth_mapping, "also write token<TAB>id for items");

  auto* verify_cmd = app.add_subcommand("verify", "run the oracle and gradient self-checks");
  std::optional<std::uint64_t> verify_seed;
  verify_cmd->add_option("--seed", verify_seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*train_cmd) return run_train(train_flags, out_dir, metrics_path, checkpoint_path, quiet);
    if (*eval_cmd)
      return run_eval(eval_ckpt, eval_data, eval_split, eval_k, eval_neg, eval_seed, eval_min_len,
                      eval_format);
    if (*report_cmd) return run_report(report_flags, paper_defaults, lengths, report_format);
    if (*dump_cmd) return run_dump_mask(dump_len, dump_blk, dump_win, dump_causal, dump_out);
    if (*synth_cmd) return run_synth(spec, synth_seed, synth_out, synth_mapping);
    if (*verify_cmd) return run_verify(verify_seed);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << '\n';
    return kCheckpoint;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}
