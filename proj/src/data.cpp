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

#include "blossom/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>

#include "blossom/errors.hpp"

namespace blossom::data {
namespace {

std::string format_timestamp(double ts) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), ts);
  return std::string(buf, res.ptr);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

std::vector<std::vector<ItemId>> InteractionLog::sequences() const {
  std::vector<std::vector<ItemId>> seqs(user_tokens.size());
  for (const auto& r : records) seqs[r.user].push_back(r.item);
  return seqs;
}

std::vector<RawInteraction> InteractionLog::raw() const {
  std::vector<RawInteraction> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back({user_tokens[r.user], item_tokens[r.item], r.timestamp});
  return out;
}

InteractionLog build_log(std::span<const RawInteraction> raw) {
  InteractionLog log;
  std::unordered_map<std::string, UserId> users;
  std::unordered_map<std::string, ItemId> items;
  log.records.reserve(raw.size());
  for (const auto& r : raw) {
    auto [u, new_user] = users.try_emplace(r.user, static_cast<UserId>(log.user_tokens.size()));
    if (new_user) log.user_tokens.push_back(r.user);
    auto [i, new_item] = items.try_emplace(r.item, static_cast<ItemId>(log.item_tokens.size()));
    if (new_item) log.item_tokens.push_back(r.item);
    log.records.push_back({u->second, i->second, r.timestamp});
  }
  std::stable_sort(log.records.begin(), log.records.end(),
                   [](const Interaction& a, const Interaction& b) {
                     if (a.user != b.user) return a.user < b.user;
                     return a.timestamp < b.timestamp;
                   });
  return log;
}

InteractionLog parse_interactions(std::istream& in, const std::string& source) {
  std::vector<RawInteraction> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("user", 0) == 0) continue;
    const auto fields = split_tabs(line);
    auto fail = [&](const std::string& why) {
      throw DataError(source + ":" + std::to_string(line_no) + ": " + why);
    };
    if (fields.size() != 3) fail("expected user<TAB>item<TAB>timestamp");
    if (fields[0].empty() || fields[1].empty()) fail("empty user or item token");
    double ts = 0.0;
    const char* first = fields[2].data();
    const char* last = first + fields[2].size();
    auto res = std::from_chars(first, last, ts);
    if (res.ec != std::errc() || res.ptr != last) fail("malformed timestamp '" + fields[2] + "'");
    raw.push_back({fields[0], fields[1], ts});
  }
  if (raw.empty()) throw DataError(source + ": no interactions");
  return build_log(raw);
}

InteractionLog load_interactions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction file " + path.string());
  return parse_interactions(in, path.string());
}

void write_interactions(const InteractionLog& log, std::ostream& out) {
  out << "user\titem\ttimestamp\n";
  for (const auto& r : log.records) {
    out << log.user_tokens[r.user] << '\t' << log.item_tokens[r.item] << '\t'
        << format_timestamp(r.timestamp) << '\n';
  }
}

void write_interactions(const InteractionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_interactions(log, out);
  if (!out) throw IoError("write failed for " + path.string());
}

void write_id_mapping(const InteractionLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (std::size_t id = 1; id < log.item_tokens.size(); ++id) {
    out << log.item_tokens[id] << '\t' << id << '\n';
  }
}

std::vector<ItemId> UserSplit::test_context() const {
  std::vector<ItemId> ctx = train;
  ctx.push_back(valid_target);
  return ctx;
}

std::vector<ItemId> UserSplit::history() const {
  std::vector<ItemId> all = test_context();
  all.push_back(test_target);
  return all;
}

SplitData leave_one_out_split(const InteractionLog& log, std::size_t min_len) {
  SplitData split;
  split.num_items = log.num_items();
  const auto seqs = log.sequences();
  for (UserId u = 1; u < seqs.size(); ++u) {
    const auto& s = seqs[u];
    if (s.size() < std::max<std::size_t>(min_len, 3)) {
      ++split.dropped_users;
      continue;
    }
    UserSplit us;
    us.user = u;
    us.train.assign(s.begin(), s.end() - 2);
    us.valid_target = s[s.size() - 2];
    us.test_target = s.back();
    split.users.push_back(std::move(us));
  }
  return split;
}

std::vector<ItemId> truncate_recent(std::span<const ItemId> items, std::size_t max_len) {
  const std::size_t keep = std::min(items.size(), max_len);
  return {items.end() - static_cast<std::ptrdiff_t>(keep), items.end()};
}

SeqBatch make_batch(std::span<const std::vector<ItemId>> contexts,
                    std::span<const ItemId> targets, std::size_t max_len) {
  if (!targets.empty() && targets.size() != contexts.size()) {
    throw DataError("make_batch: one target per context required");
  }
  SeqBatch batch;
  batch.batch = contexts.size();
  batch.max_len = max_len;
  batch.items.assign(batch.batch * max_len, kPadding);
  batch.targets.assign(targets.begin(), targets.end());
  for (std::size_t b = 0; b < contexts.size(); ++b) {
    const auto kept = truncate_recent(contexts[b], max_len);
    batch.lengths.push_back(kept.size());
    std::copy(kept.begin(), kept.end(), batch.items.begin() + (b + 1) * max_len - kept.size());
  }
  return batch;
}

InteractionLog make_synthetic(const SyntheticSpec& spec) {
  if (spec.num_users == 0 || spec.num_items == 0 || spec.blocks_per_user == 0 ||
      spec.block_len == 0 || spec.cluster_size == 0) {
    throw ConfigError("make_synthetic: sizes must be positive");
  }
  if (!(spec.noise_rate >= 0.0 && spec.noise_rate <= 1.0)) {
    throw ConfigError("make_synthetic: noise_rate must lie in [0, 1]");
  }
  const std::size_t cluster = std::min(spec.cluster_size, spec.num_items);
  const std::size_t clusters = spec.num_items / cluster;

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<std::size_t> any_item(1, spec.num_items);
  std::uniform_int_distribution<std::size_t> in_cluster(0, cluster - 1);
  std::uniform_int_distribution<std::size_t> pick_cluster(0, clusters - 1);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<RawInteraction> raw;
  raw.reserve(spec.num_users * spec.blocks_per_user * spec.block_len);
  for (std::size_t u = 1; u <= spec.num_users; ++u) {
    const std::string user = "u" + std::to_string(u);
    std::size_t previous = clusters;
    double ts = 0.0;
    for (std::size_t b = 0; b < spec.blocks_per_user; ++b) {
      std::size_t c = pick_cluster(rng);
      while (clusters > 1 && c == previous) c = pick_cluster(rng);
      previous = c;
      for (std::size_t t = 0; t < spec.block_len; ++t) {
        std::size_t item = c * cluster + in_cluster(rng) + 1;
        if (coin(rng) < spec.noise_rate) item = any_item(rng);
        raw.push_back({user, "i" + std::to_string(item), ts});
        ts += 1.0;
      }
    }
  }
  return build_log(raw);
}

}  // namespace blossom::data
