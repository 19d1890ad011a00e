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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace blossom::data {

using ItemId = std::uint32_t;
using UserId = std::uint32_t;

inline constexpr ItemId kPadding = 0;

struct Interaction {
  UserId user = 0;
  ItemId item = 0;
  double timestamp = 0.0;
};

/// A token-level interaction, as read from or written to TSV.
struct RawInteraction {
  std::string user;
  std::string item;
  double timestamp = 0.0;
};

/**
 * Interactions with contiguous integer ids (0 reserved for padding).
 * Records are grouped by user id and sorted by timestamp within a user,
 * ties kept in input order. Ids are assigned in first-seen order.
 */
struct InteractionLog {
  std::vector<Interaction> records;
  std::vector<std::string> user_tokens{"<pad>"};
  std::vector<std::string> item_tokens{"<pad>"};

  std::size_t num_users() const { return user_tokens.size() - 1; }
  std::size_t num_items() const { return item_tokens.size() - 1; }
  // Item sequence of every user, indexed by user id (entry 0 is empty).
  std::vector<std::vector<ItemId>> sequences() const;
  std::vector<RawInteraction> raw() const;
};

InteractionLog build_log(std::span<const RawInteraction> raw);

// Parses `user<TAB>item<TAB>timestamp` lines; a first line starting with
// "user" is a header. Throws DataError with the line number on bad input.
InteractionLog parse_interactions(std::istream& in, const std::string& source = "<stream>");
InteractionLog load_interactions(const std::filesystem::path& path);

void write_interactions(const InteractionLog& log, std::ostream& out);
void write_interactions(const InteractionLog& log, const std::filesystem::path& path);
// `token<TAB>id` lines for every item token.
void write_id_mapping(const InteractionLog& log, const std::filesystem::path& path);

struct UserSplit {
  UserId user = 0;
  std::vector<ItemId> train;  // everything before the validation target
  ItemId valid_target = kPadding;
  ItemId test_target = kPadding;

  const std::vector<ItemId>& valid_context() const { return train; }
  std::vector<ItemId> test_context() const;
  std::vector<ItemId> history() const;
};

struct SplitData {
  std::vector<UserSplit> users;
  std::size_t dropped_users = 0;
  std::size_t num_items = 0;
};

// Last item for test, second-to-last for validation; users shorter than
// `min_len` are dropped and counted.
SplitData leave_one_out_split(const InteractionLog& log, std::size_t min_len = 3);

// Keeps the most recent `max_len` items.
std::vector<ItemId> truncate_recent(std::span<const ItemId> items, std::size_t max_len);

/// Left-padded item-id matrix, newest interaction in the last column.
struct SeqBatch {
  std::size_t batch = 0;
  std::size_t max_len = 0;
  std::vector<ItemId> items;  // batch x max_len
  std::vector<std::size_t> lengths;
  std::vector<ItemId> targets;

  std::span<const ItemId> row(std::size_t b) const { return {items.data() + b * max_len, max_len}; }
  // The row without its padding prefix.
  std::span<const ItemId> sequence(std::size_t b) const {
    return row(b).subspan(max_len - lengths[b]);
  }
};

SeqBatch make_batch(std::span<const std::vector<ItemId>> contexts,
                    std::span<const ItemId> targets, std::size_t max_len);

struct SyntheticSpec {
  std::size_t num_users = 500;
  std::size_t num_items = 200;
  std::size_t blocks_per_user = 4;
  std::size_t block_len = 25;
  double noise_rate = 0.1;
  std::uint64_t seed = 42;
  std::size_t cluster_size = 10;
};

/**
 * Users whose histories are runs of stable interest: each block draws its
 * items from one cluster of `cluster_size` consecutive items, consecutive
 * blocks use different clusters, and a `noise_rate` fraction of draws is
 * replaced by a uniform item.
 */
InteractionLog make_synthetic(const SyntheticSpec& spec);

}  // namespace blossom::data
