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

// Ranking metrics under sampled-negative ("uni100") evaluation.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "blossom/data.hpp"
#include "blossom/tensor.hpp"

namespace blossom::metrics {

struct UserMetrics {
  std::size_t rank = 0;
  double recall = 0.0;
  double reciprocal_rank = 0.0;
  double ndcg = 0.0;
};

/**
 * rank = 1 + #{negatives scoring >= target}: ties rank the target below.
 * recall = [rank <= K], rr = 1/rank and ndcg = 1/log2(rank + 1) inside the
 * cutoff, zero outside.
 */
UserMetrics rank_metrics(double target_score, std::span<const double> negative_scores,
                         std::size_t k);

/**
 * `count` distinct items drawn uniformly from 1..num_items excluding
 * `history` and `target`. Deterministic in (seed, user). Throws
 * EvaluationError when fewer than `count` candidates remain.
 */
std::vector<data::ItemId> sample_negatives(std::span<const data::ItemId> history,
                                           data::ItemId target, std::size_t num_items,
                                           std::size_t count, std::uint64_t seed,
                                           data::UserId user);

struct EvalResult {
  double recall_at_k = 0.0;
  double mrr_at_k = 0.0;
  double ndcg_at_k = 0.0;
  std::size_t k = 10;
  std::size_t num_users = 0;
  std::size_t negatives = 100;
  std::size_t skipped_users = 0;
  std::vector<std::string> diagnostics;

  // Flat JSON object with the metric values and counts.
  std::string to_json() const;
  // `key=value` lines.
  std::string to_key_value() const;
};

enum class Split { kValid, kTest };

Split parse_split(const std::string& name);

struct EvalOptions {
  std::size_t k = 10;
  std::size_t negatives = 100;
  std::uint64_t seed = 42;
};

// Scores for ids 0..num_items given a context; entry 0 (padding) is ignored.
using Scorer = std::function<Tensor(std::span<const data::ItemId> context)>;

/// Mean metrics over users. The scorer is called concurrently and must be
/// safe for that; per-user results are reduced in user order.
EvalResult evaluate(const data::SplitData& split, Split which, const Scorer& scorer,
                    const EvalOptions& options);

// Item frequencies over the training prefixes, as a context-free scorer.
Scorer popularity_scorer(const data::SplitData& split);

}  // namespace blossom::metrics
