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

#include "blossom/metrics.hpp"

#include <algorithm>
#include <exception>
#include <cmath>
#include <memory>
#include <optional>
#include <random>
#include <sstream>

#include "blossom/errors.hpp"

namespace blossom::metrics {

UserMetrics rank_metrics(double target_score, std::span<const double> negative_scores,
                         std::size_t k) {
  UserMetrics m;
  m.rank = 1 + static_cast<std::size_t>(std::count_if(
                   negative_scores.begin(), negative_scores.end(),
                   [&](double s) { return s >= target_score; }));
  if (m.rank <= k) {
    m.recall = 1.0;
    m.reciprocal_rank = 1.0 / static_cast<double>(m.rank);
    m.ndcg = 1.0 / std::log2(static_cast<double>(m.rank) + 1.0);
  }
  return m;
}

std::vector<data::ItemId> sample_negatives(std::span<const data::ItemId> history,
                                           data::ItemId target, std::size_t num_items,
                                           std::size_t count, std::uint64_t seed,
                                           data::UserId user) {
  std::vector<bool> excluded(num_items + 1, false);
  excluded[0] = true;
  for (auto item : history)
    if (item <= num_items) excluded[item] = true;
  if (target <= num_items) excluded[target] = true;
  std::vector<data::ItemId> candidates;
  for (data::ItemId i = 1; i <= num_items; ++i)
    if (!excluded[i]) candidates.push_back(i);
  if (candidates.size() < count) {
    throw EvaluationError("user " + std::to_string(user) + ": only " +
                          std::to_string(candidates.size()) + " negative candidates for " +
                          std::to_string(count) + " samples");
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(user)};
  std::mt19937_64 rng(seq);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
  }
  candidates.resize(count);
  return candidates;
}

std::string EvalResult::to_json() const {
  std::ostringstream out;
  out.precision(17);
  out << "{\"recall@" << k << "\":" << recall_at_k << ",\"mrr@" << k << "\":" << mrr_at_k
      << ",\"ndcg@" << k << "\":" << ndcg_at_k << ",\"users\":" << num_users
      << ",\"negatives\":" << negatives << ",\"skipped_users\":" << skipped_users << "}";
  return out.str();
}

std::string EvalResult::to_key_value() const {
  std::ostringstream out;
  out.precision(17);
  out << "recall@" << k << "=" << recall_at_k << "\n"
      << "mrr@" << k << "=" << mrr_at_k << "\n"
      << "ndcg@" << k << "=" << ndcg_at_k << "\n"
      << "users=" << num_users << "\n"
      << "negatives=" << negatives << "\n"
      << "skipped_users=" << skipped_users << "\n";
  return out.str();
}

Split parse_split(const std::string& name) {
  if (name == "valid" || name == "validation") return Split::kValid;
  if (name == "test") return Split::kTest;
  throw ConfigError("unknown split '" + name + "' (expected valid or test)");
}

EvalResult evaluate(const data::SplitData& split, Split which, const Scorer& scorer,
                    const EvalOptions& options) {
  const auto n_users = static_cast<std::ptrdiff_t>(split.users.size());
  std::vector<std::optional<UserMetrics>> per_user(split.users.size());
  std::vector<std::string> errors(split.users.size());
  std::vector<std::exception_ptr> failures(split.users.size());

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t u = 0; u < n_users; ++u) {
    const auto& us = split.users[static_cast<std::size_t>(u)];
    const bool valid = which == Split::kValid;
    const data::ItemId target = valid ? us.valid_target : us.test_target;
    try {
      const auto history = us.history();
      const auto negatives = sample_negatives(history, target, split.num_items, options.negatives,
                                              options.seed, us.user);
      const auto context = valid ? us.valid_context() : us.test_context();
      const Tensor scores = scorer(context);
      std::vector<double> neg_scores;
      neg_scores.reserve(negatives.size());
      for (auto item : negatives) neg_scores.push_back(scores[item]);
      per_user[static_cast<std::size_t>(u)] = rank_metrics(scores[target], neg_scores, options.k);
    } catch (const EvaluationError& e) {
      errors[static_cast<std::size_t>(u)] = e.what();
    } catch (...) {
      failures[static_cast<std::size_t>(u)] = std::current_exception();
    }
  }
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);

  EvalResult result;
  result.k = options.k;
  result.negatives = options.negatives;
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    if (!per_user[u]) {
      ++result.skipped_users;
      result.diagnostics.push_back(errors[u]);
      continue;
    }
    result.recall_at_k += per_user[u]->recall;
    result.mrr_at_k += per_user[u]->reciprocal_rank;
    result.ndcg_at_k += per_user[u]->ndcg;
    ++result.num_users;
  }
  if (result.num_users > 0) {
    const double n = static_cast<double>(result.num_users);
    result.recall_at_k /= n;
    result.mrr_at_k /= n;
    result.ndcg_at_k /= n;
  }
  return result;
}

Scorer popularity_scorer(const data::SplitData& split) {
  auto counts = std::make_shared<Tensor>(Shape{split.num_items + 1});
  for (const auto& us : split.users)
    for (auto item : us.train) (*counts)[item] += 1.0;
  return [counts](std::span<const data::ItemId>) { return *counts; };
}

}  // namespace blossom::metrics
