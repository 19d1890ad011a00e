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

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "blossom/errors.hpp"
#include "blossom/metrics.hpp"
#include "doctest.h"

using namespace blossom;
using namespace blossom::metrics;

namespace {

data::SplitData sized_split(std::size_t users, std::size_t items, std::uint64_t seed) {
  data::SyntheticSpec spec;
  spec.num_users = users;
  spec.num_items = items;
  spec.blocks_per_user = 2;
  spec.block_len = 4;
  spec.seed = seed;
  return data::leave_one_out_split(data::make_synthetic(spec));
}

}  // namespace

TEST_CASE("rank metric examples") {
  std::vector<double> low{0.1, 0.2, 0.3};
  auto best = rank_metrics(1.0, low, 10);
  CHECK(best.rank == 1);
  CHECK(best.recall == 1.0);
  CHECK(best.reciprocal_rank == 1.0);
  CHECK(best.ndcg == 1.0);

  std::vector<double> two_above{2.0, 3.0, 0.0, -1.0};
  auto third = rank_metrics(1.0, two_above, 10);
  CHECK(third.rank == 3);
  CHECK(third.ndcg == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(third.reciprocal_rank == doctest::Approx(1.0 / 3));

  std::vector<double> ten_above(10, 5.0);
  auto miss = rank_metrics(1.0, ten_above, 10);
  CHECK(miss.rank == 11);
  CHECK(miss.recall == 0.0);
  CHECK(miss.reciprocal_rank == 0.0);
  CHECK(miss.ndcg == 0.0);
}

TEST_CASE("ties rank the target below") {
  std::vector<double> tied{1.0, 0.0};
  CHECK(rank_metrics(1.0, tied, 10).rank == 2);
  std::vector<double> all_equal(100, 0.0);
  CHECK(rank_metrics(0.0, all_equal, 10).recall == 0.0);
}

TEST_CASE("improving the target never lowers a metric") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> neg(100);
  for (auto& x : neg) x = n(rng);
  UserMetrics prev = rank_metrics(-10.0, neg, 10);
  for (double t = -10.0; t <= 10.0; t += 0.05) {
    auto m = rank_metrics(t, neg, 10);
    CHECK(m.rank <= prev.rank);
    CHECK(m.ndcg >= prev.ndcg);
    CHECK(m.reciprocal_rank >= prev.reciprocal_rank);
    CHECK(m.recall >= prev.recall);
    prev = m;
  }
}

TEST_CASE("negative sampling") {
  std::vector<data::ItemId> history{1, 2, 3, 4, 5};
  auto neg = sample_negatives(history, 6, 200, 100, 42, 7);
  CHECK(neg.size() == 100);
  std::set<data::ItemId> uniq(neg.begin(), neg.end());
  CHECK(uniq.size() == 100);
  for (auto i : neg) {
    CHECK(i >= 1);
    CHECK(i <= 200);
    CHECK(std::find(history.begin(), history.end(), i) == history.end());
    CHECK(i != 6);
  }
  CHECK(sample_negatives(history, 6, 200, 100, 42, 7) == neg);
  CHECK(sample_negatives(history, 6, 200, 100, 42, 8) != neg);
  CHECK(sample_negatives(history, 6, 200, 100, 43, 7) != neg);
  CHECK_THROWS_AS(sample_negatives(history, 6, 100, 100, 42, 7), EvaluationError);
}

TEST_CASE("sampling is uniform over candidates") {
  std::vector<data::ItemId> history{1};
  std::vector<double> counts(21, 0.0);
  for (data::UserId u = 0; u < 4000; ++u)
    for (auto i : sample_negatives(history, 2, 20, 5, 3, u)) counts[i] += 1;
  const double expected = 4000.0 * 5 / 18;
  double chi2 = 0;
  for (std::size_t i = 3; i <= 20; ++i) chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
  CHECK(chi2 < 40.79);  // 17 dof, 0.999 quantile
  CHECK(counts[1] == 0.0);
  CHECK(counts[2] == 0.0);
}

TEST_CASE("evaluate: perfect, constant and random scorers") {
  auto split = sized_split(300, 400, 5);
  EvalOptions opt;
  auto perfect = evaluate(split, Split::kTest, [&](std::span<const data::ItemId> ctx) {
    Tensor s({split.num_items + 1});
    // The test target is the one item no user context has seen next; cheat via lookup.
    for (const auto& us : split.users)
      if (us.test_context() == std::vector<data::ItemId>(ctx.begin(), ctx.end())) s[us.test_target] = 1.0;
    return s;
  }, opt);
  CHECK(perfect.ndcg_at_k == 1.0);
  CHECK(perfect.num_users == 300);

  auto constant = evaluate(split, Split::kValid, [&](std::span<const data::ItemId>) {
    return Tensor({split.num_items + 1});
  }, opt);
  CHECK(constant.recall_at_k == 0.0);

  // Random ranking: recall@10 has mean 10/101 per user.
  auto random = evaluate(split, Split::kTest, [&](std::span<const data::ItemId> ctx) {
    std::seed_seq sq(ctx.begin(), ctx.end());
    std::mt19937_64 rng(sq);
    std::uniform_real_distribution<double> u(0, 1);
    Tensor s({split.num_items + 1});
    for (auto& x : s.storage()) x = u(rng);
    return s;
  }, opt);
  const double p = 10.0 / 101.0;
  const double sigma = std::sqrt(p * (1 - p) / 300.0);
  CHECK(std::abs(random.recall_at_k - p) <= 3 * sigma);
}

TEST_CASE("evaluate skips users without enough negatives") {
  auto split = sized_split(20, 40, 6);
  EvalOptions opt;
  opt.negatives = 35;
  auto r = evaluate(split, Split::kTest, [&](std::span<const data::ItemId>) {
    return Tensor({split.num_items + 1});
  }, opt);
  CHECK(r.skipped_users + r.num_users == split.users.size());
  CHECK(r.skipped_users > 0);
  CHECK(r.diagnostics.size() == r.skipped_users);
}

TEST_CASE("evaluate: recall is monotone in K and thread-independent") {
  auto split = sized_split(200, 300, 7);
  auto pop = popularity_scorer(split);
  EvalOptions k1, k10;
  k1.k = 1;
  auto a = evaluate(split, Split::kTest, pop, k1), b = evaluate(split, Split::kTest, pop, k10);
  CHECK(a.recall_at_k <= b.recall_at_k);
  const int threads = omp_get_max_threads();
  omp_set_num_threads(1);
  auto serial = evaluate(split, Split::kTest, pop, k10);
  omp_set_num_threads(threads);
  CHECK(serial.to_json() == b.to_json());
}

TEST_CASE("scorer failures propagate") {
  auto split = sized_split(10, 300, 8);
  CHECK_THROWS_AS(evaluate(split, Split::kTest, [](std::span<const data::ItemId>) -> Tensor {
    throw DimensionError("boom");
  }, EvalOptions{10, 5, 1}), DimensionError);
}

TEST_CASE("popularity counts training prefixes") {
  auto split = sized_split(50, 60, 9);
  auto s = popularity_scorer(split)({});
  double total = 0;
  for (double x : s.storage()) total += x;
  std::size_t want = 0;
  for (const auto& us : split.users) want += us.train.size();
  CHECK(total == static_cast<double>(want));
}

TEST_CASE("report formats") {
  EvalResult r;
  r.recall_at_k = 0.5;
  r.num_users = 3;
  CHECK(r.to_json().find("\"recall@10\":0.5") != std::string::npos);
  CHECK(r.to_key_value().find("users=3\n") != std::string::npos);
  CHECK(parse_split("valid") == Split::kValid);
  CHECK_THROWS_AS(parse_split("train"), ConfigError);
}
