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

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

#include "blossom/errors.hpp"
#include "blossom/grad_check.hpp"
#include "blossom/ltis.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace blossom;

namespace {

AttentionConfig small_cfg(std::size_t l, std::size_t s, std::size_t lsel, std::size_t k,
                          std::size_t dh = 4) {
  AttentionConfig cfg;
  cfg.compress_size = l;
  cfg.stride = s;
  cfg.select_size = lsel;
  cfg.top_k = k;
  cfg.heads = 2;
  cfg.kv_groups = 1;
  cfg.d_head = dh;
  cfg.d_model = 2 * dh;
  return cfg;
}

// A selection built by hand from per-query block lists, one group.
ltis::Selection manual_selection(const std::vector<std::vector<std::uint32_t>>& blocks,
                                 std::size_t len, const AttentionConfig& cfg) {
  ltis::Selection s;
  s.blocks.assign(cfg.kv_groups, blocks);
  auto vis = std::make_shared<std::vector<kernels::VisibleSet>>();
  vis->push_back(ltis::gather_positions(blocks, len, cfg));
  s.visibility = vis;
  return s;
}

}  // namespace

TEST_CASE("block count examples") {
  const AttentionConfig cfg;
  CHECK(ltis::block_count(200, cfg) == 11);
  CHECK(ltis::block_count(2048, cfg) == 127);
  CHECK(ltis::block_count(32, cfg) == 1);
  CHECK(ltis::block_count(5, cfg) == 1);  // left-padded
  CHECK(ltis::compression_left_pad(5, cfg) == 27);
}

TEST_CASE("block count law") {
  for (auto [l, s] : {std::pair<std::size_t, std::size_t>{32, 16}, {16, 16}, {64, 32}}) {
    AttentionConfig cfg = small_cfg(l, s, s, 4);
    for (std::size_t len = l; len <= 2048; ++len) {
      const std::size_t expected = (len - l) / s + 1;
      REQUIRE(ltis::block_count(len, cfg) == expected);
    }
  }
}

TEST_CASE("split blocks cover [i*s, i*s + l) and overlap by l - s") {
  auto cfg = small_cfg(4, 2, 2, 2, 1);
  Tensor keys({9, 1});
  for (std::size_t i = 0; i < 9; ++i) keys[i] = static_cast<double>(i);
  auto blocks = ltis::split_blocks(keys, cfg);
  REQUIRE(blocks.size() == 3);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t r = 0; r < 4; ++r) CHECK(blocks[b][r] == static_cast<double>(b * 2 + r));
  CHECK(blocks[0][2] == blocks[1][0]);
  CHECK(blocks[0][3] == blocks[1][1]);
}

TEST_CASE("short sequences are left-padded with zeros") {
  auto cfg = small_cfg(4, 2, 2, 2, 1);
  Tensor keys = Tensor::matrix({{7}, {8}});
  auto blocks = ltis::split_blocks(keys, cfg);
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0] == Tensor::matrix({{0}, {0}, {7}, {8}}));
}

TEST_CASE("compression: zero block and zero output layer give zero") {
  auto cfg = small_cfg(4, 2, 2, 2, 4);
  std::mt19937_64 rng(1);
  ltis::CompressionMLP phi("phi", cfg, 0.5, rng);
  phi.out_w.value.fill(0.0);
  phi.out_b.value.fill(0.0);
  CHECK(ltis::compress_block(Tensor({4, 4}), phi) == Tensor({4}));
}

TEST_CASE("compression is position sensitive") {
  auto cfg = small_cfg(4, 2, 2, 2, 4);
  std::mt19937_64 rng(2);
  ltis::CompressionMLP phi("phi", cfg, 0.5, rng);
  auto block = oracle::random_matrix(4, 4, rng);
  Tensor swapped = block;
  for (std::size_t c = 0; c < 4; ++c) std::swap(swapped(0, c), swapped(3, c));
  CHECK(oracle::max_abs(ltis::compress_block(block, phi), ltis::compress_block(swapped, phi)) > 1e-6);
  CHECK_THROWS_AS(ltis::compress_block(Tensor({3, 4}), phi), DimensionError);
}

TEST_CASE("compression gradient to phi and to the block") {
  auto cfg = small_cfg(4, 2, 2, 2, 3);
  std::mt19937_64 rng(3);
  ltis::CompressionMLP phi("phi", cfg, 0.4, rng);
  ad::Parameter keys("keys", oracle::random_matrix(9, 3, rng));
  auto params = phi.parameters();
  params.push_back(&keys);
  auto r = grad_check([&](ad::Tape& t) {
    return oracle::project(ltis::compress_blocks(t.param(keys), phi, cfg), 4);
  }, params);
  CHECK(r.max_rel_error <= 1e-5);
}

TEST_CASE("compressed kv has M rows") {
  AttentionConfig cfg = small_cfg(8, 4, 4, 2, 2);
  std::mt19937_64 rng(4);
  ltis::CompressionMLP kp("k", cfg, 0.3, rng), vp("v", cfg, 0.3, rng);
  auto kv = ltis::compress_kv(oracle::random_matrix(30, 2, rng), oracle::random_matrix(30, 2, rng),
                              kp, vp, cfg);
  CHECK(kv.keys.shape() == Shape{6, 2});
  CHECK(kv.values.shape() == Shape{6, 2});
  CHECK(kv.keys.all_finite());
}

TEST_CASE("importance scores: uniform, spiked, normalized, causal") {
  auto cfg = small_cfg(2, 2, 2, 2, 8);
  const std::size_t len = 8;  // M = 4
  Tensor q({len, 8});
  for (std::size_t i = 0; i < len; ++i) q(i, 0) = 1.0;
  Tensor keys({4, 8});
  for (std::size_t m = 0; m < 4; ++m) keys(m, 1 + m) = 1.0;  // orthogonal to q
  auto s = ltis::importance_scores(q, keys, cfg);
  // query 7 sees all four blocks; query 4 sees blocks ending at 1 and 3
  for (std::size_t m = 0; m < 4; ++m) CHECK(s(7, m) == doctest::Approx(0.25));
  CHECK(s(4, 0) == doctest::Approx(0.5));
  CHECK(s(4, 2) == 0.0);
  CHECK(s(0, 0) == 0.0);  // no block has ended yet

  keys(2, 0) = 10.0;  // 10 * unit q
  s = ltis::importance_scores(q, keys, cfg);
  CHECK(s(7, 2) > 0.9);
  for (std::size_t i = 1; i < len; ++i) {
    double total = 0;
    for (std::size_t m = 0; m < 4; ++m) total += s(i, m);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("remap: degenerate, expanded and zero cases") {
  std::mt19937_64 rng(5);
  auto cmp = oracle::random_matrix(3, 6, rng);
  auto same = ltis::remap_scores(cmp, small_cfg(4, 4, 4, 1), 6);
  CHECK(same == cmp);

  AttentionConfig paper;  // l=32, s=16, l'=16
  auto sel = ltis::remap_scores(cmp, paper, 7);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 7; ++j) {
      const double want = (j < 6 ? cmp(r, j) : 0.0) + (j >= 1 ? cmp(r, j - 1) : 0.0);
      CHECK(sel(r, j) == doctest::Approx(want).epsilon(1e-15));
    }
  CHECK(ltis::remap_scores(Tensor({2, 6}), paper, 7) == Tensor({2, 7}));
}

TEST_CASE("remap follows the double sum for l' > s") {
  auto cfg = small_cfg(6, 2, 4, 1);  // l'/s = 2, l/s = 3
  std::mt19937_64 rng(6);
  auto cmp = oracle::random_matrix(2, 9, rng);
  auto sel = ltis::remap_scores(cmp, cfg, 5);
  for (std::size_t r = 0; r < 2; ++r)
    for (long j = 0; j < 5; ++j) {
      double want = 0;
      for (long m = 0; m < 2; ++m)
        for (long n = 0; n < 3; ++n) {
          const long idx = 2 * j - m - n;
          if (idx >= 0 && idx < 9) want += cmp(r, static_cast<std::size_t>(idx));
        }
      CHECK(sel(r, static_cast<std::size_t>(j)) == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("remap is linear") {
  AttentionConfig cfg;
  std::mt19937_64 rng(7);
  auto a = oracle::random_matrix(4, 10, rng), b = oracle::random_matrix(4, 10, rng);
  const double alpha = 0.7, beta = -1.3;
  Tensor mix({4, 10});
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * a[i] + beta * b[i];
  auto ra = ltis::remap_scores(a, cfg, 11), rb = ltis::remap_scores(b, cfg, 11),
       rm = ltis::remap_scores(mix, cfg, 11);
  for (std::size_t i = 0; i < rm.size(); ++i)
    CHECK(std::abs(rm[i] - (alpha * ra[i] + beta * rb[i])) <= 1e-12);
}

TEST_CASE("remap rejects divisibility violations") {
  auto cfg = small_cfg(6, 4, 4, 1);
  CHECK_THROWS_AS(ltis::remap_scores(Tensor({1, 3}), cfg, 2), ConfigError);
}

TEST_CASE("group aggregation") {
  AttentionConfig cfg;  // h=8, g=2
  CHECK(cfg.group_of_head(3) == 0);
  CHECK(cfg.group_of_head(4) == 1);
  std::vector<Tensor> heads;
  for (std::size_t h = 0; h < 8; ++h) heads.push_back(Tensor({1, 2}, static_cast<double>(h)));
  auto g = ltis::aggregate_group_scores(heads, cfg);
  REQUIRE(g.size() == 2);
  CHECK(g[0][0] == 0 + 1 + 2 + 3);
  CHECK(g[1][1] == 4 + 5 + 6 + 7);

  cfg.kv_groups = 8;
  auto id = ltis::aggregate_group_scores(heads, cfg);
  for (std::size_t h = 0; h < 8; ++h) CHECK(id[h] == heads[h]);
}

TEST_CASE("top-k examples") {
  auto cfg = small_cfg(1, 1, 1, 2);
  // The last query row sees every block.
  Tensor s = Tensor::matrix({{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0.1, 0.5, 0.3, 0.1}});
  CHECK(ltis::select_topk(s, cfg)[3] == std::vector<std::uint32_t>{1, 2});

  cfg.top_k = 1;
  Tensor tie = Tensor::matrix({{0, 0, 0}, {0, 0, 0}, {0.4, 0.4, 0.2}});
  CHECK(ltis::select_topk(tie, cfg)[2] == std::vector<std::uint32_t>{0});

  cfg.top_k = 4;
  Tensor three = Tensor::matrix({{0, 0, 0}, {0, 0, 0}, {0.3, 0.2, 0.1}});
  CHECK(ltis::select_topk(three, cfg)[2] == std::vector<std::uint32_t>{0, 1, 2});
}

TEST_CASE("selected-set size and causality") {
  auto cfg = small_cfg(4, 2, 4, 3);
  std::mt19937_64 rng(8);
  auto scores = oracle::random_matrix(30, 8, rng);
  auto sel = ltis::select_topk(scores, cfg);
  for (std::size_t i = 0; i < 30; ++i) {
    const std::size_t valid = i / 4 + 1;
    CHECK(sel[i].size() == std::min<std::size_t>(3, valid));
    for (auto b : sel[i]) CHECK(b * 4 <= i);
    CHECK(std::is_sorted(sel[i].begin(), sel[i].end()));
  }
  CHECK(ltis::select_topk(scores, cfg) == sel);
  auto vis = ltis::gather_positions(sel, 30, cfg);
  for (std::size_t i = 0; i < 30; ++i)
    for (auto j : vis.row(i)) CHECK(j <= i);
}

TEST_CASE("plan_selection: per-group selections and causal positions") {
  AttentionConfig cfg = small_cfg(4, 2, 2, 2, 2);
  cfg.heads = 4;
  cfg.kv_groups = 2;
  cfg.d_model = 8;
  std::mt19937_64 rng(9);
  const std::size_t len = 20;
  auto q = oracle::random_matrix(len, 8, rng);
  std::vector<Tensor> cmp{oracle::random_matrix(9, 2, rng), oracle::random_matrix(9, 2, rng)};
  auto sel = ltis::plan_selection(q, cmp, cfg);
  REQUIRE(sel.blocks.size() == 2);
  REQUIRE(sel.visibility->size() == 2);
  for (std::size_t g = 0; g < 2; ++g)
    for (std::size_t i = 0; i < len; ++i) CHECK(sel.blocks[g][i].size() == std::min<std::size_t>(2, i / 2 + 1));

  // Group 0's choice must equal top-k over the summed remapped scores of heads 0 and 1.
  Tensor qh({len, 2});
  Tensor summed({len, 10});
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t c = 0; c < 2; ++c) qh(i, c) = q(i, h * 2 + c);
    auto r = ltis::remap_scores(ltis::importance_scores(qh, cmp[0], cfg), cfg, 10);
    for (std::size_t i = 0; i < r.size(); ++i) summed[i] += r[i];
  }
  CHECK(ltis::select_topk(summed, cfg) == sel.blocks[0]);
}

TEST_CASE("full selection equals dense causal attention") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t len = std::array<std::size_t, 3>{16, 32, 64}[seed % 3];
    auto cfg = small_cfg(8, 4, 4, len / 4, seed % 2 ? 4 : 8);
    cfg.heads = 4;
    cfg.kv_groups = 2;
    const std::size_t dh = cfg.d_head;
    auto q = oracle::random_matrix(len, 4 * dh, rng), k = oracle::random_matrix(len, 2 * dh, rng),
         v = oracle::random_matrix(len, 2 * dh, rng);
    std::vector<Tensor> cmp{oracle::random_matrix(ltis::block_count(len, cfg), dh, rng),
                            oracle::random_matrix(ltis::block_count(len, cfg), dh, rng)};
    auto sel = ltis::plan_selection(q, cmp, cfg);
    ad::Tape t(false);
    auto out = ltis::ltis_attention(t.constant(q), t.constant(k), t.constant(v), sel, cfg);
    CHECK(oracle::max_abs(out.value(), oracle::dense_causal_gqa(q, k, v, 4, 2, dh)) <= 1e-10);
  }
}

TEST_CASE("single self position with one-hot values returns that row") {
  auto cfg = small_cfg(1, 1, 1, 1, 4);
  cfg.heads = 1;
  const std::size_t len = 4;
  std::vector<std::vector<std::uint32_t>> blocks;
  for (std::uint32_t i = 0; i < len; ++i) blocks.push_back({i});
  auto sel = manual_selection(blocks, len, cfg);
  std::mt19937_64 rng(10);
  ad::Tape t(false);
  auto v = Tensor::identity(4);
  auto out = ltis::ltis_attention(t.constant(oracle::random_matrix(len, 4, rng)),
                                  t.constant(oracle::random_matrix(len, 4, rng)), t.constant(v),
                                  sel, cfg);
  CHECK(out.value() == v);
}

TEST_CASE("gathered attention gradient") {
  auto cfg = small_cfg(4, 2, 2, 2, 2);
  std::mt19937_64 rng(11);
  const std::size_t len = 10;
  ad::Parameter q("q", oracle::random_matrix(len, 4, rng)), k("k", oracle::random_matrix(len, 2, rng)),
      v("v", oracle::random_matrix(len, 2, rng));
  std::vector<Tensor> cmp{oracle::random_matrix(ltis::block_count(len, cfg), 2, rng)};
  auto sel = ltis::plan_selection(q.value, cmp, cfg);
  std::vector<ad::Parameter*> ps{&q, &k, &v};
  auto r = grad_check([&](ad::Tape& t) {
    return oracle::project(ltis::ltis_attention(t.param(q), t.param(k), t.param(v), sel, cfg), 12);
  }, ps);
  CHECK(r.max_rel_error <= 1e-4);
}
