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

// The OpenMP kernels against the serial reference and a naive oracle.

#include <omp.h>

#include <random>

#include "blossom/errors.hpp"
#include "blossom/kernels.hpp"
#include "blossom/stis.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace blossom;
namespace k = blossom::kernels;

namespace {

std::vector<double> rand_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d(0, 1);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

// Random visibility: every row keeps a random subset of its causal prefix (possibly empty).
k::VisibleSet random_visibility(std::size_t len, std::mt19937_64& rng) {
  k::VisibleSet vs;
  std::bernoulli_distribution keep(0.4);
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<std::uint32_t> row;
    for (std::uint32_t j = 0; j <= i; ++j)
      if (keep(rng)) row.push_back(j);
    vs.push_row(row);
  }
  return vs;
}

}  // namespace

TEST_CASE("matmul variants agree with the oracle and with each other") {
  std::mt19937_64 rng(1);
  for (auto [m, kk, n] : {std::tuple<std::size_t, std::size_t, std::size_t>{3, 4, 5}, {97, 65, 129}, {256, 64, 200}}) {
    auto a = rand_vec(m * kk, rng), b = rand_vec(kk * n, rng), bt = rand_vec(n * kk, rng),
         at = rand_vec(kk * m, rng);
    std::vector<double> c1(m * n), c2(m * n);
    k::serial::matmul(a, b, c1, m, kk, n);
    k::parallel::matmul(a, b, c2, m, kk, n);
    auto ref = oracle::naive_matmul(Tensor({m, kk}, a), Tensor({kk, n}, b));
    CHECK(oracle::max_abs(Tensor({m, n}, c1), ref) <= 1e-12);
    CHECK(c1 == c2);

    k::serial::matmul_nt(a, bt, c1, m, kk, n);
    k::parallel::matmul_nt(a, bt, c2, m, kk, n);
    auto ref_nt = oracle::naive_matmul(Tensor({m, kk}, a), transpose(Tensor({n, kk}, bt)));
    CHECK(oracle::max_abs(Tensor({m, n}, c1), ref_nt) <= 1e-12);
    CHECK(oracle::max_abs(Tensor({m, n}, c2), ref_nt) <= 1e-12);

    k::serial::matmul_tn(at, b, c1, m, kk, n);
    k::parallel::matmul_tn(at, b, c2, m, kk, n);
    auto ref_tn = oracle::naive_matmul(transpose(Tensor({kk, m}, at)), Tensor({kk, n}, b));
    CHECK(oracle::max_abs(Tensor({m, n}, c1), ref_tn) <= 1e-12);
    CHECK(oracle::max_abs(Tensor({m, n}, c2), ref_tn) <= 1e-12);
  }
}

TEST_CASE("attention kernels: serial, parallel and oracle agree") {
  std::mt19937_64 rng(2);
  for (std::size_t trial = 0; trial < 6; ++trial) {
    k::AttentionDims dims;
    dims.len = trial < 3 ? 13 : 300;
    dims.heads = 4;
    dims.groups = trial % 2 ? 2 : 4;
    dims.d_head = 4;
    dims.scale = 0.5;  // = 1/sqrt(d_head), which the oracle assumes
    const bool per_group = trial % 3 == 2;
    std::vector<k::VisibleSet> vis;
    for (std::size_t g = 0; g < (per_group ? dims.groups : 1); ++g)
      vis.push_back(random_visibility(dims.len, rng));

    const std::size_t qw = dims.heads * dims.d_head, kw = dims.groups * dims.d_head;
    auto q = rand_vec(dims.len * qw, rng), kk = rand_vec(dims.len * kw, rng),
         v = rand_vec(dims.len * kw, rng), dout = rand_vec(dims.len * qw, rng);
    const auto offsets = k::probability_offsets(vis, dims);
    std::vector<double> o1(q.size()), o2(q.size()), p1(offsets.back()), p2(offsets.back());
    k::serial::attention_forward(q, kk, v, vis, dims, o1, p1);
    k::parallel::attention_forward(q, kk, v, vis, dims, o2, p2);
    CHECK(o1 == o2);
    CHECK(p1 == p2);

    Tensor tq({dims.len, qw}, q), tk({dims.len, kw}, kk), tv({dims.len, kw}, v), ref({dims.len, qw});
    for (std::size_t h = 0; h < dims.heads; ++h) {
      const auto g = dims.group_of(h);
      const auto& set = vis[per_group ? g : 0];
      for (std::size_t i = 0; i < dims.len; ++i) {
        std::vector<std::size_t> keys(set.row(i).begin(), set.row(i).end());
        oracle::attend(tq, tk, tv, i, h * dims.d_head, g * dims.d_head, dims.d_head, keys, ref);
      }
    }
    CHECK(oracle::max_abs(Tensor({dims.len, qw}, o1), ref) <= 1e-12);

    std::vector<double> dq1(q.size()), dk1(kk.size()), dv1(v.size());
    std::vector<double> dq2(q.size()), dk2(kk.size()), dv2(v.size());
    k::serial::attention_backward(q, kk, v, vis, dims, p1, dout, dq1, dk1, dv1);
    k::parallel::attention_backward(q, kk, v, vis, dims, p2, dout, dq2, dk2, dv2);
    CHECK(oracle::max_abs(Tensor({q.size()}, dq1), Tensor({q.size()}, dq2)) <= 1e-12);
    CHECK(oracle::max_abs(Tensor({kk.size()}, dk1), Tensor({kk.size()}, dk2)) <= 1e-12);
    CHECK(oracle::max_abs(Tensor({v.size()}, dv1), Tensor({v.size()}, dv2)) <= 1e-12);
  }
}

TEST_CASE("parallel kernels do not depend on the thread count") {
  std::mt19937_64 rng(3);
  k::AttentionDims dims{512, 8, 2, 8, 0.35};
  std::vector<k::VisibleSet> vis{stis::build_power_mask(512, 1, 8, true).rows()};
  auto q = rand_vec(512 * 64, rng), kk = rand_vec(512 * 16, rng), v = rand_vec(512 * 16, rng),
       dout = rand_vec(512 * 64, rng);
  const auto n = k::probability_offsets(vis, dims).back();
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    std::vector<double> o(q.size()), p(n), dq(q.size()), dk(kk.size()), dv(v.size());
    k::parallel::attention_forward(q, kk, v, vis, dims, o, p);
    k::parallel::attention_backward(q, kk, v, vis, dims, p, dout, dq, dk, dv);
    o.insert(o.end(), dq.begin(), dq.end());
    o.insert(o.end(), dk.begin(), dk.end());
    o.insert(o.end(), dv.begin(), dv.end());
    return o;
  };
  const int max_threads = omp_get_max_threads();
  const auto one = run(1);
  CHECK(run(3) == one);
  CHECK(run(std::max(2, max_threads)) == one);
  omp_set_num_threads(max_threads);
}

TEST_CASE("visibility validation") {
  k::AttentionDims dims{4, 4, 2, 2, 1.0};
  std::vector<k::VisibleSet> three(3, k::VisibleSet::causal(4));
  CHECK_THROWS_AS(k::probability_offsets(three, dims), DimensionError);
  std::vector<k::VisibleSet> short_rows{k::VisibleSet::causal(3)};
  CHECK_THROWS_AS(k::probability_offsets(short_rows, dims), DimensionError);
  k::AttentionDims bad{4, 3, 2, 2, 1.0};
  std::vector<k::VisibleSet> ok{k::VisibleSet::causal(4)};
  CHECK_THROWS_AS(k::probability_offsets(ok, bad), ConfigError);
}

TEST_CASE("causal visibility set") {
  auto c = k::VisibleSet::causal(4);
  CHECK(c.nnz() == 10);
  CHECK(c.row(3).size() == 4);
  CHECK(c.row(0)[0] == 0u);
}
