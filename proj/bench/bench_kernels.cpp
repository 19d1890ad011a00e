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

// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "blossom/kernels.hpp"
#include "blossom/stis.hpp"

namespace k = blossom::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::matmul(a, b, c, n, n, n);
    } else {
      k::serial::matmul(a, b, c, n, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

struct AttentionCase {
  k::AttentionDims dims;
  std::vector<k::VisibleSet> vis;
  std::vector<double> q, kk, v, out, probs, dout, dq, dk, dv;

  AttentionCase(std::size_t len, bool sparse) {
    dims.len = len;
    dims.heads = 8;
    dims.groups = 2;
    dims.d_head = 8;
    dims.scale = 0.35;
    vis.push_back(sparse ? blossom::stis::build_power_mask(len, 1, 8, true).rows()
                         : k::VisibleSet::causal(len));
    q = random_vec(len * 64, 3);
    kk = random_vec(len * 16, 4);
    v = random_vec(len * 16, 5);
    out.assign(len * 64, 0.0);
    probs.assign(k::probability_offsets(vis, dims).back(), 0.0);
    dout = random_vec(len * 64, 6);
    dq.assign(q.size(), 0.0);
    dk.assign(kk.size(), 0.0);
    dv.assign(v.size(), 0.0);
  }
};

template <bool Parallel>
void BM_AttentionForward(benchmark::State& state) {
  AttentionCase c(static_cast<std::size_t>(state.range(0)), state.range(1) != 0);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::attention_forward(c.q, c.kk, c.v, c.vis, c.dims, c.out, c.probs);
    } else {
      k::serial::attention_forward(c.q, c.kk, c.v, c.vis, c.dims, c.out, c.probs);
    }
    benchmark::DoNotOptimize(c.out.data());
  }
}

template <bool Parallel>
void BM_AttentionBackward(benchmark::State& state) {
  AttentionCase c(static_cast<std::size_t>(state.range(0)), state.range(1) != 0);
  k::serial::attention_forward(c.q, c.kk, c.v, c.vis, c.dims, c.out, c.probs);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::parallel::attention_backward(c.q, c.kk, c.v, c.vis, c.dims, c.probs, c.dout, c.dq, c.dk,
                                      c.dv);
    } else {
      k::serial::attention_backward(c.q, c.kk, c.v, c.vis, c.dims, c.probs, c.dout, c.dq, c.dk,
                                    c.dv);
    }
    benchmark::DoNotOptimize(c.dq.data());
  }
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Matmul<true>)->Name("matmul/parallel")->Arg(64)->Arg(128)->Arg(256);
// second argument: 0 dense causal, 1 power mask
BENCHMARK(BM_AttentionForward<false>)->Name("attention_fwd/serial")->ArgsProduct({{256, 1024}, {0, 1}});
BENCHMARK(BM_AttentionForward<true>)->Name("attention_fwd/parallel")->ArgsProduct({{256, 1024}, {0, 1}});
BENCHMARK(BM_AttentionBackward<false>)->Name("attention_bwd/serial")->ArgsProduct({{256, 1024}, {0, 1}});
BENCHMARK(BM_AttentionBackward<true>)->Name("attention_bwd/parallel")->ArgsProduct({{256, 1024}, {0, 1}});

BENCHMARK_MAIN();
