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

#include "blossom/verify.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <cstdio>
#include <sstream>

#include "blossom/analysis.hpp"
#include "blossom/fusion.hpp"
#include "blossom/grad_check.hpp"
#include "blossom/stis.hpp"

namespace blossom::verify {
namespace {

template <class F>
CheckResult timed(const std::string& name, F&& body) {
  CheckResult r;
  r.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", x);
  return buf;
}

Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t({rows, cols});
  for (auto& x : t.storage()) x = n(rng);
  return t;
}

// Loop-per-head causal attention.
Tensor dense_causal_gqa(const Tensor& q, const Tensor& k, const Tensor& v,
                        const AttentionConfig& cfg) {
  const std::size_t len = q.rows(), dh = cfg.d_head;
  Tensor out({len, cfg.q_width()});
  std::vector<double> w(len);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    const std::size_t g = cfg.group_of_head(h);
    for (std::size_t i = 0; i < len; ++i) {
      double mx = -INFINITY;
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0;
        for (std::size_t c = 0; c < dh; ++c) s += q(i, h * dh + c) * k(j, g * dh + c);
        w[j] = s / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, w[j]);
      }
      double z = 0;
      for (std::size_t j = 0; j <= i; ++j) z += (w[j] = std::exp(w[j] - mx));
      for (std::size_t j = 0; j <= i; ++j)
        for (std::size_t c = 0; c < dh; ++c) out(i, h * dh + c) += w[j] / z * v(j, g * dh + c);
    }
  }
  return out;
}

bool mask_predicate(std::size_t i, std::size_t j, std::size_t len, std::size_t blk,
                    std::size_t win, bool causal) {
  if (causal && j > i) return false;
  const std::size_t dist = i > j ? i - j : j - i;
  if (dist < win * blk) return true;
  const std::size_t bi = i / blk, bj = j / blk;
  const std::size_t bd = bi > bj ? bi - bj : bj - bi;
  if (bd > 0 && (bd & (bd - 1)) == 0) return true;
  return j + blk >= len;
}

}  // namespace

CheckResult check_interaction_counts() {
  return timed("interaction-counts", [](CheckResult& r) {
    const AttentionConfig cfg;
    const std::size_t lengths[] = {256, 512, 1024, 2048};
    const std::size_t expected[] = {103, 120, 153, 218};
    std::ostringstream d;
    r.passed = true;
    for (int i = 0; i < 4; ++i) {
      const auto rep = analysis::count_participating(lengths[i], cfg);
      d << "L=" << lengths[i] << " total=" << rep.total << " ";
      r.passed = r.passed && rep.total == expected[i] && rep.dedup_union <= rep.total;
    }
    const auto last = analysis::count_participating(2048, cfg);
    d << "reduction@2048=" << analysis::percent(last.reduction);
    r.passed = r.passed && analysis::percent(last.reduction) == "89.4%";
    r.detail = d.str();
  });
}

CheckResult check_dense_oracle(std::uint64_t seed, std::size_t trials) {
  return timed("dense-oracle", [&](CheckResult& r) {
    std::mt19937_64 rng(seed);
    double worst = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      AttentionConfig cfg;
      cfg.compress_size = 8;
      cfg.stride = 4;
      cfg.select_size = 4;
      cfg.heads = 4;
      cfg.kv_groups = 2;
      cfg.d_head = 4;
      cfg.d_model = 16;
      const std::size_t len = 32;
      cfg.top_k = len / cfg.select_size;
      cfg.window = len;
      fusion::BlossomLayerParams params("v", cfg, 0.3, rng);
      RoPECache rope(cfg.d_head, len);
      ad::Tape tape(false);
      ad::Var h = tape.constant(random_matrix(len, cfg.d_model, rng));
      fusion::ForwardContext ctx;
      ctx.rope = &rope;
      auto trace = fusion::blossom_attention(h, params, cfg, ctx);
      Tensor dense = matmul(dense_causal_gqa(trace.q.value(), trace.k.value(), trace.v.value(), cfg),
                            params.w_o.value);
      worst = std::max(worst, max_abs_diff(dense, trace.output.value()));
    }
    r.passed = worst <= 1e-8;
    r.detail = "max_abs_diff=" + sci(worst);
  });
}

CheckResult check_mask_law(std::uint64_t seed, std::size_t trials) {
  return timed("mask-law", [&](CheckResult& r) {
    std::mt19937_64 rng(seed);
    std::size_t mismatches = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t len = std::uniform_int_distribution<std::size_t>(1, 96)(rng);
      const std::size_t blk = std::uniform_int_distribution<std::size_t>(1, 4)(rng);
      const std::size_t win = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
      for (bool causal : {false, true}) {
        const auto mask = stis::build_power_mask(len, blk, win, causal);
        for (std::size_t i = 0; i < len; ++i)
          for (std::size_t j = 0; j < len; ++j)
            mismatches += mask.visible(i, j) != mask_predicate(i, j, len, blk, win, causal);
      }
    }
    r.passed = mismatches == 0;
    r.detail = "mismatches=" + std::to_string(mismatches);
  });
}

CheckResult check_gradients(std::uint64_t seed) {
  return timed("gradients", [&](CheckResult& r) {
    std::mt19937_64 rng(seed);
    AttentionConfig cfg;
    cfg.compress_size = 4;
    cfg.stride = 2;
    cfg.select_size = 2;
    cfg.top_k = 2;
    cfg.window = 2;
    cfg.heads = 2;
    cfg.kv_groups = 1;
    cfg.d_head = 2;
    cfg.d_model = 4;
    const std::size_t len = 8;
    fusion::BlossomLayerParams params("g", cfg, 0.5, rng);
    RoPECache rope(cfg.d_head, len);
    ad::Parameter input("input", random_matrix(len, cfg.d_model, rng));
    Tensor weights = random_matrix(len, cfg.d_model, rng);
    auto f = [&](ad::Tape& tape) {
      fusion::ForwardContext ctx;
      ctx.rope = &rope;
      ad::Var out = fusion::encoder_layer(tape.param(input), params, cfg, ctx);
      return ad::sum(ad::mul(out, tape.constant(weights)));
    };
    auto list = params.parameters();
    list.push_back(&input);
    const auto res = grad_check(f, list);
    r.passed = res.max_rel_error <= 1e-4;
    r.detail = "max_rel_error=" + sci(res.max_rel_error) + " worst=" +
               res.worst_parameter + " entries=" + std::to_string(res.entries_checked);
  });
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
  return {check_interaction_counts(), check_dense_oracle(seed), check_mask_law(seed),
          check_gradients(seed)};
}

}  // namespace blossom::verify
