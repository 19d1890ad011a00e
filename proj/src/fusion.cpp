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

#include "blossom/fusion.hpp"

#include <cmath>

#include "blossom/errors.hpp"

namespace blossom::fusion {
namespace {

Tensor random_tensor(Shape shape, double std_dev, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std_dev);
  Tensor t(std::move(shape));
  for (auto& x : t.storage()) x = normal(rng);
  return t;
}

ad::Var linear(ad::Tape& tape, ad::Var x, ad::Parameter& w, ad::Parameter& b) {
  return ad::add_bias(ad::matmul(x, tape.param(w)), tape.param(b));
}

ad::Var maybe_dropout(ad::Var x, const ForwardContext& ctx) {
  if (!ctx.training || ctx.dropout <= 0.0) return x;
  if (!ctx.rng) throw ConfigError("encoder: training with dropout needs an rng");
  return ad::dropout(x, ctx.dropout, *ctx.rng);
}

}  // namespace

const char* branch_name(Branch branch) {
  switch (branch) {
    case Branch::kFused: return "fused";
    case Branch::kLtisOnly: return "ltis";
    case Branch::kStisOnly: return "stis";
  }
  return "fused";
}

Branch parse_branch(const std::string& name) {
  if (name == "fused") return Branch::kFused;
  if (name == "ltis") return Branch::kLtisOnly;
  if (name == "stis") return Branch::kStisOnly;
  throw ConfigError("unknown branch '" + name + "' (expected fused, ltis or stis)");
}

BlossomLayerParams::BlossomLayerParams(const std::string& prefix, const AttentionConfig& cfg,
                                       double init_std, std::mt19937_64& rng) {
  const std::size_t d = cfg.d_model;
  w_q = ad::Parameter(prefix + ".w_q", random_tensor({d, cfg.q_width()}, init_std, rng));
  w_k = ad::Parameter(prefix + ".w_k", random_tensor({d, cfg.kv_width()}, init_std, rng));
  w_v = ad::Parameter(prefix + ".w_v", random_tensor({d, cfg.kv_width()}, init_std, rng));
  w_o = ad::Parameter(prefix + ".w_o", random_tensor({cfg.q_width(), d}, init_std, rng));
  gate.weight = ad::Parameter(prefix + ".gate.weight", random_tensor({2 * d, d}, init_std, rng));
  gate.bias = ad::Parameter(prefix + ".gate.bias", Tensor({d}));
  ffn.w1 = ad::Parameter(prefix + ".ffn.w1", random_tensor({d, 4 * d}, init_std, rng));
  ffn.b1 = ad::Parameter(prefix + ".ffn.b1", Tensor({4 * d}));
  ffn.w2 = ad::Parameter(prefix + ".ffn.w2", random_tensor({4 * d, d}, init_std, rng));
  ffn.b2 = ad::Parameter(prefix + ".ffn.b2", Tensor({d}));
  norm1_gamma = ad::Parameter(prefix + ".norm1.gamma", Tensor({d}, 1.0));
  norm1_beta = ad::Parameter(prefix + ".norm1.beta", Tensor({d}));
  norm2_gamma = ad::Parameter(prefix + ".norm2.gamma", Tensor({d}, 1.0));
  norm2_beta = ad::Parameter(prefix + ".norm2.beta", Tensor({d}));
  key_compressor = ltis::CompressionMLP(prefix + ".key_compressor", cfg, init_std, rng);
  value_compressor = ltis::CompressionMLP(prefix + ".value_compressor", cfg, init_std, rng);
}

std::vector<ad::Parameter*> BlossomLayerParams::parameters() {
  std::vector<ad::Parameter*> out{&w_q,     &w_k,     &w_v,         &w_o,
                                  &gate.weight, &gate.bias, &ffn.w1, &ffn.b1,
                                  &ffn.w2,  &ffn.b2,  &norm1_gamma, &norm1_beta,
                                  &norm2_gamma, &norm2_beta};
  for (auto* p : key_compressor.parameters()) out.push_back(p);
  for (auto* p : value_compressor.parameters()) out.push_back(p);
  return out;
}

std::size_t BlossomLayerParams::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

ad::Var gqa(ad::Var q, ad::Var k, ad::Var v,
            std::shared_ptr<const std::vector<kernels::VisibleSet>> visibility, ad::Var w_o,
            const AttentionConfig& cfg) {
  if (cfg.kv_groups == 0 || cfg.heads % cfg.kv_groups != 0) {
    throw ConfigError("gqa: heads must be divisible by kv_groups");
  }
  kernels::AttentionDims dims;
  dims.len = q.shape()[0];
  dims.heads = cfg.heads;
  dims.groups = cfg.kv_groups;
  dims.d_head = cfg.d_head;
  dims.scale = 1.0 / std::sqrt(static_cast<double>(cfg.d_head));
  return ad::matmul(ad::attention(q, k, v, std::move(visibility), dims), w_o);
}

FusedOutput gated_fuse(ad::Var o_ltis, ad::Var o_stis, GateParams& gate) {
  if (o_ltis.shape() != o_stis.shape()) {
    throw DimensionError("gated_fuse: pathway outputs differ in shape");
  }
  ad::Tape& tape = o_ltis.tape();
  ad::Var logits = ad::add_bias(ad::matmul(ad::concat_cols(o_ltis, o_stis), tape.param(gate.weight)),
                                tape.param(gate.bias));
  ad::Var alpha = ad::sigmoid(logits);
  ad::Var out = ad::add(o_stis, ad::mul(alpha, ad::sub(o_ltis, o_stis)));
  return {out, alpha};
}

AttentionTrace blossom_attention(ad::Var h, BlossomLayerParams& params,
                                 const AttentionConfig& cfg, const ForwardContext& ctx) {
  if (!ctx.rope) throw ConfigError("blossom_attention: rotary cache missing");
  ad::Tape& tape = h.tape();
  const std::size_t len = h.shape()[0];
  const std::size_t dh = cfg.d_head;

  AttentionTrace trace;
  trace.q = apply_rope(ad::matmul(h, tape.param(params.w_q)), *ctx.rope);
  trace.k = apply_rope(ad::matmul(h, tape.param(params.w_k)), *ctx.rope);
  trace.v = ad::matmul(h, tape.param(params.w_v));
  ad::Var w_o = tape.param(params.w_o);

  if (ctx.branch != Branch::kStisOnly) {
    std::vector<Tensor> compressed;
    compressed.reserve(cfg.kv_groups);
    for (std::size_t g = 0; g < cfg.kv_groups; ++g) {
      ad::Var keys = ad::slice_cols(trace.k, g * dh, dh);
      compressed.push_back(ltis::compress_blocks(keys, params.key_compressor, cfg).value());
    }
    trace.selection = ltis::plan_selection(trace.q.value(), compressed, cfg);
    trace.o_ltis = gqa(trace.q, trace.k, trace.v, trace.selection.visibility, w_o, cfg);
  }
  if (ctx.branch != Branch::kLtisOnly) {
    trace.mask = stis::build_power_mask(len, cfg, true);
    trace.o_stis = gqa(trace.q, trace.k, trace.v, trace.mask.shared_rows(), w_o, cfg);
  }

  switch (ctx.branch) {
    case Branch::kFused: {
      auto fused = gated_fuse(trace.o_ltis, trace.o_stis, params.gate);
      trace.output = fused.output;
      trace.alpha = fused.alpha;
      break;
    }
    case Branch::kLtisOnly: trace.output = trace.o_ltis; break;
    case Branch::kStisOnly: trace.output = trace.o_stis; break;
  }
  return trace;
}

ad::Var encoder_layer(ad::Var h, BlossomLayerParams& params, const AttentionConfig& cfg,
                      const ForwardContext& ctx) {
  ad::Tape& tape = h.tape();
  if (h.value().rank() != 2 || h.shape()[1] != cfg.d_model) {
    throw DimensionError("encoder_layer: input must be L x d_model, got " +
                         shape_string(h.shape()));
  }
  ad::Var attended = blossom_attention(h, params, cfg, ctx).output;
  ad::Var s = ad::layer_norm(ad::add(h, maybe_dropout(attended, ctx)),
                             tape.param(params.norm1_gamma), tape.param(params.norm1_beta));
  ad::Var inner = ad::gelu(linear(tape, s, params.ffn.w1, params.ffn.b1));
  ad::Var ffn = linear(tape, inner, params.ffn.w2, params.ffn.b2);
  return ad::layer_norm(ad::add(s, maybe_dropout(ffn, ctx)), tape.param(params.norm2_gamma),
                        tape.param(params.norm2_beta));
}

Encoder::Encoder(std::size_t num_layers, const AttentionConfig& cfg, double init_std,
                 std::mt19937_64& rng) {
  if (num_layers == 0) throw ConfigError("encoder: at least one layer required");
  for (std::size_t n = 0; n < num_layers; ++n) {
    layers.emplace_back("layer" + std::to_string(n), cfg, init_std, rng);
  }
  w_n = ad::Parameter("final.w", Tensor::identity(cfg.d_model));
  b_n = ad::Parameter("final.b", Tensor({cfg.d_model}));
}

std::vector<ad::Parameter*> Encoder::parameters() {
  std::vector<ad::Parameter*> out;
  for (auto& layer : layers)
    for (auto* p : layer.parameters()) out.push_back(p);
  out.push_back(&w_n);
  out.push_back(&b_n);
  return out;
}

ad::Var encode(ad::Var embedded, Encoder& encoder, const AttentionConfig& cfg,
               const ForwardContext& ctx) {
  if (encoder.layers.empty()) throw ConfigError("encode: at least one layer required");
  ad::Tape& tape = embedded.tape();
  ad::Var h = embedded;
  for (auto& layer : encoder.layers) h = encoder_layer(h, layer, cfg, ctx);
  return linear(tape, h, encoder.w_n, encoder.b_n);
}

}  // namespace blossom::fusion
