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

// Grouped-query attention, sigmoid output gating of the LTIS and STIS
// pathways, and the post-norm encoder stack built on top of them.

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "blossom/autodiff.hpp"
#include "blossom/config.hpp"
#include "blossom/embedding.hpp"
#include "blossom/ltis.hpp"
#include "blossom/stis.hpp"

namespace blossom::fusion {

// Which attention pathways feed a layer. The single-branch variants drop
// the gate and use that pathway's output directly.
enum class Branch { kFused, kLtisOnly, kStisOnly };

const char* branch_name(Branch branch);
Branch parse_branch(const std::string& name);

struct GateParams {
  ad::Parameter weight;  // 2d x d
  ad::Parameter bias;    // d
};

struct FeedForward {
  ad::Parameter w1;  // d x 4d
  ad::Parameter b1;
  ad::Parameter w2;  // 4d x d
  ad::Parameter b2;
};

struct BlossomLayerParams {
  ad::Parameter w_q;  // d x heads*d_head
  ad::Parameter w_k;  // d x kv_groups*d_head
  ad::Parameter w_v;
  ad::Parameter w_o;  // heads*d_head x d
  GateParams gate;
  FeedForward ffn;
  ad::Parameter norm1_gamma, norm1_beta;
  ad::Parameter norm2_gamma, norm2_beta;
  ltis::CompressionMLP key_compressor;
  ltis::CompressionMLP value_compressor;

  BlossomLayerParams() = default;
  BlossomLayerParams(const std::string& prefix, const AttentionConfig& cfg, double init_std,
                     std::mt19937_64& rng);
  std::vector<ad::Parameter*> parameters();
  std::size_t parameter_count();
};

/// Runtime switches for one forward pass.
struct ForwardContext {
  const RoPECache* rope = nullptr;
  Branch branch = Branch::kFused;
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;
};

// Grouped-query attention over the given visibility followed by W_O.
ad::Var gqa(ad::Var q, ad::Var k, ad::Var v,
            std::shared_ptr<const std::vector<kernels::VisibleSet>> visibility, ad::Var w_o,
            const AttentionConfig& cfg);

struct FusedOutput {
  ad::Var output;
  ad::Var alpha;
};

// alpha = sigmoid([o_ltis; o_stis] W + b); out = alpha*o_ltis + (1-alpha)*o_stis.
FusedOutput gated_fuse(ad::Var o_ltis, ad::Var o_stis, GateParams& gate);

/// Intermediate values of one Blossom attention block, exposed for tests.
struct AttentionTrace {
  ad::Var q, k, v;  // after projection and rotary encoding
  ad::Var o_ltis, o_stis;
  ad::Var alpha;
  ad::Var output;
  ltis::Selection selection;
  stis::SparseMask mask;
};

AttentionTrace blossom_attention(ad::Var h, BlossomLayerParams& params,
                                 const AttentionConfig& cfg, const ForwardContext& ctx);

// S = LN(H + Drop(Blossom(H))); H' = LN(S + Drop(FFN(S))).
ad::Var encoder_layer(ad::Var h, BlossomLayerParams& params, const AttentionConfig& cfg,
                      const ForwardContext& ctx);

struct Encoder {
  std::vector<BlossomLayerParams> layers;
  ad::Parameter w_n;  // d x d
  ad::Parameter b_n;  // d

  Encoder() = default;
  Encoder(std::size_t num_layers, const AttentionConfig& cfg, double init_std,
          std::mt19937_64& rng);
  std::vector<ad::Parameter*> parameters();
};

// N encoder layers then the affine H^N W_N + b_N.
ad::Var encode(ad::Var embedded, Encoder& encoder, const AttentionConfig& cfg,
               const ForwardContext& ctx);

}  // namespace blossom::fusion
