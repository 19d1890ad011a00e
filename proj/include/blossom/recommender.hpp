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
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "blossom/autodiff.hpp"
#include "blossom/config.hpp"
#include "blossom/data.hpp"
#include "blossom/embedding.hpp"
#include "blossom/fusion.hpp"
#include "blossom/metrics.hpp"

namespace blossom {

struct ModelConfig {
  AttentionConfig attention;
  std::size_t num_items = 0;
  std::size_t layers = 2;
  std::size_t max_len = 100;
  double dropout = 0.3;
  double init_std = 0.05;
  fusion::Branch branch = fusion::Branch::kFused;

  void validate() const;
};

/**
 * Item embeddings, a stack of Blossom encoder layers and tied-weight
 * scoring: the score of item i after position t is h_t . e_i.
 *
 * Scoring methods only read parameters and may run concurrently.
 */
class Model {
 public:
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  EmbeddingTable& embedding() { return embedding_; }
  fusion::Encoder& encoder() { return encoder_; }
  const RoPECache& rope() const { return rope_; }
  std::vector<ad::Parameter*> parameters();

  // L x d hidden states for a sequence without padding (the most recent
  // max_len items are kept).
  ad::Var encode_sequence(ad::Tape& tape, std::span<const data::ItemId> items, bool training,
                          std::mt19937_64* rng = nullptr);

  // Scores for ids 0..num_items from the last position of `context`.
  Tensor score_next(std::span<const data::ItemId> context);

 private:
  ModelConfig config_;
  EmbeddingTable embedding_;
  fusion::Encoder encoder_;
  RoPECache rope_;
};

// r_i = h_t . e_i for every row of the table; entry 0 (padding) is left at 0
// and is never ranked.
Tensor score_items(const Tensor& h_t, const EmbeddingTable& table);

// -log softmax(scores[1..])[target]. Throws DataError for the padding id.
double next_item_loss(const Tensor& scores, data::ItemId target);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 2048;
  std::size_t epochs = 200;
  std::size_t patience = 15;
  double clip_norm = 5.0;
  std::uint64_t seed = 42;
  metrics::EvalOptions eval;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  metrics::EvalResult valid;
  bool improved = false;

  std::string to_json() const;
};

struct TrainState {
  AdamState adam;
  double learning_rate = 0.0;
  std::size_t epoch = 0;
  double best_metric = -1.0;
  std::size_t best_epoch = 0;
  std::size_t patience_counter = 0;
  std::uint64_t seed = 0;
  bool stopped_early = false;
  std::vector<EpochRecord> history;
};

// One Adam update of every parameter from its accumulated gradient.
void adam_step(std::span<ad::Parameter* const> params, AdamState& state, double learning_rate);

// Rescales gradients so their global L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_gradients(std::span<ad::Parameter* const> params, double max_norm);

// Next-item pairs (inputs, targets) from one training prefix, truncated to
// the most recent max_len positions.
struct TrainingSequence {
  std::vector<data::ItemId> inputs;
  std::vector<data::ItemId> targets;
};
std::vector<TrainingSequence> training_sequences(const data::SplitData& split, std::size_t max_len);

/**
 * Minibatch Adam on the full-softmax next-item loss over every position.
 * After each epoch NDCG@K on the validation split decides early stopping;
 * the best parameters are restored before returning.
 */
TrainState train(Model& model, const data::SplitData& split, const TrainConfig& config,
                 const std::function<void(const EpochRecord&)>& on_epoch = {});

metrics::EvalResult evaluate_model(Model& model, const data::SplitData& split,
                                   metrics::Split which, const metrics::EvalOptions& options);

// Text checkpoint; see docs/checkpoint_format.md.
void save_checkpoint(Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace blossom
