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

#include "blossom/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "blossom/errors.hpp"

namespace blossom {

void ModelConfig::validate() const {
  attention.validate();
  if (num_items == 0) throw ConfigError("model: vocabulary is empty");
  if (layers == 0) throw ConfigError("model: at least one layer required");
  if (max_len == 0) throw ConfigError("model: max_len must be positive");
  if (attention.d_head % 2 != 0) throw ConfigError("model: d_head must be even for rotary encoding");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  std::mt19937_64 rng(seed);
  embedding_ = EmbeddingTable(config_.num_items, config_.attention.d_model, config_.init_std, rng);
  encoder_ = fusion::Encoder(config_.layers, config_.attention, config_.init_std, rng);
  rope_ = RoPECache(config_.attention.d_head, config_.max_len);
}

std::vector<ad::Parameter*> Model::parameters() {
  std::vector<ad::Parameter*> out{&embedding_.weights};
  for (auto* p : encoder_.parameters()) out.push_back(p);
  return out;
}

ad::Var Model::encode_sequence(ad::Tape& tape, std::span<const data::ItemId> items,
                               bool training, std::mt19937_64* rng) {
  if (items.empty()) throw DataError("model: empty input sequence");
  if (items.size() > config_.max_len) items = items.subspan(items.size() - config_.max_len);
  ad::Var embedded = ad::embedding(tape.param(embedding_.weights), items);
  fusion::ForwardContext ctx;
  ctx.rope = &rope_;
  ctx.branch = config_.branch;
  ctx.training = training;
  ctx.dropout = config_.dropout;
  ctx.rng = rng;
  return fusion::encode(embedded, encoder_, config_.attention, ctx);
}

Tensor Model::score_next(std::span<const data::ItemId> context) {
  ad::Tape tape(false);
  ad::Var h = encode_sequence(tape, context, false);
  const Tensor& hv = h.value();
  const auto last = hv.row(hv.rows() - 1);
  return score_items(Tensor({last.size()}, std::vector<double>(last.begin(), last.end())),
                     embedding_);
}

Tensor score_items(const Tensor& h_t, const EmbeddingTable& table) {
  if (h_t.size() != table.dim()) {
    throw DimensionError("score_items: hidden width " + std::to_string(h_t.size()) +
                         " vs embedding width " + std::to_string(table.dim()));
  }
  Tensor scores({table.rows()});
  for (std::size_t i = 1; i < table.rows(); ++i) {
    const auto e = table.weights.value.row(i);
    double s = 0.0;
    for (std::size_t c = 0; c < e.size(); ++c) s += h_t[c] * e[c];
    scores[i] = s;
  }
  return scores;
}

double next_item_loss(const Tensor& scores, data::ItemId target) {
  if (target == data::kPadding || target >= scores.size()) {
    throw DataError("loss: invalid target id " + std::to_string(target));
  }
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < scores.size(); ++i) top = std::max(top, scores[i]);
  double z = 0.0;
  for (std::size_t i = 1; i < scores.size(); ++i) z += std::exp(scores[i] - top);
  return -(scores[target] - top - std::log(z));
}

std::string EpochRecord::to_json() const {
  std::ostringstream out;
  out.precision(17);
  out << "{\"epoch\":" << epoch << ",\"train_loss\":" << train_loss << ",\"valid_recall@"
      << valid.k << "\":" << valid.recall_at_k << ",\"valid_mrr@" << valid.k
      << "\":" << valid.mrr_at_k << ",\"valid_ndcg@" << valid.k << "\":" << valid.ndcg_at_k
      << ",\"valid_users\":" << valid.num_users << ",\"improved\":" << (improved ? "true" : "false")
      << "}";
  return out.str();
}

void adam_step(std::span<ad::Parameter* const> params, AdamState& state, double learning_rate) {
  if (state.first_moment.size() != params.size()) {
    state.first_moment.clear();
    state.second_moment.clear();
    for (auto* p : params) {
      state.first_moment.emplace_back(p->value.shape());
      state.second_moment.emplace_back(p->value.shape());
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    ad::Parameter& p = *params[k];
    if (p.grad.shape() != p.value.shape()) continue;
    Tensor& m = state.first_moment[k];
    Tensor& v = state.second_moment[k];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      p.value[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
    }
  }
}

double clip_gradients(std::span<ad::Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (auto* p : params)
    for (double g : p->grad.data()) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double factor = max_norm / norm;
    for (auto* p : params)
      for (double& g : p->grad.storage()) g *= factor;
  }
  return norm;
}

std::vector<TrainingSequence> training_sequences(const data::SplitData& split,
                                                 std::size_t max_len) {
  std::vector<TrainingSequence> out;
  for (const auto& us : split.users) {
    if (us.train.size() < 2) continue;
    TrainingSequence seq;
    const std::size_t pairs = us.train.size() - 1;
    const std::size_t keep = std::min(pairs, max_len);
    seq.inputs.assign(us.train.end() - 1 - static_cast<std::ptrdiff_t>(keep), us.train.end() - 1);
    seq.targets.assign(us.train.end() - static_cast<std::ptrdiff_t>(keep), us.train.end());
    out.push_back(std::move(seq));
  }
  return out;
}

metrics::EvalResult evaluate_model(Model& model, const data::SplitData& split,
                                   metrics::Split which, const metrics::EvalOptions& options) {
  if (split.num_items != model.config().num_items) {
    throw CheckpointError("model vocabulary (" + std::to_string(model.config().num_items) +
                          ") does not match dataset (" + std::to_string(split.num_items) + ")");
  }
  return metrics::evaluate(split, which, [&model](std::span<const data::ItemId> ctx) {
    return model.score_next(ctx);
  }, options);
}

TrainState train(Model& model, const data::SplitData& split, const TrainConfig& config,
                 const std::function<void(const EpochRecord&)>& on_epoch) {
  auto sequences = training_sequences(split, model.config().max_len);
  if (sequences.empty()) throw DataError("train: dataset has no training sequences");
  if (config.batch_size == 0) throw ConfigError("train: batch_size must be positive");

  const auto params = model.parameters();
  TrainState state;
  state.learning_rate = config.learning_rate;
  state.seed = config.seed;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(sequences.size());
  std::vector<Tensor> best;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t positions_seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::size_t positions = 0;
      for (std::size_t b = start; b < stop; ++b) positions += sequences[order[b]].inputs.size();

      for (auto* p : params) p->zero_grad();
      ad::Tape tape;
      ad::Var table = tape.param(model.embedding().weights);
      ad::Var total;
      for (std::size_t b = start; b < stop; ++b) {
        const auto& seq = sequences[order[b]];
        ad::Var h = model.encode_sequence(tape, seq.inputs, true, &rng);
        ad::Var ce = ad::softmax_cross_entropy(ad::matmul_nt(h, table), seq.targets);
        ad::Var weighted = ad::scale(ce, static_cast<double>(seq.inputs.size()) /
                                             static_cast<double>(positions));
        total = total.valid() ? ad::add(total, weighted) : weighted;
      }
      const double batch_loss = total.value()[0];
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
      }
      tape.backward(total);
      model.embedding().clear_padding();
      clip_gradients(params, config.clip_norm);
      adam_step(params, state.adam, config.learning_rate);
      model.embedding().clear_padding();
      loss_sum += batch_loss * static_cast<double>(positions);
      positions_seen += positions;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(positions_seen);
    record.valid = evaluate_model(model, split, metrics::Split::kValid, config.eval);
    record.improved = record.valid.ndcg_at_k > state.best_metric;
    state.epoch = epoch;
    if (record.improved) {
      state.best_metric = record.valid.ndcg_at_k;
      state.best_epoch = epoch;
      state.patience_counter = 0;
      best.clear();
      for (auto* p : params) best.push_back(p->value);
    } else {
      ++state.patience_counter;
    }
    state.history.push_back(record);
    if (on_epoch) on_epoch(record);
    if (config.patience > 0 && state.patience_counter >= config.patience) {
      state.stopped_early = true;
      break;
    }
  }
  for (std::size_t k = 0; k < best.size(); ++k) params[k]->value = best[k];
  return state;
}

}  // namespace blossom
