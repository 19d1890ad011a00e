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

#include "blossom/embedding.hpp"

#include <cmath>

#include "blossom/errors.hpp"

namespace blossom {
namespace {

void check_rope_shape(const Tensor& x, const RoPECache& cache) {
  if (cache.d_head() == 0 || cache.d_head() % 2 != 0) {
    throw ConfigError("rope: head dimension must be even and positive");
  }
  if (x.rank() != 2 || x.cols() % cache.d_head() != 0) {
    throw DimensionError("rope: row width of " + shape_string(x.shape()) +
                         " is not a multiple of the head dimension");
  }
}

// Rotates row in place; `direction` = -1 applies the inverse rotation.
void rotate_row(std::span<double> row, std::size_t position, const RoPECache& cache,
                double direction) {
  const std::size_t dh = cache.d_head();
  for (std::size_t head = 0; head < row.size() / dh; ++head) {
    double* h = row.data() + head * dh;
    for (std::size_t pair = 0; pair < dh / 2; ++pair) {
      const double c = cache.cos(position, pair);
      const double s = direction * cache.sin(position, pair);
      const double a = h[2 * pair], b = h[2 * pair + 1];
      h[2 * pair] = a * c - b * s;
      h[2 * pair + 1] = a * s + b * c;
    }
  }
}

}  // namespace

EmbeddingTable::EmbeddingTable(std::size_t num_items, std::size_t dim, double init_std,
                               std::mt19937_64& rng) {
  Tensor w({num_items + 1, dim});
  std::normal_distribution<double> normal(0.0, init_std);
  for (std::size_t i = dim; i < w.size(); ++i) w[i] = normal(rng);
  weights = ad::Parameter("embedding", std::move(w));
}

void EmbeddingTable::clear_padding() {
  for (double& x : weights.value.row(0)) x = 0.0;
  if (weights.grad.shape() == weights.value.shape()) {
    for (double& x : weights.grad.row(0)) x = 0.0;
  }
}

Tensor embed(const data::SeqBatch& batch, const EmbeddingTable& table) {
  const std::size_t d = table.dim();
  Tensor out({batch.batch, batch.max_len, d});
  for (std::size_t b = 0; b < batch.batch; ++b) {
    const auto row = batch.row(b);
    for (std::size_t t = 0; t < batch.max_len; ++t) {
      const auto id = row[t];
      if (id >= table.rows()) {
        throw DataError("embed: item id " + std::to_string(id) + " exceeds table with " +
                        std::to_string(table.rows()) + " rows");
      }
      const auto src = table.weights.value.row(id);
      std::copy(src.begin(), src.end(), out.data().begin() + (b * batch.max_len + t) * d);
    }
  }
  return out;
}

RoPECache::RoPECache(std::size_t d_head, std::size_t max_positions, double base)
    : d_head_(d_head), max_positions_(max_positions) {
  if (d_head == 0 || d_head % 2 != 0) throw ConfigError("rope: head dimension must be even");
  const std::size_t pairs = d_head / 2;
  cos_.resize(max_positions * pairs);
  sin_.resize(max_positions * pairs);
  for (std::size_t p = 0; p < max_positions; ++p) {
    for (std::size_t i = 0; i < pairs; ++i) {
      const double freq = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(d_head));
      const double angle = static_cast<double>(p) * freq;
      cos_[p * pairs + i] = std::cos(angle);
      sin_[p * pairs + i] = std::sin(angle);
    }
  }
}

double RoPECache::cos(std::size_t position, std::size_t pair) const {
  if (position >= max_positions_) throw ConfigError("rope: position beyond cache");
  return cos_[position * (d_head_ / 2) + pair];
}

double RoPECache::sin(std::size_t position, std::size_t pair) const {
  if (position >= max_positions_) throw ConfigError("rope: position beyond cache");
  return sin_[position * (d_head_ / 2) + pair];
}

Tensor apply_rope(const Tensor& x, std::span<const std::size_t> positions, const RoPECache& cache) {
  check_rope_shape(x, cache);
  if (positions.size() != x.rows()) throw DimensionError("rope: one position per row required");
  Tensor out = x;
  for (std::size_t r = 0; r < out.rows(); ++r) rotate_row(out.row(r), positions[r], cache, 1.0);
  return out;
}

ad::Var apply_rope(ad::Var x, const RoPECache& cache) {
  check_rope_shape(x.value(), cache);
  Tensor out = x.value();
  for (std::size_t r = 0; r < out.rows(); ++r) rotate_row(out.row(r), r, cache, 1.0);
  const auto ix = x.id();
  const RoPECache* table = &cache;
  return x.tape().record(std::move(out), {x}, [=](ad::Tape& t, const Tensor& g) {
    Tensor back = g;
    for (std::size_t r = 0; r < back.rows(); ++r) rotate_row(back.row(r), r, *table, -1.0);
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < back.size(); ++i) gx[i] += back[i];
  });
}

}  // namespace blossom
