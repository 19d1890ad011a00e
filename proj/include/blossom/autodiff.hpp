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

// Reverse-mode differentiation over tensor-valued operations.
//
// A Tape records every operation applied to its Vars in execution order.
// Tape::backward replays the record in reverse, accumulating gradients into
// the Vars and into any Parameter that was brought onto the tape with
// Tape::param. A tape constructed with `record_gradients = false` evaluates
// the same graph without retaining backward closures.

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "blossom/kernels.hpp"
#include "blossom/tensor.hpp"

namespace blossom::ad {

/// A named learnable tensor together with its accumulated gradient.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string name, Tensor value);
  void zero_grad();
};

class Tape;

class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  // Gradient accumulated by the last backward pass (zeros if unreached).
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Receives the gradient of the op's output; accumulates into input grads.
  using Backward = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }

  Var constant(Tensor value);
  // A leaf whose gradient is kept on the tape.
  Var variable(Tensor value);
  // Binds a parameter; repeated calls return the same Var.
  Var param(Parameter& p);

  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);

  // Seeds d(root)/d(root) = 1 and propagates. `root` must hold one element.
  void backward(Var root);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& grad_of(std::size_t id) const;
  // Gradient buffer of a node, allocated as zeros on first use.
  Tensor& grad(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward backward;
    Parameter* param = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
  bool record_;
};

// --- operations -----------------------------------------------------------

Var matmul(Var a, Var b);
// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// Adds a vector to every row of a matrix.
Var add_bias(Var a, Var bias);
Var sigmoid(Var a);
// Gaussian error linear unit, exact erf form.
Var gelu(Var a);
Var layer_norm(Var x, Var gamma, Var beta);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t start, std::size_t width);
Var select_rows(Var a, std::span<const std::size_t> rows);
Var sum(Var a);
Var mean(Var a);
// Inverted dropout; identity when `rate` is zero.
Var dropout(Var a, double rate, std::mt19937_64& rng);
// Rows of `table` for each id. Id 0 is padding and never receives gradient.
Var embedding(Var table, std::span<const std::uint32_t> ids);

/**
 * Mean over rows of -log softmax(logits)[target]. Column 0 (padding) is
 * excluded from the normalization.
 */
Var softmax_cross_entropy(Var logits, std::span<const std::uint32_t> targets);

/// Grouped-query attention where each query attends only its listed keys.
Var attention(Var q, Var k, Var v,
              std::shared_ptr<const std::vector<kernels::VisibleSet>> visibility,
              const kernels::AttentionDims& dims);

/**
 * Overlapping row blocks of `x` flattened into rows: output row i holds rows
 * [i*stride - left_pad, i*stride - left_pad + block) of x, with positions
 * before row 0 read as zeros.
 */
Var unfold_blocks(Var x, std::size_t block, std::size_t stride, std::size_t left_pad);

}  // namespace blossom::ad
