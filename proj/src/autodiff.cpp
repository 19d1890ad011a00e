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

#include "blossom/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "blossom/errors.hpp"

namespace blossom::ad {
namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw DimensionError(message);
}

void require_matrix(const Var& a, const char* op) {
  require(a.value().rank() == 2, std::string(op) + ": rank-2 operand required, got " +
                                     shape_string(a.shape()));
}

void require_same(const Var& a, const Var& b, const char* op) {
  require(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                      shape_string(a.shape()) + " vs " +
                                      shape_string(b.shape()));
}

void accumulate(Tensor& dst, std::span<const double> src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

}  // namespace

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

void Parameter::zero_grad() {
  if (grad.shape() != value.shape()) grad = Tensor(value.shape());
  grad.fill(0.0);
}

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad_of(id_); }
bool Var::requires_grad() const { return tape_->needs_grad(id_); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(Node{std::move(value), {}, false, {}, nullptr}); }

Var Tape::variable(Tensor value) {
  return push(Node{std::move(value), {}, record_, {}, nullptr});
}

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Var v = push(Node{p.value, {}, record_, {}, record_ ? &p : nullptr});
  bound_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  if (!value.all_finite()) {
    throw NumericError("tape: operation produced non-finite values");
  }
  bool needs = false;
  if (record_) {
    for (const Var& in : inputs) {
      if (in.tape_ != this) throw Error("tape: operands belong to a different tape");
      needs = needs || nodes_[in.id_].requires_grad;
    }
  }
  if (!needs) backward = nullptr;
  return push(Node{std::move(value), {}, needs, std::move(backward), nullptr});
}

const Tensor& Tape::grad_of(std::size_t id) const {
  static const Tensor kEmpty;
  const Node& node = nodes_[id];
  return node.grad.shape() == node.value.shape() ? node.grad : kEmpty;
}

Tensor& Tape::grad(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Tape::backward(Var root) {
  if (root.tape_ != this) throw Error("tape: root belongs to a different tape");
  if (!record_) throw Error("tape: backward on a non-recording tape");
  if (root.value().size() != 1) {
    throw DimensionError("tape: backward root must be a scalar, got " +
                         shape_string(root.shape()));
  }
  grad(root.id_)[0] += 1.0;
  for (std::size_t id = root.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.shape() != node.value.shape()) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.param) {
      Parameter& p = *node.param;
      if (p.grad.shape() != p.value.shape()) p.grad = Tensor(p.value.shape());
      accumulate(p.grad, node.grad.data());
    }
  }
}

// --- operations -----------------------------------------------------------

Var matmul(Var a, Var b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  require(b.shape()[0] == k, "matmul: inner extents disagree " + shape_string(a.shape()) +
                                 " x " + shape_string(b.shape()));
  Tensor out({m, n});
  kernels::parallel::matmul(a.value().data(), b.value().data(), out.data(), m, k, n);
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) {
      Tensor da({m, k});
      kernels::parallel::matmul_nt(g.data(), t.value(ib).data(), da.data(), m, n, k);
      accumulate(t.grad(ia), da.data());
    }
    if (t.needs_grad(ib)) {
      Tensor db({k, n});
      kernels::parallel::matmul_tn(t.value(ia).data(), g.data(), db.data(), k, m, n);
      accumulate(t.grad(ib), db.data());
    }
  });
}

Var matmul_nt(Var a, Var b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  require(b.shape()[1] == k, "matmul_nt: inner extents disagree " + shape_string(a.shape()) +
                                 " x " + shape_string(b.shape()) + "^T");
  Tensor out({m, n});
  kernels::parallel::matmul_nt(a.value().data(), b.value().data(), out.data(), m, k, n);
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) {
      Tensor da({m, k});
      kernels::parallel::matmul(g.data(), t.value(ib).data(), da.data(), m, n, k);
      accumulate(t.grad(ia), da.data());
    }
    if (t.needs_grad(ib)) {
      Tensor db({n, k});
      kernels::parallel::matmul_tn(g.data(), t.value(ia).data(), db.data(), n, m, k);
      accumulate(t.grad(ib), db.data());
    }
  });
}

Var add(Var a, Var b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  accumulate(out, b.value().data());
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) accumulate(t.grad(ia), g.data());
    if (t.needs_grad(ib)) accumulate(t.grad(ib), g.data());
  });
}

Var sub(Var a, Var b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) accumulate(t.grad(ia), g.data());
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) {
      Tensor& ga = t.grad(ia);
      const Tensor& bv = t.value(ib);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      const Tensor& av = t.value(ia);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (auto& x : out.storage()) x *= factor;
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [=](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

Var add_bias(Var a, Var bias) {
  const std::size_t n = a.value().cols();
  require(bias.value().size() == n, "add_bias: bias extent " + shape_string(bias.shape()) +
                                        " vs rows of " + shape_string(a.shape()));
  Tensor out = a.value();
  const Tensor& bv = bias.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < n; ++c) row[c] += bv[c];
  }
  const auto ia = a.id(), ib = bias.id();
  return a.tape().record(std::move(out), {a, bias}, [=](Tape& t, const Tensor& g) {
    if (t.needs_grad(ia)) accumulate(t.grad(ia), g.data());
    if (t.needs_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        const auto row = g.row(r);
        for (std::size_t c = 0; c < n; ++c) gb[c] += row[c];
      }
    }
  });
}

Var sigmoid(Var a) {
  Tensor out = a.value();
  for (auto& x : out.storage()) x = 1.0 / (1.0 + std::exp(-x));
  const auto ia = a.id();
  auto saved = std::make_shared<Tensor>(out);
  return a.tape().record(std::move(out), {a}, [=](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(ia);
    const Tensor& s = *saved;
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
  });
}

Var gelu(Var a) {
  Tensor out = a.value();
  for (auto& x : out.storage()) x = 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [=](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(ia);
    const Tensor& x = t.value(ia);
    const double inv_sqrt_2pi = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double cdf = 0.5 * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2.0));
      const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
      ga[i] += g[i] * (cdf + x[i] * pdf);
    }
  });
}

Var layer_norm(Var x, Var gamma, Var beta) {
  const Tensor& xv = x.value();
  const std::size_t n = xv.cols(), rows = xv.rows();
  require(gamma.value().size() == n && beta.value().size() == n,
          "layer_norm: gamma/beta extent must equal last axis of " + shape_string(x.shape()));
  auto xhat = std::make_shared<Tensor>(xv.shape());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  Tensor out(xv.shape());
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  for (std::size_t r = 0; r < rows; ++r) {
    const auto in = xv.row(r);
    double mu = 0.0;
    for (double v : in) mu += v;
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (double v : in) var += (v - mu) * (v - mu);
    var /= static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_std)[r] = inv;
    auto xh = xhat->row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < n; ++c) {
      xh[c] = (in[c] - mu) * inv;
      o[c] = xh[c] * gv[c] + bv[c];
    }
  }
  const auto ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().record(std::move(out), {x, gamma, beta}, [=](Tape& t, const Tensor& g) {
    const Tensor& xh = *xhat;
    if (t.needs_grad(ig) || t.needs_grad(ib)) {
      for (std::size_t r = 0; r < rows; ++r) {
        const auto gr = g.row(r);
        const auto xr = xh.row(r);
        if (t.needs_grad(ig)) {
          Tensor& gg = t.grad(ig);
          for (std::size_t c = 0; c < n; ++c) gg[c] += gr[c] * xr[c];
        }
        if (t.needs_grad(ib)) {
          Tensor& gb = t.grad(ib);
          for (std::size_t c = 0; c < n; ++c) gb[c] += gr[c];
        }
      }
    }
    if (t.needs_grad(ix)) {
      Tensor& gx = t.grad(ix);
      const Tensor& gv = t.value(ig);
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t r = 0; r < rows; ++r) {
        const auto gr = g.row(r);
        const auto xr = xh.row(r);
        double sum_dy = 0.0, sum_dy_xh = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          const double dy = gr[c] * gv[c];
          sum_dy += dy;
          sum_dy_xh += dy * xr[c];
        }
        auto out_row = gx.row(r);
        for (std::size_t c = 0; c < n; ++c) {
          const double dy = gr[c] * gv[c];
          out_row[c] += (*inv_std)[r] * (dy - inv_n * sum_dy - xr[c] * inv_n * sum_dy_xh);
        }
      }
    }
  });
}

Var concat_cols(Var a, Var b) {
  require_matrix(a, "concat_cols");
  require_matrix(b, "concat_cols");
  const std::size_t rows = a.shape()[0], na = a.shape()[1], nb = b.shape()[1];
  require(b.shape()[0] == rows, "concat_cols: row counts differ");
  Tensor out({rows, na + nb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().row(r).begin(), na, out.row(r).begin());
    std::copy_n(b.value().row(r).begin(), nb, out.row(r).begin() + na);
  }
  const auto ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b}, [=](Tape& t, const Tensor& g) {
    for (std::size_t r = 0; r < rows; ++r) {
      const auto gr = g.row(r);
      if (t.needs_grad(ia)) {
        auto ga = t.grad(ia).row(r);
        for (std::size_t c = 0; c < na; ++c) ga[c] += gr[c];
      }
      if (t.needs_grad(ib)) {
        auto gb = t.grad(ib).row(r);
        for (std::size_t c = 0; c < nb; ++c) gb[c] += gr[na + c];
      }
    }
  });
}

Var slice_cols(Var a, std::size_t start, std::size_t width) {
  require_matrix(a, "slice_cols");
  const std::size_t rows = a.shape()[0], n = a.shape()[1];
  require(start + width <= n, "slice_cols: column range out of bounds");
  Tensor out({rows, width});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(a.value().row(r).begin() + start, width, out.row(r).begin());
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [=](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < width; ++c) ga(r, start + c) += g(r, c);
  });
}

Var select_rows(Var a, std::span<const std::size_t> rows) {
  require_matrix(a, "select_rows");
  const std::size_t n = a.shape()[1];
  std::vector<std::size_t> picked(rows.begin(), rows.end());
  Tensor out({picked.size(), n});
  for (std::size_t r = 0; r < picked.size(); ++r) {
    require(picked[r] < a.shape()[0], "select_rows: row index out of range");
    std::copy_n(a.value().row(picked[r]).begin(), n, out.row(r).begin());
  }
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [=](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < picked.size(); ++r) {
      auto dst = ga.row(picked[r]);
      const auto src = g.row(r);
      for (std::size_t c = 0; c < n; ++c) dst[c] += src[c];
    }
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double x : a.value().data()) total += x;
  const auto ia = a.id();
  return a.tape().record(Tensor({1}, {total}), {a}, [=](Tape& t, const Tensor& g) {
    for (auto& x : t.grad(ia).storage()) x += g[0];
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var dropout(Var a, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout: rate must be below 1");
  std::bernoulli_distribution keep(1.0 - rate);
  auto mask = std::make_shared<std::vector<double>>(a.value().size());
  const double kept = 1.0 / (1.0 - rate);
  for (auto& m : *mask) m = keep(rng) ? kept : 0.0;
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= (*mask)[i];
  const auto ia = a.id();
  return a.tape().record(std::move(out), {a}, [=](Tape& t, const Tensor& g) {
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (*mask)[i];
  });
}

Var embedding(Var table, std::span<const std::uint32_t> ids) {
  require_matrix(table, "embedding");
  const std::size_t vocab = table.shape()[0], d = table.shape()[1];
  std::vector<std::uint32_t> keys(ids.begin(), ids.end());
  Tensor out({keys.size(), d});
  for (std::size_t r = 0; r < keys.size(); ++r) {
    if (keys[r] >= vocab) {
      throw DataError("embedding: item id " + std::to_string(keys[r]) +
                      " out of range for table with " + std::to_string(vocab) + " rows");
    }
    if (keys[r] == 0) continue;
    std::copy_n(table.value().row(keys[r]).begin(), d, out.row(r).begin());
  }
  const auto it = table.id();
  return table.tape().record(std::move(out), {table}, [=](Tape& t, const Tensor& g) {
    Tensor& gt = t.grad(it);
    for (std::size_t r = 0; r < keys.size(); ++r) {
      if (keys[r] == 0) continue;
      auto dst = gt.row(keys[r]);
      const auto src = g.row(r);
      for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const std::uint32_t> targets) {
  require_matrix(logits, "softmax_cross_entropy");
  const std::size_t rows = logits.shape()[0], n = logits.shape()[1];
  require(targets.size() == rows, "softmax_cross_entropy: one target per row required");
  std::vector<std::uint32_t> tgt(targets.begin(), targets.end());
  auto probs = std::make_shared<Tensor>(Shape{rows, n});
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (tgt[r] == 0 || tgt[r] >= n) {
      throw DataError("softmax_cross_entropy: invalid target id " + std::to_string(tgt[r]));
    }
    const auto in = logits.value().row(r);
    auto p = probs->row(r);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 1; c < n; ++c) top = std::max(top, in[c]);
    double z = 0.0;
    for (std::size_t c = 1; c < n; ++c) {
      p[c] = std::exp(in[c] - top);
      z += p[c];
    }
    for (std::size_t c = 1; c < n; ++c) p[c] /= z;
    total += -(in[tgt[r]] - top - std::log(z));
  }
  const double inv_rows = 1.0 / static_cast<double>(rows);
  const auto il = logits.id();
  return logits.tape().record(Tensor({1}, {total * inv_rows}), {logits},
                              [=](Tape& t, const Tensor& g) {
                                Tensor& gl = t.grad(il);
                                const double w = g[0] * inv_rows;
                                for (std::size_t r = 0; r < rows; ++r) {
                                  auto dst = gl.row(r);
                                  const auto p = probs->row(r);
                                  for (std::size_t c = 1; c < n; ++c) dst[c] += w * p[c];
                                  dst[tgt[r]] -= w;
                                }
                              });
}

Var attention(Var q, Var k, Var v,
              std::shared_ptr<const std::vector<kernels::VisibleSet>> visibility,
              const kernels::AttentionDims& dims) {
  require(q.value().size() == dims.len * dims.heads * dims.d_head,
          "attention: query extent " + shape_string(q.shape()) + " does not match dims");
  require(k.value().size() == dims.len * dims.groups * dims.d_head &&
              v.value().size() == k.value().size(),
          "attention: key/value extent does not match dims");
  const auto offsets = kernels::probability_offsets(*visibility, dims);
  auto probs = std::make_shared<std::vector<double>>(offsets.back());
  Tensor out({dims.len, dims.heads * dims.d_head});
  kernels::parallel::attention_forward(q.value().data(), k.value().data(), v.value().data(),
                                       *visibility, dims, out.data(), *probs);
  const auto iq = q.id(), ik = k.id(), iv = v.id();
  return q.tape().record(std::move(out), {q, k, v}, [=](Tape& t, const Tensor& g) {
    Tensor dq(t.value(iq).shape()), dk(t.value(ik).shape()), dv(t.value(iv).shape());
    kernels::parallel::attention_backward(t.value(iq).data(), t.value(ik).data(),
                                          t.value(iv).data(), *visibility, dims, *probs,
                                          g.data(), dq.data(), dk.data(), dv.data());
    if (t.needs_grad(iq)) accumulate(t.grad(iq), dq.data());
    if (t.needs_grad(ik)) accumulate(t.grad(ik), dk.data());
    if (t.needs_grad(iv)) accumulate(t.grad(iv), dv.data());
  });
}

Var unfold_blocks(Var x, std::size_t block, std::size_t stride, std::size_t left_pad) {
  require_matrix(x, "unfold_blocks");
  const std::size_t len = x.shape()[0], d = x.shape()[1];
  const std::size_t padded = len + left_pad;
  require(block > 0 && stride > 0 && padded >= block,
          "unfold_blocks: sequence shorter than one block");
  const std::size_t count = (padded - block) / stride + 1;
  Tensor out({count, block * d});
  auto source_row = [=](std::size_t i, std::size_t r) -> std::ptrdiff_t {
    return static_cast<std::ptrdiff_t>(i * stride + r) - static_cast<std::ptrdiff_t>(left_pad);
  };
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t r = 0; r < block; ++r) {
      const auto src = source_row(i, r);
      if (src < 0) continue;
      std::copy_n(x.value().row(static_cast<std::size_t>(src)).begin(), d,
                  out.row(i).begin() + r * d);
    }
  }
  const auto ix = x.id();
  return x.tape().record(std::move(out), {x}, [=](Tape& t, const Tensor& g) {
    Tensor& gx = t.grad(ix);
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t r = 0; r < block; ++r) {
        const auto src = source_row(i, r);
        if (src < 0) continue;
        auto dst = gx.row(static_cast<std::size_t>(src));
        for (std::size_t c = 0; c < d; ++c) dst[c] += g(i, r * d + c);
      }
    }
  });
}

}  // namespace blossom::ad
