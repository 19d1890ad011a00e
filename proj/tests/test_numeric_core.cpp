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

#include <cmath>
#include <random>

#include "blossom/autodiff.hpp"
#include "blossom/errors.hpp"
#include "blossom/grad_check.hpp"
#include "blossom/tensor.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace blossom;

TEST_CASE("matmul hand cases") {
  CHECK(matmul(Tensor::matrix({{1, 0}, {0, 1}}), Tensor::matrix({{3, 4}, {5, 6}})) ==
        Tensor::matrix({{3, 4}, {5, 6}}));
  CHECK(matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})) == Tensor::matrix({{11}}));
}

TEST_CASE("matmul matches triple loop") {
  std::mt19937_64 rng(1);
  for (auto [m, k, n] : {std::tuple{5, 7, 3}, {1, 1, 1}, {64, 33, 17}, {130, 70, 90}}) {
    auto a = oracle::random_matrix(m, k, rng), b = oracle::random_matrix(k, n, rng);
    CHECK(oracle::max_abs(matmul(a, b), oracle::naive_matmul(a, b)) <= 1e-12);
  }
}

TEST_CASE("matmul rejects inner mismatch") {
  CHECK_THROWS_AS(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST_CASE("identity leaves a matrix unchanged") {
  std::mt19937_64 rng(2);
  auto a = oracle::random_matrix(6, 6, rng);
  CHECK(matmul(Tensor::identity(6), a) == a);
}

TEST_CASE("transpose") {
  CHECK(transpose(Tensor::matrix({{1, 2, 3}})) == Tensor::matrix({{1}, {2}, {3}}));
}

TEST_CASE("tensor construction checks volume") {
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK(Tensor({3, 4}).size() == 12);
}

TEST_CASE("masked softmax examples") {
  auto u = masked_softmax(Tensor::vector({0, 0, 0}));
  for (int i = 0; i < 3; ++i) CHECK(u[i] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  std::vector<std::uint8_t> mask{1, 0};
  auto s = masked_softmax(Tensor::vector({1, 1}), &mask);
  CHECK(s[0] == 1.0);
  CHECK(s[1] == 0.0);

  std::vector<std::uint8_t> none{0, 0, 0};
  auto z = masked_softmax(Tensor::vector({1, 2, 3}), &none);
  CHECK(z == Tensor({3}));
}

TEST_CASE("masked softmax matches exp/sum") {
  std::mt19937_64 rng(3);
  auto x = oracle::random_matrix(1, 9, rng).reshaped({9});
  auto y = masked_softmax(x);
  double z = 0;
  for (std::size_t i = 0; i < 9; ++i) z += std::exp(x[i]);
  double total = 0;
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(std::abs(y[i] - std::exp(x[i]) / z) <= 1e-12);
    total += y[i];
  }
  CHECK(std::abs(total - 1.0) <= 1e-12);
}

TEST_CASE("masked softmax over the first axis") {
  auto x = Tensor::matrix({{0, 5}, {0, 5}});
  auto y = masked_softmax(x, nullptr, 0);
  CHECK(y(0, 0) == doctest::Approx(0.5));
  CHECK(y(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("layer norm examples") {
  auto g = Tensor::vector({1, 1}), b = Tensor::vector({0, 0});
  auto y = layer_norm(Tensor::matrix({{1, 3}}), g, b);
  CHECK(std::abs(y[0] + 1.0) <= 1e-4);
  CHECK(std::abs(y[1] - 1.0) <= 1e-4);
  CHECK(std::abs(y[1] - 1.0 / std::sqrt(1.0 + kLayerNormEps)) <= 1e-14);

  auto g3 = Tensor::vector({1, 1, 1}), b3 = Tensor::vector({0, 0, 0});
  CHECK(layer_norm(Tensor::matrix({{4, 4, 4}}), g3, b3) == Tensor({1, 3}));
}

TEST_CASE("layer norm moments") {
  std::mt19937_64 rng(4);
  const std::size_t d = 32;
  auto x = oracle::random_matrix(3, d, rng, 4.0);
  auto y = layer_norm(x, Tensor({d}, 1.0), Tensor({d}));
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0, var = 0, in_var = 0, in_mean = 0;
    for (std::size_t c = 0; c < d; ++c) mean += y(r, c) / d, in_mean += x(r, c) / d;
    for (std::size_t c = 0; c < d; ++c)
      var += (y(r, c) - mean) * (y(r, c) - mean) / d,
          in_var += (x(r, c) - in_mean) * (x(r, c) - in_mean) / d;
    CHECK(std::abs(mean) <= 1e-12);
    CHECK(std::abs(var - in_var / (in_var + kLayerNormEps)) <= 1e-12);
  }
}

TEST_CASE("forward ops are bit-deterministic") {
  std::mt19937_64 rng(5);
  auto a = oracle::random_matrix(40, 30, rng), b = oracle::random_matrix(30, 20, rng);
  CHECK(matmul(a, b) == matmul(a, b));
}

// --- autodiff ---------------------------------------------------------------

namespace {

GradCheckResult check_unary(ad::Var (*op)(ad::Var), std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ad::Parameter x("x", oracle::random_matrix(3, 4, rng));
  std::vector<ad::Parameter*> ps{&x};
  return grad_check([&](ad::Tape& t) { return oracle::project(op(t.param(x)), seed); }, ps);
}

}  // namespace

TEST_CASE("grad check of w^2 at 3") {
  ad::Parameter w("w", Tensor::vector({3.0}));
  std::vector<ad::Parameter*> ps{&w};
  auto r = grad_check([&](ad::Tape& t) { auto v = t.param(w); return ad::sum(ad::mul(v, v)); }, ps);
  CHECK(r.worst_analytic == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(r.worst_numeric == doctest::Approx(6.0).epsilon(1e-8));
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("grad check flags a non-finite function") {
  ad::Parameter w("w", Tensor::vector({1.0}));
  std::vector<ad::Parameter*> ps{&w};
  CHECK_THROWS_AS(grad_check([&](ad::Tape& t) {
                    return ad::scale(ad::sum(t.param(w)), std::numeric_limits<double>::infinity());
                  }, ps),
                  NumericError);
}

TEST_CASE("elementwise op gradients") {
  CHECK(check_unary(&ad::sigmoid, 10).max_rel_error <= 1e-8);
  CHECK(check_unary(&ad::gelu, 11).max_rel_error <= 1e-8);
  CHECK(check_unary([](ad::Var v) { return ad::scale(v, -2.5); }, 12).max_rel_error <= 1e-8);
  CHECK(check_unary([](ad::Var v) { return ad::mul(v, v); }, 13).max_rel_error <= 1e-8);
  CHECK(check_unary([](ad::Var v) { return ad::sub(ad::slice_cols(v, 1, 2), ad::slice_cols(v, 0, 2)); }, 14)
            .max_rel_error <= 1e-8);
  CHECK(check_unary([](ad::Var v) { return ad::concat_cols(v, ad::scale(v, 3.0)); }, 15).max_rel_error <= 1e-8);
  CHECK(check_unary([](ad::Var v) { return ad::mean(ad::mul(v, v)); }, 16).max_rel_error <= 1e-8);
}

TEST_CASE("matrix op gradients") {
  std::mt19937_64 rng(20);
  ad::Parameter a("a", oracle::random_matrix(4, 5, rng));
  ad::Parameter b("b", oracle::random_matrix(5, 3, rng));
  ad::Parameter c("c", oracle::random_matrix(6, 5, rng));
  ad::Parameter bias("bias", oracle::random_matrix(1, 3, rng).reshaped({3}));
  std::vector<ad::Parameter*> ps{&a, &b, &c, &bias};
  auto r = grad_check([&](ad::Tape& t) {
    auto ab = ad::add_bias(ad::matmul(t.param(a), t.param(b)), t.param(bias));
    auto ac = ad::matmul_nt(t.param(a), t.param(c));
    return ad::add(oracle::project(ab, 1), oracle::project(ac, 2));
  }, ps);
  CHECK(r.max_rel_error <= 1e-8);
}

TEST_CASE("layer norm gradient") {
  std::mt19937_64 rng(21);
  ad::Parameter x("x", oracle::random_matrix(3, 6, rng));
  ad::Parameter g("g", oracle::random_matrix(1, 6, rng).reshaped({6}));
  ad::Parameter b("b", oracle::random_matrix(1, 6, rng).reshaped({6}));
  std::vector<ad::Parameter*> ps{&x, &g, &b};
  auto r = grad_check([&](ad::Tape& t) {
    return oracle::project(ad::layer_norm(t.param(x), t.param(g), t.param(b)), 3);
  }, ps);
  CHECK(r.max_rel_error <= 1e-7);
}

TEST_CASE("select_rows and unfold_blocks gradients") {
  std::mt19937_64 rng(22);
  ad::Parameter x("x", oracle::random_matrix(7, 3, rng));
  std::vector<ad::Parameter*> ps{&x};
  const std::vector<std::size_t> rows{6, 0, 0, 3};
  auto r = grad_check([&](ad::Tape& t) {
    auto v = t.param(x);
    return ad::add(oracle::project(ad::select_rows(v, rows), 4),
                   oracle::project(ad::unfold_blocks(v, 4, 2, 1), 5));
  }, ps);
  CHECK(r.max_rel_error <= 1e-8);
}

TEST_CASE("unfold_blocks layout") {
  ad::Tape t(false);
  auto x = t.constant(Tensor::matrix({{1}, {2}, {3}, {4}, {5}}));
  auto u = ad::unfold_blocks(x, 3, 2, 1).value();
  // positions -1..1 and 1..3; a block starting at 3 would run past the end
  REQUIRE(u.rows() == 2);
  CHECK(u.row(0)[0] == 0.0);
  CHECK(u.row(0)[1] == 1.0);
  CHECK(u.row(1)[0] == 2.0);
  CHECK(u.row(1)[2] == 4.0);
}

TEST_CASE("cross entropy: uniform, saturation and gradient") {
  ad::Tape t(false);
  // Column 0 is padding and ignored.
  auto logits = t.constant(Tensor::matrix({{123.0, 0.0, 0.0}}));
  std::vector<std::uint32_t> target{1};
  CHECK(ad::softmax_cross_entropy(logits, target).value()[0] == doctest::Approx(std::log(2.0)));
  auto sat = t.constant(Tensor::matrix({{0.0, 60.0, 0.0, 0.0}}));
  CHECK(ad::softmax_cross_entropy(sat, target).value()[0] < 1e-20);
  std::vector<std::uint32_t> pad{0};
  CHECK_THROWS_AS(ad::softmax_cross_entropy(logits, pad), DataError);

  std::mt19937_64 rng(23);
  ad::Parameter l("l", oracle::random_matrix(2, 4, rng));
  std::vector<ad::Parameter*> ps{&l};
  std::vector<std::uint32_t> targets{3, 1};
  auto r = grad_check([&](ad::Tape& tp) { return ad::softmax_cross_entropy(tp.param(l), targets); }, ps);
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("cross entropy loss gradient on a 3-item vocabulary") {
  ad::Parameter l("l", Tensor::matrix({{0.0, 0.3, -1.2, 2.0}}));
  std::vector<ad::Parameter*> ps{&l};
  std::vector<std::uint32_t> targets{2};
  auto r = grad_check([&](ad::Tape& tp) { return ad::softmax_cross_entropy(tp.param(l), targets); }, ps);
  CHECK(r.max_rel_error < 1e-6);
  // padding column receives nothing
  ad::Tape tp;
  auto v = tp.param(l);
  tp.backward(ad::softmax_cross_entropy(v, targets));
  CHECK(l.grad[0] == 0.0);
}

TEST_CASE("embedding gradient only reaches looked-up rows") {
  std::mt19937_64 rng(24);
  ad::Parameter table("table", oracle::random_matrix(6, 3, rng));
  std::vector<std::uint32_t> ids{2, 0, 2, 5};
  ad::Tape t;
  t.backward(oracle::project(ad::embedding(t.param(table), ids), 6));
  for (std::size_t r : {0u, 1u, 3u, 4u})
    for (std::size_t c = 0; c < 3; ++c) CHECK(table.grad(r, c) == 0.0);
  CHECK(table.grad(2, 0) != 0.0);
  CHECK(table.grad(5, 0) != 0.0);

  std::vector<std::uint32_t> bad{6};
  ad::Tape t2;
  CHECK_THROWS_AS(ad::embedding(t2.param(table), bad), DataError);
}

TEST_CASE("dropout: identity at rate 0, inverted scaling otherwise") {
  std::mt19937_64 rng(25);
  ad::Tape t(false);
  auto x = t.constant(Tensor({4, 50}, 1.0));
  CHECK(ad::dropout(x, 0.0, rng).value() == x.value());
  auto y = ad::dropout(x, 0.5, rng).value();
  for (double v : y.storage()) CHECK((v == 0.0 || v == 2.0));
}

TEST_CASE("parameter binding is cached and gradients accumulate into the parameter") {
  ad::Parameter w("w", Tensor::vector({1.0, 2.0}));
  ad::Tape t;
  auto a = t.param(w), b = t.param(w);
  CHECK(a.id() == b.id());
  t.backward(ad::sum(ad::add(a, b)));
  CHECK(w.grad[0] == 2.0);
  CHECK(w.grad[1] == 2.0);
}

TEST_CASE("record rejects non-finite forward values") {
  ad::Tape t;
  auto x = t.constant(Tensor::vector({1.0}));
  CHECK_THROWS_AS(ad::scale(x, std::numeric_limits<double>::quiet_NaN()), NumericError);
}
