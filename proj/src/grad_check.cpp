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

#include "blossom/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "blossom/errors.hpp"

namespace blossom {
namespace {

double evaluate(const ScalarFunction& f) {
  ad::Tape tape(false);
  const double value = f(tape).value()[0];
  if (!std::isfinite(value)) throw NumericError("grad_check: function is not finite");
  return value;
}

std::vector<std::size_t> probe_indices(std::size_t size, std::size_t limit) {
  std::vector<std::size_t> indices;
  if (limit == 0 || size <= limit) {
    indices.resize(size);
    for (std::size_t i = 0; i < size; ++i) indices[i] = i;
    return indices;
  }
  for (std::size_t i = 0; i < limit; ++i) indices.push_back(i * size / limit);
  return indices;
}

}  // namespace

GradCheckResult grad_check(const ScalarFunction& f, std::span<ad::Parameter* const> params,
                           double h, std::size_t max_entries_per_parameter) {
  for (ad::Parameter* p : params) p->zero_grad();
  {
    ad::Tape tape;
    ad::Var out = f(tape);
    if (!std::isfinite(out.value()[0])) throw NumericError("grad_check: function is not finite");
    tape.backward(out);
  }

  GradCheckResult result;
  for (ad::Parameter* p : params) {
    for (std::size_t idx : probe_indices(p->value.size(), max_entries_per_parameter)) {
      const double saved = p->value[idx];
      p->value[idx] = saved + h;
      const double up = evaluate(f);
      p->value[idx] = saved - h;
      const double down = evaluate(f);
      p->value[idx] = saved;

      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[idx];
      const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
      ++result.entries_checked;
      if (err > result.max_rel_error || result.worst_parameter.empty()) {
        result.max_rel_error = std::max(err, result.max_rel_error);
        result.worst_parameter = p->name;
        result.worst_index = idx;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace blossom
