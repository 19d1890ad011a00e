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

#include <functional>
#include <span>
#include <string>

#include "blossom/autodiff.hpp"

namespace blossom {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t entries_checked = 0;
};

// Builds a scalar on the given tape from the current parameter values.
using ScalarFunction = std::function<ad::Var(ad::Tape&)>;

/**
 * Compares tape gradients against central differences
 * (f(p + h) - f(p - h)) / 2h for every entry of every parameter, reporting
 * max |analytic - numeric| / max(1, |numeric|).
 *
 * `max_entries_per_parameter` > 0 checks an evenly spaced subset of large
 * parameters. Throws NumericError if f is non-finite at any probe.
 */
GradCheckResult grad_check(const ScalarFunction& f, std::span<ad::Parameter* const> params,
                           double h = 1e-5, std::size_t max_entries_per_parameter = 0);

}  // namespace blossom
