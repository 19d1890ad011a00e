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

// Quick self-checks run by `blossom verify`. The full suites live in tests/;
// these reuse their oracles at a size that finishes in a few seconds.

#include <cstdint>
#include <string>
#include <vector>

namespace blossom::verify {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Participating-interaction totals at the default configuration.
CheckResult check_interaction_counts();
// Blossom attention with every block selected and a full window vs dense GQA.
CheckResult check_dense_oracle(std::uint64_t seed, std::size_t trials = 5);
// Power mask vs its defining predicate on random geometries.
CheckResult check_mask_law(std::uint64_t seed, std::size_t trials = 20);
// Central differences over one encoder layer and the tied scorer.
CheckResult check_gradients(std::uint64_t seed);

std::vector<CheckResult> run_all(std::uint64_t seed);

}  // namespace blossom::verify
