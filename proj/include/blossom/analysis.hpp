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

// Sparsity and complexity accounting for the fused attention.

#include <span>
#include <string>
#include <vector>

#include "blossom/config.hpp"
#include "blossom/stis.hpp"

namespace blossom::analysis {

/**
 * Participating interactions for one query.
 *
 * `total` sums five categories without deduplication: M compressed keys,
 * k * l' selected positions, a symmetric window of 2*win*blk - 1 positions,
 * floor(log2 L) power-distance positions and one last-block position.
 * `dedup_union` is the honest count for the final query: M compressed keys
 * plus the distinct positions in the union of its k most recent selection
 * blocks and its causal power-mask row.
 */
struct SparsityReport {
  std::size_t length = 0;
  std::size_t compressed = 0;
  std::size_t selected = 0;
  std::size_t window = 0;
  std::size_t power = 0;
  std::size_t last_block = 0;
  std::size_t total = 0;
  std::size_t dedup_union = 0;
  double reduction = 0.0;  // 1 - total / L
  double dense_flops = 0.0;
  double blossom_flops = 0.0;
};

SparsityReport count_participating(std::size_t len, const AttentionConfig& cfg);

/// Asymptotic cost expressions evaluated numerically (d = d_model).
struct ComplexityReport {
  std::size_t length = 0;
  std::size_t blocks = 0;       // M
  double ltis_scoring = 0.0;    // M^2 d
  double ltis_attention = 0.0;  // G (l' k)^2 d
  double stis = 0.0;            // log2(L / blk) d
  double total = 0.0;           // sum of the three terms
  double gathered = 0.0;        // L k l' d, per-query gathered attention actually run
  double dense = 0.0;           // L^2 d
  double ratio = 0.0;           // total / dense
  std::string note;
};

ComplexityReport complexity_report(std::size_t len, const AttentionConfig& cfg);

struct MaskDensity {
  std::vector<std::size_t> row_counts;
  double mean_row = 0.0;
  double density = 0.0;  // visible pairs / L^2
  std::size_t max_row = 0;
};

MaskDensity mask_density(const stis::SparseMask& mask);

enum class ReportFormat { kTable, kKeyValue };

ReportFormat parse_format(const std::string& name);

std::string format_reports(std::span<const SparsityReport> sparsity,
                           std::span<const ComplexityReport> complexity, ReportFormat format);

// "89.4%" style rendering used by the report tables.
std::string percent(double fraction);

}  // namespace blossom::analysis
