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

#include "blossom/analysis.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <sstream>

#include "blossom/errors.hpp"
#include "blossom/ltis.hpp"

namespace blossom::analysis {
namespace {

std::size_t floor_log2(std::size_t x) { return x == 0 ? 0 : std::bit_width(x) - 1; }

std::string number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.0f", x);
  return buf;
}

}  // namespace

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f%%", fraction * 100.0);
  return buf;
}

SparsityReport count_participating(std::size_t len, const AttentionConfig& cfg) {
  cfg.validate();
  if (len == 0) throw ConfigError("count_participating: length must be positive");
  SparsityReport r;
  r.length = len;
  r.compressed = ltis::block_count(len, cfg);
  r.selected = cfg.top_k * cfg.select_size;
  r.window = 2 * cfg.window_span() - 1;
  r.power = floor_log2(len);
  r.last_block = 1;
  r.total = r.compressed + r.selected + r.window + r.power + r.last_block;
  r.reduction = 1.0 - static_cast<double>(r.total) / static_cast<double>(len);

  // Deduplicated positions for the final query.
  const std::size_t q = len - 1;
  std::vector<bool> seen(len, false);
  const std::size_t n_sel = ltis::selection_block_count(len, cfg);
  const std::size_t first_block = n_sel > cfg.top_k ? n_sel - cfg.top_k : 0;
  for (std::size_t j = first_block * cfg.select_size; j < len; ++j) seen[j] = true;
  const auto mask = stis::build_power_mask(len, cfg, true);
  for (auto j : mask.row(q)) seen[j] = true;
  r.dedup_union = r.compressed + static_cast<std::size_t>(std::count(seen.begin(), seen.end(), true));

  const double d = static_cast<double>(cfg.d_model);
  const double l = static_cast<double>(len);
  r.dense_flops = 2.0 * l * l * d;
  r.blossom_flops = 2.0 * l * static_cast<double>(r.total) * d;
  return r;
}

ComplexityReport complexity_report(std::size_t len, const AttentionConfig& cfg) {
  cfg.validate();
  ComplexityReport r;
  const double d = static_cast<double>(cfg.d_model);
  const double l = static_cast<double>(len);
  const double m = static_cast<double>(ltis::block_count(len, cfg));
  const double gathered = static_cast<double>(cfg.select_size * cfg.top_k);
  r.length = len;
  r.blocks = ltis::block_count(len, cfg);
  r.ltis_scoring = m * m * d;
  r.ltis_attention = static_cast<double>(cfg.kv_groups) * gathered * gathered * d;
  r.stis = std::log2(std::max(1.0, l / static_cast<double>(cfg.mask_block))) * d;
  r.total = r.ltis_scoring + r.ltis_attention + r.stis;
  r.gathered = l * gathered * d;
  r.dense = l * l * d;
  r.ratio = r.total / r.dense;
  r.note = "G(l'k)^2 d treats the gathered set as one block; per-query gathering runs L k l' d";
  return r;
}

MaskDensity mask_density(const stis::SparseMask& mask) {
  MaskDensity out;
  const std::size_t len = mask.len();
  out.row_counts.reserve(len);
  for (std::size_t i = 0; i < len; ++i) {
    out.row_counts.push_back(mask.row(i).size());
    out.max_row = std::max(out.max_row, out.row_counts.back());
  }
  const double pairs = static_cast<double>(mask.nnz());
  out.mean_row = len ? pairs / static_cast<double>(len) : 0.0;
  out.density = len ? pairs / (static_cast<double>(len) * static_cast<double>(len)) : 0.0;
  return out;
}

ReportFormat parse_format(const std::string& name) {
  if (name == "table") return ReportFormat::kTable;
  if (name == "kv" || name == "key-value") return ReportFormat::kKeyValue;
  throw ConfigError("unknown report format '" + name + "' (expected table or kv)");
}

std::string format_reports(std::span<const SparsityReport> sparsity,
                           std::span<const ComplexityReport> complexity, ReportFormat format) {
  std::ostringstream out;
  if (format == ReportFormat::kKeyValue) {
    for (const auto& r : sparsity) {
      const std::string p = "L" + std::to_string(r.length) + ".";
      out << p << "compressed=" << r.compressed << '\n'
          << p << "selected=" << r.selected << '\n'
          << p << "window=" << r.window << '\n'
          << p << "power=" << r.power << '\n'
          << p << "last_block=" << r.last_block << '\n'
          << p << "total=" << r.total << '\n'
          << p << "dedup_union=" << r.dedup_union << '\n'
          << p << "full=" << r.length << '\n'
          << p << "reduction=" << percent(r.reduction) << '\n'
          << p << "dense_flops=" << number(r.dense_flops) << '\n'
          << p << "blossom_flops=" << number(r.blossom_flops) << '\n';
    }
    for (const auto& c : complexity) {
      const std::string p = "L" + std::to_string(c.length) + ".cost.";
      out << p << "M=" << c.blocks << '\n'
          << p << "ltis_scoring=" << number(c.ltis_scoring) << '\n'
          << p << "ltis_attention=" << number(c.ltis_attention) << '\n'
          << p << "stis=" << number(c.stis) << '\n'
          << p << "total=" << number(c.total) << '\n'
          << p << "gathered_attention=" << number(c.gathered) << '\n'
          << p << "dense=" << number(c.dense) << '\n'
          << p << "ratio=" << std::setprecision(6) << c.ratio << '\n';
    }
    return out.str();
  }

  out << "Participating interactions per query\n";
  out << std::setw(8) << "L" << std::setw(8) << "full" << std::setw(6) << "cmp" << std::setw(6)
      << "sel" << std::setw(6) << "win" << std::setw(6) << "pow" << std::setw(6) << "last"
      << std::setw(8) << "total" << std::setw(8) << "dedup" << std::setw(11) << "reduction"
      << '\n';
  for (const auto& r : sparsity) {
    out << std::setw(8) << r.length << std::setw(8) << r.length << std::setw(6) << r.compressed
        << std::setw(6) << r.selected << std::setw(6) << r.window << std::setw(6) << r.power
        << std::setw(6) << r.last_block << std::setw(8) << r.total << std::setw(8)
        << r.dedup_union << std::setw(11) << percent(r.reduction) << '\n';
  }
  if (!complexity.empty()) {
    out << "\nComplexity terms (d = d_model)\n";
    out << std::setw(8) << "L" << std::setw(6) << "M" << std::setw(14) << "M^2d" << std::setw(14)
        << "G(l'k)^2d" << std::setw(10) << "log(L/b)d" << std::setw(14) << "total"
        << std::setw(14) << "Lkl'd" << std::setw(16) << "L^2d" << std::setw(10) << "ratio"
        << '\n';
    for (const auto& c : complexity) {
      out << std::setw(8) << c.length << std::setw(6) << c.blocks << std::setw(14)
          << number(c.ltis_scoring) << std::setw(14) << number(c.ltis_attention) << std::setw(10)
          << number(c.stis) << std::setw(14) << number(c.total) << std::setw(14)
          << number(c.gathered) << std::setw(16) << number(c.dense) << std::setw(10)
          << std::setprecision(4) << c.ratio << '\n';
    }
    out << "note: " << complexity.front().note << '\n';
  }
  return out.str();
}

}  // namespace blossom::analysis
