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
#include <set>

#include "blossom/analysis.hpp"
#include "blossom/errors.hpp"
#include "blossom/ltis.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace blossom;
using namespace blossom::analysis;

TEST_CASE("participating interactions at the default configuration") {
  const AttentionConfig cfg;
  const std::pair<std::size_t, std::size_t> table[] = {{256, 103}, {512, 120}, {1024, 153}, {2048, 218}};
  for (auto [len, total] : table) {
    auto r = count_participating(len, cfg);
    CHECK(r.total == total);
    CHECK(r.dedup_union <= r.total);
    CHECK(r.compressed == ltis::block_count(len, cfg));
    CHECK(r.selected == 64);
    CHECK(r.window == 15);
    CHECK(r.last_block == 1);
    CHECK(r.reduction == doctest::Approx(1.0 - static_cast<double>(total) / len));
  }
  auto r = count_participating(2048, cfg);
  CHECK(percent(r.reduction) == "89.4%");
  CHECK(std::abs(r.reduction - 0.894) <= 0.0005);
}

TEST_CASE("deduplicated union matches a brute-force scan") {
  AttentionConfig cfg;
  for (std::size_t len : {64u, 100u, 256u, 777u}) {
    auto r = count_participating(len, cfg);
    const std::size_t q = len - 1;
    std::set<std::size_t> seen;
    const std::size_t n_sel = (len + 15) / 16;
    for (std::size_t b = n_sel >= 4 ? n_sel - 4 : 0; b < n_sel; ++b)
      for (std::size_t j = b * 16; j < std::min(len, b * 16 + 16); ++j) seen.insert(j);
    for (std::size_t j = 0; j < len; ++j)
      if (oracle::power_mask_predicate(q, j, len, 1, 8, true)) seen.insert(j);
    CHECK(r.dedup_union == r.compressed + seen.size());
    CHECK(r.dedup_union <= r.total);
  }
}

TEST_CASE("complexity report arithmetic") {
  AttentionConfig cfg;
  auto c = complexity_report(2048, cfg);
  CHECK(c.blocks == 127);
  CHECK(c.ltis_scoring == 127.0 * 127.0 * 64.0);
  CHECK(c.ltis_scoring == 1032256.0);
  CHECK(c.ltis_attention == 2.0 * 64.0 * 64.0 * 64.0);
  CHECK(c.stis == doctest::Approx(11.0 * 64.0));
  CHECK(c.dense == 2048.0 * 2048.0 * 64.0);
  CHECK(c.gathered == 2048.0 * 64.0 * 64.0);
  CHECK(!c.note.empty());
  for (std::size_t len : {256u, 512u, 1024u, 2048u, 4096u}) CHECK(complexity_report(len, cfg).ratio < 1.0);
}

TEST_CASE("mask density") {
  auto full = stis::build_power_mask(8, 1, 8, false);
  CHECK(mask_density(full).density == 1.0);

  auto sparse = stis::build_power_mask(1024, 1, 1, false);
  CHECK(mask_density(sparse).max_row <= 22);

  AttentionConfig cfg;
  auto d256 = mask_density(stis::build_power_mask(256, cfg, true));
  auto d2048 = mask_density(stis::build_power_mask(2048, cfg, true));
  CHECK(d2048.density < d256.density);
  CHECK(d256.row_counts.size() == 256);
}

TEST_CASE("report formatting") {
  AttentionConfig cfg;
  std::vector<SparsityReport> s{count_participating(2048, cfg)};
  std::vector<ComplexityReport> c{complexity_report(2048, cfg)};
  auto table = format_reports(s, c, ReportFormat::kTable);
  CHECK(table.find("218") != std::string::npos);
  CHECK(table.find("89.4%") != std::string::npos);
  auto kv = format_reports(s, c, ReportFormat::kKeyValue);
  CHECK(kv.find("L2048.total=218\n") != std::string::npos);
  CHECK(kv.find("L2048.reduction=89.4%\n") != std::string::npos);
  CHECK(kv.find("L2048.dedup_union=") != std::string::npos);
  CHECK(format_reports(s, c, ReportFormat::kKeyValue) == kv);
  CHECK(parse_format("kv") == ReportFormat::kKeyValue);
  CHECK_THROWS_AS(parse_format("xml"), ConfigError);
}
