/*
 * Copyright 2026 the dismec-tools authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "dismec/types.hpp"

namespace dismec {

/// |gold ∩ top-k(ranked)| / k. Slots past the end of `ranked` count as
/// misses. `gold` must be sorted; `ranked` is best-first with unique labels.
double precision_at_k(std::span<const index_t> gold, std::span<const index_t> ranked,
                      std::size_t k);

/// DCG@k with binary gains and 1/log2(rank+1) discounts, normalized by the
/// ideal DCG over min(k, |gold|) slots. Empty gold sets have no normalizer;
/// those instances return nullopt and are skipped at aggregation.
std::optional<double> ndcg_at_k(std::span<const index_t> gold, std::span<const index_t> ranked,
                                std::size_t k);

struct MetricRow {
    std::size_t k = 0;
    double p_at_k = 0.0;
    double ndcg_at_k = 0.0;
};

struct MetricReport {
    std::vector<MetricRow> rows;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  // instances with empty gold label sets
};

/// Means over aligned (gold, ranked) pairs; rows with empty gold sets are
/// skipped and counted. Throws on length mismatch.
MetricReport evaluate(const std::vector<std::vector<index_t>>& gold,
                      const std::vector<std::vector<index_t>>& ranked,
                      std::span<const std::size_t> ks);

/// Same, reading gold label sets from a dataset and rankings from a
/// predictions file written by predict_file.
MetricReport evaluate_files(const std::filesystem::path& gold_path,
                            const std::filesystem::path& preds_path,
                            std::span<const std::size_t> ks, bool gold_has_header = true);

void print_report(const MetricReport& report, std::ostream& out);
void print_report_json(const MetricReport& report, std::ostream& out);

}  // namespace dismec
