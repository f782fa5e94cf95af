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

#include "dismec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "dismec/io.hpp"
#include "dismec/predict.hpp"

namespace dismec {

double precision_at_k(std::span<const index_t> gold, std::span<const index_t> ranked,
                      std::size_t k) {
    if (k == 0) throw std::invalid_argument("precision_at_k: k must be >= 1");
    std::size_t hits = 0;
    std::size_t upto = std::min(k, ranked.size());
    for (std::size_t i = 0; i < upto; ++i)
        if (std::binary_search(gold.begin(), gold.end(), ranked[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(k);
}

std::optional<double> ndcg_at_k(std::span<const index_t> gold, std::span<const index_t> ranked,
                                std::size_t k) {
    if (k == 0) throw std::invalid_argument("ndcg_at_k: k must be >= 1");
    if (gold.empty()) return std::nullopt;  // normalizer undefined

    double dcg = 0.0;
    std::size_t upto = std::min(k, ranked.size());
    for (std::size_t i = 0; i < upto; ++i)
        if (std::binary_search(gold.begin(), gold.end(), ranked[i]))
            dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);  // rank is i+1

    double ideal = 0.0;
    std::size_t slots = std::min(k, gold.size());
    for (std::size_t i = 0; i < slots; ++i) ideal += 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return dcg / ideal;
}

MetricReport evaluate(const std::vector<std::vector<index_t>>& gold,
                      const std::vector<std::vector<index_t>>& ranked,
                      std::span<const std::size_t> ks) {
    if (gold.size() != ranked.size())
        throw std::invalid_argument("evaluate: " + std::to_string(gold.size()) +
                                    " gold rows vs " + std::to_string(ranked.size()) +
                                    " prediction rows");
    MetricReport report;
    for (std::size_t k : ks) report.rows.push_back({k, 0.0, 0.0});

    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i].empty()) {
            ++report.skipped;
            continue;
        }
        ++report.evaluated;
        for (auto& row : report.rows) {
            row.p_at_k += precision_at_k(gold[i], ranked[i], row.k);
            row.ndcg_at_k += *ndcg_at_k(gold[i], ranked[i], row.k);
        }
    }
    if (report.evaluated > 0) {
        for (auto& row : report.rows) {
            row.p_at_k /= static_cast<double>(report.evaluated);
            row.ndcg_at_k /= static_cast<double>(report.evaluated);
        }
    }
    return report;
}

MetricReport evaluate_files(const std::filesystem::path& gold_path,
                            const std::filesystem::path& preds_path,
                            std::span<const std::size_t> ks, bool gold_has_header) {
    XmcLoadOptions opts;
    opts.has_header = gold_has_header;
    Dataset gold_data = load_xmc(gold_path, opts);
    auto preds = load_predictions(preds_path);

    std::vector<std::vector<index_t>> gold(gold_data.rows());
    for (index_t i = 0; i < gold_data.rows(); ++i) {
        auto row = gold_data.labels.row(i);
        gold[i].assign(row.begin(), row.end());
    }
    std::vector<std::vector<index_t>> ranked(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        ranked[i].reserve(preds[i].size());
        for (const auto& sl : preds[i]) ranked[i].push_back(sl.label);
    }
    return evaluate(gold, ranked, ks);
}

void print_report(const MetricReport& report, std::ostream& out) {
    out << std::left << std::setw(6) << "k" << std::setw(12) << "P@k" << std::setw(12) << "nDCG@k"
        << "\n";
    out << std::fixed << std::setprecision(4);
    for (const auto& row : report.rows)
        out << std::left << std::setw(6) << row.k << std::setw(12) << row.p_at_k << std::setw(12)
            << row.ndcg_at_k << "\n";
    out.unsetf(std::ios::fixed);
    out << "evaluated " << report.evaluated << " instances, skipped " << report.skipped
        << " with empty gold label sets\n";
}

void print_report_json(const MetricReport& report, std::ostream& out) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        const auto& row = report.rows[i];
        if (i) os << ",";
        os << "{\"k\":" << row.k << ",\"p_at_k\":" << std::setprecision(10) << row.p_at_k
           << ",\"ndcg_at_k\":" << row.ndcg_at_k << ",\"skipped\":" << report.skipped << "}";
    }
    os << "]";
    out << os.str() << "\n";
}

}  // namespace dismec
