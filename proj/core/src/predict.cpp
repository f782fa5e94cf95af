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

#include "dismec/predict.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "dismec/io.hpp"
#include "dismec/parallel.hpp"

namespace dismec {

bool ranks_before(const ScoredLabel& a, const ScoredLabel& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.label < b.label;
}

Model load_model(const std::filesystem::path& model_dir, bool verify_digests) {
    Model model;
    model.manifest = read_manifest(model_dir);
    auto missing = missing_blocks(model.manifest, model_dir);
    if (!missing.empty()) {
        std::string ids;
        for (auto b : missing) ids += (ids.empty() ? "" : ",") + std::to_string(b);
        throw model_error("incomplete model in " + model_dir.string() + ": missing blocks " + ids);
    }
    model.blocks.reserve(model.manifest.n_batches);
    for (std::uint32_t b = 0; b < model.manifest.n_batches; ++b) {
        const auto& entry = model.manifest.blocks[b];
        model.blocks.push_back(read_block(block_path(model_dir, b),
                                          verify_digests ? entry.digest : std::string{}));
    }
    return model;
}

namespace {

// Scores against a scattered dense copy of x; indices past `dim` were never
// scattered and read as zero contributions via the bounds check in scatter.
std::vector<ScoredLabel> score_block_dense(std::span<const double> dense_x,
                                           const WeightBlock& block, std::size_t k) {
    std::vector<ScoredLabel> scored(block.label_count());
    for (index_t l = 0; l < block.label_count(); ++l) {
        const auto& w = block.weights[l];
        double score = 0.0;
        for (std::size_t i = 0; i < w.nnz(); ++i) score += w.values[i] * dense_x[w.indices[i]];
        scored[l] = {block.label_start + l, score};
    }
    std::size_t keep = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(), ranks_before);
    scored.resize(keep);
    return scored;
}

std::size_t scatter(const SparseVector& x, std::uint64_t dim, std::vector<double>& dense) {
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < x.nnz(); ++i) {
        if (x.indices[i] < dim)
            dense[x.indices[i]] = x.values[i];
        else
            ++dropped;
    }
    return dropped;
}

void unscatter(const SparseVector& x, std::uint64_t dim, std::vector<double>& dense) {
    for (std::size_t i = 0; i < x.nnz(); ++i)
        if (x.indices[i] < dim) dense[x.indices[i]] = 0.0;
}

}  // namespace

std::vector<ScoredLabel> score_block(const SparseVector& x, const WeightBlock& block,
                                     std::size_t k) {
    std::vector<double> dense(block.dim, 0.0);
    scatter(x, block.dim, dense);
    return score_block_dense(dense, block, k);
}

Prediction predict_topk(const SparseVector& x, const Model& model, std::size_t k,
                        unsigned workers) {
    if (k == 0) throw std::invalid_argument("predict: k must be >= 1");
    k = std::min<std::size_t>(k, model.labels());

    const std::uint64_t dim = model.manifest.weight_dim();
    std::vector<std::vector<ScoredLabel>> per_block(model.blocks.size());

    if (workers <= 1) {
        std::vector<double> dense(dim, 0.0);
        scatter(x, dim, dense);
        for (std::size_t b = 0; b < model.blocks.size(); ++b)
            per_block[b] = score_block_dense(dense, model.blocks[b], k);
    } else {
        parallel_for(model.blocks.size(), workers, [&](std::size_t b) {
            per_block[b] = score_block(x, model.blocks[b], k);
        });
    }

    // The global top-k is contained in the union of per-block top-k lists.
    Prediction merged;
    for (auto& cand : per_block) merged.insert(merged.end(), cand.begin(), cand.end());
    std::size_t keep = std::min(k, merged.size());
    std::partial_sort(merged.begin(), merged.begin() + keep, merged.end(), ranks_before);
    merged.resize(keep);
    return merged;
}

namespace {

void format_score(std::string& out, double v) {
    char buf[40];
    int n = std::snprintf(buf, sizeof buf, "%.6g", v);
    out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace

std::vector<Prediction> predict_all(const Dataset& test, const Model& model, std::size_t k,
                                    PredictFileReport* report_out,
                                    std::optional<bool> normalize_override, unsigned workers) {
    if (k == 0) throw std::invalid_argument("predict: k must be >= 1");

    PredictFileReport report;
    bool normalize = model.manifest.normalize;
    if (normalize_override && *normalize_override != normalize) {
        report.normalization_mismatch = true;
        normalize = *normalize_override;
    }

    const CsrMatrix* X = &test.features;
    CsrMatrix normalized;
    if (normalize) {
        normalized = row_normalize(test.features);
        X = &normalized;
    }

    const index_t n = X->rows();
    const std::uint64_t feature_dim = model.manifest.dim;
    const std::uint64_t dim = model.manifest.weight_dim();
    const bool bias = model.manifest.bias;
    std::vector<Prediction> predictions(n);
    std::vector<double> latency_ms(n, 0.0);
    std::atomic<std::size_t> dropped{0};

    // Across-instance parallelism; block scoring stays sequential per row so
    // the dense scatter of x is reused for every block.
    unsigned nworkers = effective_workers(workers);
    std::vector<std::vector<double>> scratch(std::min<std::size_t>(nworkers, std::max<index_t>(n, 1)));

    std::size_t kk = std::min<std::size_t>(k, model.labels());
    parallel_for_indexed(n, nworkers, [&](unsigned me, std::size_t i) {
        auto& dense = scratch[me];
        if (dense.size() != dim) dense.assign(dim, 0.0);
        if (bias) dense[dim - 1] = 1.0;

        auto start = std::chrono::steady_clock::now();

        SparseVector x;
        auto idx = X->row_indices(static_cast<index_t>(i));
        auto val = X->row_values(static_cast<index_t>(i));
        x.indices.assign(idx.begin(), idx.end());
        x.values.assign(val.begin(), val.end());

        // Feature ids at or past the model dimensionality carry no weights;
        // drop them (the bias slot is not an input feature).
        std::size_t oor = scatter(x, feature_dim, dense);

        std::vector<std::vector<ScoredLabel>> per_block(model.blocks.size());
        for (std::size_t b = 0; b < model.blocks.size(); ++b)
            per_block[b] = score_block_dense(dense, model.blocks[b], kk);
        Prediction merged;
        for (auto& cand : per_block) merged.insert(merged.end(), cand.begin(), cand.end());
        std::size_t keep = std::min(kk, merged.size());
        std::partial_sort(merged.begin(), merged.begin() + keep, merged.end(), ranks_before);
        merged.resize(keep);
        predictions[i] = std::move(merged);

        unscatter(x, feature_dim, dense);

        auto stop = std::chrono::steady_clock::now();
        latency_ms[i] = std::chrono::duration<double, std::milli>(stop - start).count();
        if (oor) dropped.fetch_add(oor, std::memory_order_relaxed);
    });

    report.out_of_range_features = dropped.load();

    report.latency.instances = n;
    if (n > 0) {
        double sum = 0.0;
        for (double v : latency_ms) sum += v;
        report.latency.mean_ms = sum / static_cast<double>(n);
        std::vector<double> sorted = latency_ms;
        std::sort(sorted.begin(), sorted.end());
        std::size_t p99_idx = static_cast<std::size_t>(
            std::ceil(0.99 * static_cast<double>(n))) - 1;
        report.latency.p99_ms = sorted[std::min(p99_idx, sorted.size() - 1)];
    }
    if (report_out) *report_out = report;
    return predictions;
}

PredictFileReport predict_file(const Dataset& test, const Model& model, std::size_t k,
                               const std::filesystem::path& out_path,
                               std::optional<bool> normalize_override, unsigned workers) {
    PredictFileReport report;
    auto predictions = predict_all(test, model, k, &report, normalize_override, workers);

    std::ofstream out(out_path);
    if (!out) throw io_error("cannot open " + out_path.string() + " for writing");
    std::string line;
    for (const auto& row : predictions) {
        line.clear();
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) line += ' ';
            line += std::to_string(row[j].label);
            line += ':';
            format_score(line, row[j].score);
        }
        line += '\n';
        out << line;
    }
    out.flush();
    if (!out) throw io_error("write failed: " + out_path.string());
    return report;
}

std::vector<Prediction> load_predictions(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open predictions file " + path.string());
    std::vector<Prediction> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        Prediction row;
        std::size_t pos = 0;
        while (pos < line.size()) {
            std::size_t end = line.find(' ', pos);
            if (end == std::string::npos) end = line.size();
            std::string_view tok = std::string_view(line).substr(pos, end - pos);
            pos = end + 1;
            if (tok.empty()) continue;
            std::size_t colon = tok.find(':');
            if (colon == std::string_view::npos)
                throw io_error(path.string() + ":" + std::to_string(line_no) +
                               ": token '" + std::string(tok) + "' has no ':'");
            index_t label = 0;
            double score = 0.0;
            auto lab = tok.substr(0, colon);
            auto sc = tok.substr(colon + 1);
            auto r1 = std::from_chars(lab.data(), lab.data() + lab.size(), label);
            auto r2 = std::from_chars(sc.data(), sc.data() + sc.size(), score);
            if (r1.ec != std::errc() || r1.ptr != lab.data() + lab.size() ||
                r2.ec != std::errc() || r2.ptr != sc.data() + sc.size())
                throw io_error(path.string() + ":" + std::to_string(line_no) +
                               ": bad prediction token '" + std::string(tok) + "'");
            row.push_back({label, score});
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace dismec
