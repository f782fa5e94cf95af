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

#include "dismec/train.hpp"

#include <algorithm>
#include <cmath>

#include "dismec/parallel.hpp"

namespace dismec {

void TrainConfig::validate() const {
    solver.validate();
    if (!(C > 0.0)) throw std::invalid_argument("train config: C must be > 0");
    if (delta < 0.0) throw std::invalid_argument("train config: delta must be >= 0");
    if (batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
}

std::uint32_t batch_count(index_t n_labels, index_t batch_size) {
    return static_cast<std::uint32_t>(n_labels / batch_size) + 1;
}

LabelIndex::LabelIndex(const LabelMatrix& Y) : n_labels_(Y.labels()), n_rows_(Y.rows()) {
    std::vector<std::size_t> counts(n_labels_ + 1, 0);
    for (index_t i = 0; i < n_rows_; ++i)
        for (index_t l : Y.row(i)) ++counts[l + 1];
    offsets_.resize(n_labels_ + 1);
    offsets_[0] = 0;
    for (index_t l = 0; l < n_labels_; ++l) offsets_[l + 1] = offsets_[l] + counts[l + 1];
    rows_.resize(offsets_.back());
    std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
    for (index_t i = 0; i < n_rows_; ++i)
        for (index_t l : Y.row(i)) rows_[cursor[l]++] = i;
    // Row ids land sorted because the outer scan is in row order.
}

std::span<const index_t> LabelIndex::positives(index_t label) const {
    if (label >= n_labels_)
        throw std::out_of_range("label " + std::to_string(label) + " out of range " +
                                std::to_string(n_labels_));
    return {rows_.data() + offsets_[label], offsets_[label + 1] - offsets_[label]};
}

SignVector make_sign_view(const LabelIndex& index, index_t label) {
    return SignVector{index.positives(label), index.rows()};
}

SparseVector prune(std::span<const double> w, double delta) {
    SparseVector out;
    for (std::size_t d = 0; d < w.size(); ++d) {
        if (w[d] == 0.0 || std::fabs(w[d]) < delta) continue;
        double quantized = static_cast<double>(static_cast<float>(w[d]));
        if (quantized == 0.0) continue;  // f32 underflow, indistinguishable from zero
        out.indices.push_back(static_cast<index_t>(d));
        out.values.push_back(quantized);
    }
    return out;
}

SparseVector train_label(const CsrMatrix& X, const LabelIndex& index, index_t label,
                         const TrainConfig& cfg) {
    SignVector s = make_sign_view(index, label);
    if (s.positives.empty()) return {};  // never positive in training: never predicted
    SolverConfig solver_cfg = cfg.solver;
    solver_cfg.C = cfg.C;
    SolverResult res = solve(X, s, solver_cfg);
    return prune(res.w, cfg.delta);
}

WeightBlock train_batch(const CsrMatrix& X, const LabelIndex& index, std::uint32_t batch_id,
                        const TrainConfig& cfg) {
    cfg.validate();
    const index_t L = index.labels();
    const std::uint32_t B = batch_count(L, cfg.batch_size);
    if (batch_id >= B)
        throw std::out_of_range("batch " + std::to_string(batch_id) + " out of range " +
                                std::to_string(B));

    const std::uint64_t lo64 = static_cast<std::uint64_t>(batch_id) * cfg.batch_size;
    const index_t lo = static_cast<index_t>(std::min<std::uint64_t>(lo64, L));
    const index_t hi = static_cast<index_t>(std::min<std::uint64_t>(lo64 + cfg.batch_size, L));

    WeightBlock block;
    block.batch_id = batch_id;
    block.label_start = lo;
    block.dim = static_cast<std::uint64_t>(X.cols());
    block.weights.resize(hi - lo);

    // Each worker writes only its own label slot; output is independent of
    // scheduling order.
    parallel_for(hi - lo, cfg.workers_per_batch, [&](std::size_t i) {
        block.weights[i] = train_label(X, index, lo + static_cast<index_t>(i), cfg);
    });
    return block;
}

CsrMatrix append_bias_column(const CsrMatrix& X) {
    std::vector<std::size_t> offsets(X.rows() + 1);
    std::vector<index_t> indices;
    std::vector<double> values;
    indices.reserve(X.nnz() + X.rows());
    values.reserve(X.nnz() + X.rows());
    offsets[0] = 0;
    for (index_t i = 0; i < X.rows(); ++i) {
        auto idx = X.row_indices(i);
        auto val = X.row_values(i);
        indices.insert(indices.end(), idx.begin(), idx.end());
        values.insert(values.end(), val.begin(), val.end());
        indices.push_back(X.cols());
        values.push_back(1.0);
        offsets[i + 1] = indices.size();
    }
    return CsrMatrix(X.rows(), X.cols() + 1, std::move(offsets), std::move(indices),
                     std::move(values));
}

}  // namespace dismec
