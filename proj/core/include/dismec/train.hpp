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

#include <chrono>
#include <filesystem>
#include <functional>

#include "dismec/model.hpp"
#include "dismec/solver.hpp"
#include "dismec/types.hpp"

namespace dismec {

struct TrainConfig {
    double C = 1.0;
    double delta = 0.01;        // pruning threshold
    index_t batch_size = 1000;  // labels per block
    unsigned workers_per_batch = 0;  // 0 -> hardware concurrency
    SolverConfig solver;
    bool normalize = true;
    bool bias = false;
    std::chrono::seconds stale_claim_timeout{30 * 60};

    void validate() const;
};

/// B = floor(L / batch_size) + 1. Taken literally: when batch_size divides L
/// the last batch is empty and emits an empty block.
std::uint32_t batch_count(index_t n_labels, index_t batch_size);

/// Inverted label->rows index over a LabelMatrix. Sign views are spans into
/// this index; the feature matrix is never copied or referenced here.
class LabelIndex {
public:
    explicit LabelIndex(const LabelMatrix& Y);

    index_t labels() const { return n_labels_; }
    index_t rows() const { return n_rows_; }

    /// Rows on which `label` is positive, strictly increasing.
    std::span<const index_t> positives(index_t label) const;

private:
    index_t n_labels_ = 0;
    index_t n_rows_ = 0;
    std::vector<std::size_t> offsets_;
    std::vector<index_t> rows_;
};

/// Binary sign view for one label: +1 on its positive rows, -1 elsewhere.
SignVector make_sign_view(const LabelIndex& index, index_t label);

/// Keeps exactly the coordinates with |w_d| >= delta (delta=0 keeps all
/// nonzeros) and quantizes the survivors to f32.
SparseVector prune(std::span<const double> w, double delta);

/// Trains one label end to end: solve, then prune. Labels with no positive
/// rows skip the solver and come back empty — they are never predicted.
SparseVector train_label(const CsrMatrix& X, const LabelIndex& index, index_t label,
                         const TrainConfig& cfg);

/// Trains batch b, labels [b*batch_size, min((b+1)*batch_size, L)), with up
/// to workers_per_batch labels in parallel. The result is independent of
/// worker count and scheduling order. X must already be preprocessed
/// (normalization, bias column) per the config.
WeightBlock train_batch(const CsrMatrix& X, const LabelIndex& index, std::uint32_t batch_id,
                        const TrainConfig& cfg);

/// Per-event progress callback: (batch id, event) with event one of
/// "claimed", "trained", "skipped".
using TrainProgress = std::function<void(std::uint32_t, const std::string&)>;

/// Runs the whole training job against a model directory, cooperating with
/// any other processes pointed at the same directory: workers claim pending
/// batches via atomic claim-file creation, train them, and write one block
/// each. Blocks already present are never retrained; claims older than the
/// stale timeout whose block never appeared are reclaimed. Returns the
/// finalized manifest once all B blocks exist and their digests are recorded.
///
/// A fresh directory is initialized; an existing one must carry a manifest
/// whose dimensions and hyperparameters match, or the call fails.
ModelManifest run_training(const Dataset& data, const TrainConfig& cfg,
                           const std::filesystem::path& model_dir,
                           const TrainProgress& progress = {});

/// Appends the constant bias feature (value 1 at column D) to every row.
CsrMatrix append_bias_column(const CsrMatrix& X);

}  // namespace dismec
