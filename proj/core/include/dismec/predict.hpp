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

#include "dismec/model.hpp"
#include "dismec/types.hpp"

namespace dismec {

struct ScoredLabel {
    index_t label = 0;
    double score = 0.0;
};

/// Ranking order: descending score, ties by ascending label id.
bool ranks_before(const ScoredLabel& a, const ScoredLabel& b);

/// Ranked predictions for one instance, best first.
using Prediction = std::vector<ScoredLabel>;

/// A complete model held in memory: manifest plus all weight blocks.
struct Model {
    ModelManifest manifest;
    std::vector<WeightBlock> blocks;

    index_t labels() const { return manifest.n_labels; }
};

/// Loads manifest and blocks; missing block files make this fail with the
/// batch ids listed. Digests are verified against the manifest by default.
Model load_model(const std::filesystem::path& model_dir, bool verify_digests = true);

/// Scores every label in the block (sparse dot of its weights against x) and
/// returns the block's k best. Labels with empty weight vectors score 0 and
/// stay eligible. Feature ids outside the block dimensionality are ignored.
std::vector<ScoredLabel> score_block(const SparseVector& x, const WeightBlock& block,
                                     std::size_t k);

/// Global top-k across all blocks, identical to brute-force scoring of all L
/// labels. Blocks may be evaluated concurrently; k is clamped to L.
Prediction predict_topk(const SparseVector& x, const Model& model, std::size_t k,
                        unsigned workers = 1);

struct LatencyStats {
    std::size_t instances = 0;
    double mean_ms = 0.0;
    double p99_ms = 0.0;
};

struct PredictFileReport {
    LatencyStats latency;
    /// Test feature occurrences at ids >= model dimensionality, dropped from
    /// scoring (no weight can exist there).
    std::size_t out_of_range_features = 0;
    /// Set when the caller forced normalization different from the manifest.
    bool normalization_mismatch = false;
};

/// Scores every row of `test`, instances in parallel. Normalization mirrors
/// the training flag recorded in the manifest unless overridden (a mismatch
/// is reported, scores still computed).
std::vector<Prediction> predict_all(const Dataset& test, const Model& model, std::size_t k,
                                    PredictFileReport* report = nullptr,
                                    std::optional<bool> normalize_override = std::nullopt,
                                    unsigned workers = 0);

/// predict_all, then one line per row at `out_path`: "label:score label:score
/// ..." in rank order, scores with 6 significant digits.
PredictFileReport predict_file(const Dataset& test, const Model& model, std::size_t k,
                               const std::filesystem::path& out_path,
                               std::optional<bool> normalize_override = std::nullopt,
                               unsigned workers = 0);

/// Parses a predictions file back into ranked (label, score) rows.
std::vector<Prediction> load_predictions(const std::filesystem::path& path);

}  // namespace dismec
