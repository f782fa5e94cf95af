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

#include <cstdint>
#include <optional>

#include "dismec/types.hpp"

namespace dismec {

/// Parameters of a synthetic dataset whose label sizes follow a power law:
/// the label at rank r (1-based) receives max(1, round(head_size * r^-beta))
/// positive instances.
struct PowerLawSpec {
    index_t n_labels = 0;
    std::size_t head_size = 0;  // positives of the rank-1 label
    double beta = 1.0;          // power-law exponent, > 0
    index_t n_features = 0;
    index_t prototype_nnz = 16;  // features in each label's prototype direction
    index_t noise_nnz = 4;       // extra random features per instance
    std::uint64_t seed = 0;

    void validate() const;
};

/// Size of the rank-r label under the spec's power law.
std::size_t powerlaw_label_size(const PowerLawSpec& spec, std::size_t rank);

/// Generates a dataset with power-law label sizes. Every label gets a random
/// sparse prototype direction; an instance's feature vector is the normalized
/// sum of its labels' prototypes plus noise_nnz random noise features.
/// Instances carry 1..3 labels, packed so per-label counts match the power
/// law exactly. Deterministic for a fixed spec (including seed).
Dataset generate_powerlaw(const PowerLawSpec& spec);

struct LabelRankEntry {
    std::size_t rank;  // 1-based
    index_t label;
    std::size_t count;
};

struct LabelFrequencyStats {
    std::vector<LabelRankEntry> ranked;  // descending count, ties by ascending id
    /// Least-squares fit of log(count) = log(n1) - beta*log(rank) over labels
    /// with count >= 1; unset when fewer than two such labels exist.
    std::optional<double> n1_hat;
    std::optional<double> beta_hat;
};

LabelFrequencyStats label_frequency_stats(const LabelMatrix& Y);

}  // namespace dismec
