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

#include "dismec/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

namespace dismec {

void PowerLawSpec::validate() const {
    if (n_labels == 0) throw std::invalid_argument("power-law spec: n_labels must be >= 1");
    if (head_size == 0) throw std::invalid_argument("power-law spec: head_size must be >= 1");
    if (!(beta > 0.0)) throw std::invalid_argument("power-law spec: beta must be > 0");
    if (n_features == 0) throw std::invalid_argument("power-law spec: n_features must be >= 1");
    if (prototype_nnz == 0 || prototype_nnz > n_features)
        throw std::invalid_argument("power-law spec: prototype_nnz out of range");
    if (noise_nnz > n_features)
        throw std::invalid_argument("power-law spec: noise_nnz out of range");
}

std::size_t powerlaw_label_size(const PowerLawSpec& spec, std::size_t rank) {
    double raw = static_cast<double>(spec.head_size) *
                 std::pow(static_cast<double>(rank), -spec.beta);
    auto rounded = static_cast<long long>(std::llround(raw));
    return static_cast<std::size_t>(std::max(1LL, rounded));
}

namespace {

// Distinct sorted feature ids; table sampling keeps it cheap for small k.
std::vector<index_t> sample_distinct(index_t dim, index_t k, std::mt19937_64& rng) {
    std::unordered_set<index_t> seen;
    std::vector<index_t> out;
    out.reserve(k);
    std::uniform_int_distribution<index_t> pick(0, dim - 1);
    while (out.size() < k) {
        index_t id = pick(rng);
        if (seen.insert(id).second) out.push_back(id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

Dataset generate_powerlaw(const PowerLawSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);

    const index_t L = spec.n_labels;
    std::vector<std::size_t> sizes(L);
    std::size_t total_slots = 0;
    for (index_t l = 0; l < L; ++l) {
        sizes[l] = powerlaw_label_size(spec, l + 1);  // label id l has rank l+1
        total_slots += sizes[l];
    }
    if (total_slots < L)
        throw std::invalid_argument("power-law spec infeasible: fewer positives than labels");

    // Per-label prototype directions.
    std::uniform_real_distribution<double> proto_val(0.5, 1.5);
    std::vector<SparseVector> prototypes(L);
    for (index_t l = 0; l < L; ++l) {
        prototypes[l].indices = sample_distinct(spec.n_features, spec.prototype_nnz, rng);
        prototypes[l].values.reserve(spec.prototype_nnz);
        for (index_t j = 0; j < spec.prototype_nnz; ++j)
            prototypes[l].values.push_back(proto_val(rng));
    }

    // One slot per (label, positive) pair; shuffled, then packed greedily
    // into instances of 1..3 distinct labels. A repeated label closes the
    // instance early so per-label counts stay exact.
    std::vector<index_t> slots;
    slots.reserve(total_slots);
    for (index_t l = 0; l < L; ++l) slots.insert(slots.end(), sizes[l], l);
    std::shuffle(slots.begin(), slots.end(), rng);

    std::uniform_int_distribution<int> labels_per_instance(1, 3);
    std::vector<std::vector<index_t>> instance_labels;
    std::vector<index_t> cur;
    int target = labels_per_instance(rng);
    for (index_t slot : slots) {
        bool dup = std::find(cur.begin(), cur.end(), slot) != cur.end();
        if (dup || static_cast<int>(cur.size()) >= target) {
            instance_labels.emplace_back(cur);
            cur.clear();
            target = labels_per_instance(rng);
        }
        cur.push_back(slot);
    }
    if (!cur.empty()) instance_labels.emplace_back(cur);

    // Features: sum of the instance's label prototypes plus a few random
    // noise features, normalized to unit length. Noise ids follow an
    // inverse-square frequency law, so a handful of features are common to
    // nearly every instance while the rest stay rare — the frequency profile
    // of real corpora. The common head is what lets one-vs-rest training
    // satisfy most negative margins with few weights, leaving the bulk of
    // the learnt matrix near zero.
    std::uniform_real_distribution<double> noise_val(0.5, 1.5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double zc = 2.0;  // head offset of the frequency law
    const double zmass = 1.0 / zc - 1.0 / (zc + static_cast<double>(spec.n_features));
    auto noise_id = [&](std::mt19937_64& r) {
        double u = unit(r);
        double x = 1.0 / (1.0 / zc - u * zmass) - zc;
        auto id = static_cast<index_t>(x);
        return std::min(id, spec.n_features - 1);
    };
    CsrBuilder features(spec.n_features);
    std::vector<std::size_t> label_offsets{0};
    std::vector<index_t> label_flat;
    std::vector<std::pair<index_t, double>> accum;

    for (auto& labs : instance_labels) {
        accum.clear();
        for (index_t l : labs)
            for (std::size_t j = 0; j < prototypes[l].nnz(); ++j)
                accum.emplace_back(prototypes[l].indices[j], prototypes[l].values[j]);
        for (index_t j = 0; j < spec.noise_nnz; ++j)
            accum.emplace_back(noise_id(rng), noise_val(rng));

        std::sort(accum.begin(), accum.end(),
                  [](auto& a, auto& b) { return a.first < b.first; });
        SparseVector row;
        for (auto& [id, v] : accum) {
            if (!row.indices.empty() && row.indices.back() == id)
                row.values.back() += v;
            else {
                row.indices.push_back(id);
                row.values.push_back(v);
            }
        }
        double sq = 0.0;
        for (double v : row.values) sq += v * v;
        if (sq > 0.0) {
            double inv = 1.0 / std::sqrt(sq);
            for (double& v : row.values) v *= inv;
        }
        features.add_row(row);

        std::sort(labs.begin(), labs.end());
        label_flat.insert(label_flat.end(), labs.begin(), labs.end());
        label_offsets.push_back(label_flat.size());
    }

    Dataset data{features.finish(),
                 LabelMatrix(L, std::move(label_offsets), std::move(label_flat))};
    data.validate();
    return data;
}

LabelFrequencyStats label_frequency_stats(const LabelMatrix& Y) {
    const index_t L = Y.labels();
    std::vector<std::size_t> counts(L, 0);
    for (index_t i = 0; i < Y.rows(); ++i)
        for (index_t l : Y.row(i)) ++counts[l];

    LabelFrequencyStats stats;
    stats.ranked.resize(L);
    std::vector<index_t> order(L);
    std::iota(order.begin(), order.end(), index_t{0});
    std::sort(order.begin(), order.end(), [&](index_t a, index_t b) {
        if (counts[a] != counts[b]) return counts[a] > counts[b];
        return a < b;
    });
    for (index_t r = 0; r < L; ++r)
        stats.ranked[r] = {static_cast<std::size_t>(r) + 1, order[r], counts[order[r]]};

    // OLS of log(count) on log(rank), nonzero counts only.
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t m = 0;
    for (const auto& e : stats.ranked) {
        if (e.count < 1) break;  // zeros sort last
        double x = std::log(static_cast<double>(e.rank));
        double y = std::log(static_cast<double>(e.count));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++m;
    }
    if (m >= 2) {
        double n = static_cast<double>(m);
        double denom = sxx - sx * sx / n;
        if (denom > 0) {
            double slope = (sxy - sx * sy / n) / denom;
            double intercept = (sy - slope * sx) / n;
            stats.beta_hat = -slope;
            stats.n1_hat = std::exp(intercept);
        }
    }
    return stats;
}

}  // namespace dismec
