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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dismec/types.hpp"

namespace dismec {

struct model_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr std::uint32_t kBlockFormatVersion = 1;

/// Pruned sparse weight vectors for one contiguous batch of labels. Weight
/// values are quantized to f32 at prune time, so in-memory blocks round-trip
/// bit-exactly through the file format.
struct WeightBlock {
    std::uint32_t batch_id = 0;
    index_t label_start = 0;
    std::uint64_t dim = 0;  // weight dimensionality (features, +1 with bias)
    std::vector<SparseVector> weights;

    index_t label_count() const { return static_cast<index_t>(weights.size()); }
    std::uint64_t nnz() const;
    /// Exact serialized size of this block in bytes.
    std::uint64_t byte_size() const;

    bool operator==(const WeightBlock&) const = default;
    void validate() const;
};

struct BlockEntry {
    std::uint32_t id = 0;
    std::string status;  // pending | claimed | done
    std::string worker;
    std::string digest;  // sha256 of the block file, hex
};

/// Metadata tying the block files of one model directory together.
struct ModelManifest {
    std::string run_id;
    index_t n_labels = 0;   // L
    index_t dim = 0;        // D, before any bias augmentation
    index_t batch_size = 0;
    std::uint32_t n_batches = 0;  // B = floor(L / batch_size) + 1
    double C = 1.0;
    double delta = 0.01;
    double eps = 0.01;
    bool normalize = true;
    bool bias = false;
    std::uint32_t format_version = kBlockFormatVersion;
    std::uint64_t total_nnz = 0;
    std::vector<BlockEntry> blocks;

    /// Weight dimensionality of the stored vectors.
    std::uint64_t weight_dim() const { return static_cast<std::uint64_t>(dim) + (bias ? 1 : 0); }
};

std::filesystem::path block_path(const std::filesystem::path& model_dir, std::uint32_t batch_id);
std::filesystem::path manifest_path(const std::filesystem::path& model_dir);

/// Writes <dir>/blocks/block_<id>.dsmb atomically (tmp + rename) and returns
/// the file's sha256 digest. Layout, little-endian throughout:
///   magic "DSMB" | version u32 | batch id u32 | label_start u32 |
///   label_count u32 | dim u64 | per label: nnz u32, nnz x (index u32, f32)
std::string write_block(const WeightBlock& block, const std::filesystem::path& model_dir);

/// Inverse of write_block. Fails on bad magic or version, truncation, and
/// out-of-range or unordered indices. When `expected_digest` is nonempty the
/// file's digest must match.
WeightBlock read_block(const std::filesystem::path& path, const std::string& expected_digest = {});

void write_manifest(const ModelManifest& m, const std::filesystem::path& model_dir);
ModelManifest read_manifest(const std::filesystem::path& model_dir);

/// Batch ids whose block files are missing from the model directory.
std::vector<std::uint32_t> missing_blocks(const ModelManifest& m,
                                          const std::filesystem::path& model_dir);

struct HistogramBin {
    double lo, hi;  // [lo, hi)
    std::uint64_t count = 0;
};

struct ModelStats {
    std::uint64_t total_nnz = 0;
    std::uint64_t total_bytes = 0;
    std::vector<std::uint64_t> per_block_nnz;
    std::vector<HistogramBin> histogram;
    /// Fraction of stored weights with |w| < 0.01 — the prunable mass of a
    /// delta=0 model; 0 by construction once pruned at delta >= 0.01.
    double small_weight_fraction = 0.0;
};

/// Scans a complete model and reports size and weight-distribution stats.
/// `bin_edges` must be increasing; defaults include the [-0.01, 0.01) region.
ModelStats model_stats(const std::filesystem::path& model_dir,
                       std::vector<double> bin_edges = {});

}  // namespace dismec
