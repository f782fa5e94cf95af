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

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dismec {

/// Feature / label / row ids. 0-based everywhere.
using index_t = std::uint32_t;

/// One sparse row or weight vector: parallel (indices, values) arrays with
/// strictly increasing indices and no explicit zeros.
struct SparseVector {
    std::vector<index_t> indices;
    std::vector<double> values;

    std::size_t nnz() const { return indices.size(); }
    bool empty() const { return indices.empty(); }

    bool operator==(const SparseVector&) const = default;

    /// Checks the structural invariants against a dimensionality bound.
    void validate(index_t dim) const;
};

/// Row-major sparse matrix (CSR). Immutable after construction; shared
/// read-only across training workers.
class CsrMatrix {
public:
    CsrMatrix() = default;
    CsrMatrix(index_t n_rows, index_t n_cols, std::vector<std::size_t> row_offsets,
              std::vector<index_t> col_indices, std::vector<double> values);

    index_t rows() const { return n_rows_; }
    index_t cols() const { return n_cols_; }
    std::size_t nnz() const { return col_indices_.size(); }

    std::span<const index_t> row_indices(index_t i) const {
        return {col_indices_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
    }
    std::span<const double> row_values(index_t i) const {
        return {values_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
    }
    std::span<const std::size_t> row_offsets() const { return row_offsets_; }
    std::span<const index_t> col_indices() const { return col_indices_; }
    std::span<const double> values() const { return values_; }

    bool operator==(const CsrMatrix&) const = default;

private:
    index_t n_rows_ = 0;
    index_t n_cols_ = 0;
    std::vector<std::size_t> row_offsets_{0};
    std::vector<index_t> col_indices_;
    std::vector<double> values_;
};

/// Builds a CsrMatrix row by row.
class CsrBuilder {
public:
    CsrBuilder(index_t n_cols) : n_cols_(n_cols) { offsets_.push_back(0); }

    /// Appends one row; `row` must satisfy SparseVector invariants for n_cols.
    void add_row(const SparseVector& row);
    CsrMatrix finish();

private:
    index_t n_cols_;
    std::vector<std::size_t> offsets_;
    std::vector<index_t> indices_;
    std::vector<double> values_;
};

/// Per-instance positive label sets, stored CSR-style. Label ids per row are
/// strictly increasing (set semantics).
class LabelMatrix {
public:
    LabelMatrix() = default;
    LabelMatrix(index_t n_labels, std::vector<std::size_t> row_offsets,
                std::vector<index_t> label_ids);

    index_t rows() const { return static_cast<index_t>(row_offsets_.size() - 1); }
    index_t labels() const { return n_labels_; }
    std::size_t total_positives() const { return label_ids_.size(); }

    std::span<const index_t> row(index_t i) const {
        return {label_ids_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
    }

    bool operator==(const LabelMatrix&) const = default;

private:
    index_t n_labels_ = 0;
    std::vector<std::size_t> row_offsets_{0};
    std::vector<index_t> label_ids_;
};

/// A feature matrix and the aligned label sets.
struct Dataset {
    CsrMatrix features;
    LabelMatrix labels;

    index_t rows() const { return features.rows(); }

    /// Throws if feature and label row counts disagree.
    void validate() const;
};

}  // namespace dismec
