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

#include "dismec/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "dismec/types.hpp"

namespace dismec {

void SparseVector::validate(index_t dim) const {
    if (indices.size() != values.size())
        throw std::invalid_argument("sparse vector: index/value length mismatch");
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (i > 0 && indices[i] <= indices[i - 1])
            throw std::invalid_argument("sparse vector: indices not strictly increasing");
        if (indices[i] >= dim)
            throw std::invalid_argument("sparse vector: index " + std::to_string(indices[i]) +
                                        " out of range " + std::to_string(dim));
        if (values[i] == 0.0)
            throw std::invalid_argument("sparse vector: explicit zero stored");
    }
}

CsrMatrix::CsrMatrix(index_t n_rows, index_t n_cols, std::vector<std::size_t> row_offsets,
                     std::vector<index_t> col_indices, std::vector<double> values)
    : n_rows_(n_rows),
      n_cols_(n_cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
    if (row_offsets_.size() != static_cast<std::size_t>(n_rows_) + 1)
        throw std::invalid_argument("csr: row_offsets length != n_rows + 1");
    if (row_offsets_.front() != 0 || row_offsets_.back() != col_indices_.size() ||
        col_indices_.size() != values_.size())
        throw std::invalid_argument("csr: offset bookkeeping broken");
    for (index_t i = 0; i < n_rows_; ++i) {
        if (row_offsets_[i] > row_offsets_[i + 1])
            throw std::invalid_argument("csr: row_offsets decreasing");
        for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            if (col_indices_[p] >= n_cols_)
                throw std::invalid_argument("csr: column index out of range");
            if (p > row_offsets_[i] && col_indices_[p] <= col_indices_[p - 1])
                throw std::invalid_argument("csr: column indices not strictly increasing");
        }
    }
}

void CsrBuilder::add_row(const SparseVector& row) {
    row.validate(n_cols_);
    indices_.insert(indices_.end(), row.indices.begin(), row.indices.end());
    values_.insert(values_.end(), row.values.begin(), row.values.end());
    offsets_.push_back(indices_.size());
}

CsrMatrix CsrBuilder::finish() {
    index_t n_rows = static_cast<index_t>(offsets_.size() - 1);
    return CsrMatrix(n_rows, n_cols_, std::move(offsets_), std::move(indices_),
                     std::move(values_));
}

LabelMatrix::LabelMatrix(index_t n_labels, std::vector<std::size_t> row_offsets,
                         std::vector<index_t> label_ids)
    : n_labels_(n_labels), row_offsets_(std::move(row_offsets)), label_ids_(std::move(label_ids)) {
    if (row_offsets_.empty() || row_offsets_.front() != 0 ||
        row_offsets_.back() != label_ids_.size())
        throw std::invalid_argument("label matrix: offset bookkeeping broken");
    for (std::size_t i = 0; i + 1 < row_offsets_.size(); ++i) {
        if (row_offsets_[i] > row_offsets_[i + 1])
            throw std::invalid_argument("label matrix: row_offsets decreasing");
        for (std::size_t p = row_offsets_[i]; p < row_offsets_[i + 1]; ++p) {
            if (label_ids_[p] >= n_labels_)
                throw std::invalid_argument("label matrix: label id out of range");
            if (p > row_offsets_[i] && label_ids_[p] <= label_ids_[p - 1])
                throw std::invalid_argument("label matrix: label ids not strictly increasing");
        }
    }
}

void Dataset::validate() const {
    if (features.rows() != labels.rows())
        throw std::invalid_argument("dataset: feature rows " + std::to_string(features.rows()) +
                                    " != label rows " + std::to_string(labels.rows()));
}

namespace {

[[noreturn]] void fail(const std::string& name, std::size_t line_no, const std::string& what) {
    throw io_error(name + ":" + std::to_string(line_no) + ": " + what);
}

long long parse_int(std::string_view tok, const std::string& name, std::size_t line_no,
                    const char* what) {
    long long v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || v < 0)
        fail(name, line_no, std::string("bad ") + what + " '" + std::string(tok) + "'");
    return v;
}

double parse_value(std::string_view tok, const std::string& name, std::size_t line_no) {
    double v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        fail(name, line_no, "bad feature value '" + std::string(tok) + "'");
    return v;
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

Dataset load_xmc_stream(std::istream& in, const std::string& name, const XmcLoadOptions& opts,
                        XmcLoadReport* report) {
    std::string line;
    std::size_t line_no = 0;

    long long declared_n = -1, declared_d = -1, declared_l = -1;
    if (opts.has_header) {
        if (!std::getline(in, line)) fail(name, 1, "missing header line");
        strip_cr(line);
        ++line_no;
        std::istringstream hs(line);
        std::string a, b, c, extra;
        if (!(hs >> a >> b >> c) || (hs >> extra))
            fail(name, line_no, "header must be exactly 'N D L'");
        declared_n = parse_int(a, name, line_no, "instance count");
        declared_d = parse_int(b, name, line_no, "feature count");
        declared_l = parse_int(c, name, line_no, "label count");
    }

    std::vector<std::size_t> feat_offsets{0}, label_offsets{0};
    std::vector<index_t> feat_indices, label_ids_flat;
    std::vector<double> feat_values;
    std::size_t dup_labels = 0;
    long long max_feat = -1, max_label = -1;
    std::vector<index_t> row_labels;
    std::vector<std::pair<index_t, double>> row_feats;

    while (std::getline(in, line)) {
        strip_cr(line);
        ++line_no;
        if (opts.has_header && static_cast<long long>(feat_offsets.size()) - 1 >= declared_n) {
            if (line.empty()) continue;  // tolerate one trailing blank line
            fail(name, line_no, "more data lines than the declared " +
                                    std::to_string(declared_n) + " instances");
        }

        // Labels end at the first space; an empty label list is legal and
        // makes the line start with a space.
        std::size_t sep = line.find(' ');
        std::string_view label_part =
            sep == std::string::npos ? std::string_view(line) : std::string_view(line).substr(0, sep);

        row_labels.clear();
        if (!label_part.empty()) {
            std::size_t start = 0;
            while (start <= label_part.size()) {
                std::size_t comma = label_part.find(',', start);
                std::string_view tok = label_part.substr(
                    start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
                long long id = parse_int(tok, name, line_no, "label id");
                if (declared_l >= 0 && id >= declared_l)
                    fail(name, line_no, "label id " + std::to_string(id) +
                                            " >= declared label count " + std::to_string(declared_l));
                row_labels.push_back(static_cast<index_t>(id));
                max_label = std::max(max_label, id);
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
        }
        std::sort(row_labels.begin(), row_labels.end());
        auto dup_end = std::unique(row_labels.begin(), row_labels.end());
        dup_labels += static_cast<std::size_t>(row_labels.end() - dup_end);
        row_labels.erase(dup_end, row_labels.end());
        label_ids_flat.insert(label_ids_flat.end(), row_labels.begin(), row_labels.end());
        label_offsets.push_back(label_ids_flat.size());

        row_feats.clear();
        if (sep != std::string::npos) {
            std::string_view rest = std::string_view(line).substr(sep + 1);
            std::size_t pos = 0;
            while (pos < rest.size()) {
                std::size_t end = rest.find(' ', pos);
                if (end == std::string_view::npos) end = rest.size();
                std::string_view tok = rest.substr(pos, end - pos);
                pos = end + 1;
                if (tok.empty()) continue;
                std::size_t colon = tok.find(':');
                if (colon == std::string_view::npos)
                    fail(name, line_no, "feature token '" + std::string(tok) + "' has no ':'");
                long long id = parse_int(tok.substr(0, colon), name, line_no, "feature id");
                if (opts.one_based_features) {
                    if (id == 0) fail(name, line_no, "feature id 0 in 1-based mode");
                    --id;
                }
                double v = parse_value(tok.substr(colon + 1), name, line_no);
                if (declared_d >= 0 && id >= declared_d)
                    fail(name, line_no, "feature id " + std::to_string(id) +
                                            " >= declared feature count " + std::to_string(declared_d));
                max_feat = std::max(max_feat, id);
                row_feats.emplace_back(static_cast<index_t>(id), v);
            }
        }
        if (!std::is_sorted(row_feats.begin(), row_feats.end(),
                            [](auto& a, auto& b) { return a.first < b.first; }))
            std::sort(row_feats.begin(), row_feats.end());
        for (std::size_t i = 0; i < row_feats.size(); ++i) {
            if (i > 0 && row_feats[i].first == row_feats[i - 1].first)
                fail(name, line_no, "duplicate feature id " + std::to_string(row_feats[i].first));
            if (row_feats[i].second != 0.0) {
                feat_indices.push_back(row_feats[i].first);
                feat_values.push_back(row_feats[i].second);
            }
        }
        feat_offsets.push_back(feat_indices.size());
    }

    std::size_t n_rows = feat_offsets.size() - 1;
    if (opts.has_header && static_cast<long long>(n_rows) != declared_n)
        fail(name, line_no, "got " + std::to_string(n_rows) + " data lines, header declared " +
                                std::to_string(declared_n));

    index_t n_cols = opts.has_header ? static_cast<index_t>(declared_d)
                                     : static_cast<index_t>(max_feat + 1);
    index_t n_labels = opts.has_header ? static_cast<index_t>(declared_l)
                                       : static_cast<index_t>(max_label + 1);

    if (report) report->duplicate_labels = dup_labels;

    Dataset data{CsrMatrix(static_cast<index_t>(n_rows), n_cols, std::move(feat_offsets),
                           std::move(feat_indices), std::move(feat_values)),
                 LabelMatrix(n_labels, std::move(label_offsets), std::move(label_ids_flat))};
    data.validate();
    return data;
}

Dataset load_xmc(const std::filesystem::path& path, const XmcLoadOptions& opts,
                 XmcLoadReport* report) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open " + path.string());
    return load_xmc_stream(in, path.filename().string(), opts, report);
}

namespace {

void append_double(std::string& out, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
}

}  // namespace

void save_xmc_stream(const Dataset& data, std::ostream& out) {
    std::string line;
    line += std::to_string(data.rows());
    line += ' ';
    line += std::to_string(data.features.cols());
    line += ' ';
    line += std::to_string(data.labels.labels());
    line += '\n';
    out << line;
    for (index_t i = 0; i < data.rows(); ++i) {
        line.clear();
        auto labels = data.labels.row(i);
        for (std::size_t j = 0; j < labels.size(); ++j) {
            if (j) line += ',';
            line += std::to_string(labels[j]);
        }
        auto idx = data.features.row_indices(i);
        auto val = data.features.row_values(i);
        for (std::size_t j = 0; j < idx.size(); ++j) {
            line += ' ';
            line += std::to_string(idx[j]);
            line += ':';
            append_double(line, val[j]);
        }
        line += '\n';
        out << line;
    }
}

void save_xmc(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    save_xmc_stream(data, out);
    out.flush();
    if (!out) throw io_error("write failed: " + path.string());
}

CsrMatrix row_normalize(const CsrMatrix& X) {
    std::vector<std::size_t> offsets(X.row_offsets().begin(), X.row_offsets().end());
    std::vector<index_t> indices(X.col_indices().begin(), X.col_indices().end());
    std::vector<double> values(X.values().begin(), X.values().end());
    for (index_t i = 0; i < X.rows(); ++i) {
        double sq = 0.0;
        for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) sq += values[p] * values[p];
        if (sq == 0.0) continue;
        double inv = 1.0 / std::sqrt(sq);
        for (std::size_t p = offsets[i]; p < offsets[i + 1]; ++p) values[p] *= inv;
    }
    return CsrMatrix(X.rows(), X.cols(), std::move(offsets), std::move(indices),
                     std::move(values));
}

}  // namespace dismec
