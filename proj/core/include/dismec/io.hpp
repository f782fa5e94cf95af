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

#include "dismec/types.hpp"

namespace dismec {

/// Parse or I/O failure; the message carries file path and line number.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct XmcLoadOptions {
    bool has_header = true;
    /// Shift LibSVM-style 1-based feature ids down to 0-based on ingest.
    bool one_based_features = false;
};

struct XmcLoadReport {
    /// Duplicate label ids found on data lines; duplicates are dropped.
    std::size_t duplicate_labels = 0;
};

/// Loads a dataset in the extreme-classification repository text format:
/// an optional "N D L" header line followed by one line per instance,
/// "l1,l2,...,lk f1:v1 f2:v2 ...", all ids 0-based. The label list may be
/// empty, in which case the line starts with a space.
///
/// Without a header, dimensions are inferred from the data. With one, ids at
/// or past the declared dimension make the load fail. Duplicate feature ids
/// on a line are an error; duplicate label ids are deduplicated and counted
/// in `report`.
Dataset load_xmc(const std::filesystem::path& path, const XmcLoadOptions& opts = {},
                 XmcLoadReport* report = nullptr);

Dataset load_xmc_stream(std::istream& in, const std::string& name,
                        const XmcLoadOptions& opts = {}, XmcLoadReport* report = nullptr);

/// Writes the same format back, always with a header. Values are printed with
/// shortest round-trip precision.
void save_xmc(const Dataset& data, const std::filesystem::path& path);
void save_xmc_stream(const Dataset& data, std::ostream& out);

/// Returns a copy of X with each nonempty row scaled to unit Euclidean norm.
CsrMatrix row_normalize(const CsrMatrix& X);

}  // namespace dismec
