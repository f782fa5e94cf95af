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

#include "dismec/model.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "dismec/digest.hpp"

namespace dismec {

namespace {

constexpr char kMagic[4] = {'D', 'S', 'M', 'B'};

void put_u32(std::string& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 24)};
    out.append(b, 4);
}

void put_u64(std::string& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v));
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;
    const std::string& name;

    void need(std::size_t n) {
        if (pos + n > buf.size()) throw model_error("truncated block file: " + name);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(buf[pos + i]);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t lo = u32();
        std::uint64_t hi = u32();
        return lo | (hi << 32);
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
};

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw model_error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw model_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::uint64_t WeightBlock::nnz() const {
    std::uint64_t n = 0;
    for (const auto& w : weights) n += w.nnz();
    return n;
}

std::uint64_t WeightBlock::byte_size() const {
    // header: magic + version + batch id + label_start + label_count + dim
    return 28 + 4ull * weights.size() + 8ull * nnz();
}

void WeightBlock::validate() const {
    auto bound = static_cast<index_t>(
        std::min<std::uint64_t>(dim, std::numeric_limits<index_t>::max()));
    for (const auto& w : weights) w.validate(bound);
}

std::filesystem::path block_path(const std::filesystem::path& model_dir, std::uint32_t batch_id) {
    return model_dir / "blocks" / ("block_" + std::to_string(batch_id) + ".dsmb");
}

std::filesystem::path manifest_path(const std::filesystem::path& model_dir) {
    return model_dir / "manifest.json";
}

std::string write_block(const WeightBlock& block, const std::filesystem::path& model_dir) {
    std::string bytes;
    bytes.reserve(block.byte_size());
    bytes.append(kMagic, 4);
    put_u32(bytes, kBlockFormatVersion);
    put_u32(bytes, block.batch_id);
    put_u32(bytes, block.label_start);
    put_u32(bytes, block.label_count());
    put_u64(bytes, block.dim);
    for (const auto& w : block.weights) {
        put_u32(bytes, static_cast<std::uint32_t>(w.nnz()));
        for (std::size_t i = 0; i < w.nnz(); ++i) {
            put_u32(bytes, w.indices[i]);
            put_f32(bytes, static_cast<float>(w.values[i]));
        }
    }

    std::filesystem::create_directories(model_dir / "blocks");
    atomic_write(block_path(model_dir, block.batch_id), bytes);
    return sha256_hex(std::as_bytes(std::span(bytes.data(), bytes.size())));
}

WeightBlock read_block(const std::filesystem::path& path, const std::string& expected_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw model_error("cannot open block file " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (!expected_digest.empty()) {
        auto actual = sha256_hex(std::as_bytes(std::span(buf.data(), buf.size())));
        if (actual != expected_digest)
            throw model_error("digest mismatch for " + path.string() + ": manifest " +
                              expected_digest + ", file " + actual);
    }

    std::string name = path.filename().string();
    Reader rd{buf, 0, name};
    rd.need(4);
    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw model_error("bad magic in block file " + name);
    rd.pos = 4;
    std::uint32_t version = rd.u32();
    if (version != kBlockFormatVersion)
        throw model_error("unsupported block format version " + std::to_string(version) + " in " +
                          name);

    WeightBlock block;
    block.batch_id = rd.u32();
    block.label_start = rd.u32();
    std::uint32_t count = rd.u32();
    block.dim = rd.u64();
    block.weights.resize(count);
    for (std::uint32_t l = 0; l < count; ++l) {
        std::uint32_t nnz = rd.u32();
        auto& w = block.weights[l];
        w.indices.resize(nnz);
        w.values.resize(nnz);
        for (std::uint32_t i = 0; i < nnz; ++i) {
            w.indices[i] = rd.u32();
            w.values[i] = static_cast<double>(rd.f32());
            if (w.indices[i] >= block.dim)
                throw model_error("weight index " + std::to_string(w.indices[i]) +
                                  " out of range in " + name);
            if (i > 0 && w.indices[i] <= w.indices[i - 1])
                throw model_error("unsorted weight indices in " + name);
        }
    }
    if (rd.pos != buf.size()) throw model_error("trailing bytes in block file " + name);
    return block;
}

void write_manifest(const ModelManifest& m, const std::filesystem::path& model_dir) {
    nlohmann::ordered_json j;
    j["run_id"] = m.run_id;
    j["L"] = m.n_labels;
    j["D"] = m.dim;
    j["batch_size"] = m.batch_size;
    j["B"] = m.n_batches;
    j["delta"] = m.delta;
    j["C"] = m.C;
    j["eps"] = m.eps;
    j["normalize"] = m.normalize;
    j["bias"] = m.bias;
    j["format_version"] = m.format_version;
    j["total_nnz"] = m.total_nnz;
    auto blocks = nlohmann::ordered_json::array();
    for (const auto& b : m.blocks) {
        blocks.push_back({{"id", b.id},
                          {"status", b.status},
                          {"worker", b.worker},
                          {"digest", b.digest}});
    }
    j["blocks"] = std::move(blocks);
    std::filesystem::create_directories(model_dir);
    atomic_write(manifest_path(model_dir), j.dump(2) + "\n");
}

ModelManifest read_manifest(const std::filesystem::path& model_dir) {
    std::ifstream in(manifest_path(model_dir));
    if (!in) throw model_error("no manifest at " + manifest_path(model_dir).string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw model_error("malformed manifest: " + std::string(e.what()));
    }
    ModelManifest m;
    try {
        m.run_id = j.at("run_id");
        m.n_labels = j.at("L");
        m.dim = j.at("D");
        m.batch_size = j.at("batch_size");
        m.n_batches = j.at("B");
        m.delta = j.at("delta");
        m.C = j.at("C");
        m.eps = j.value("eps", 0.01);
        m.normalize = j.value("normalize", true);
        m.bias = j.value("bias", false);
        m.format_version = j.value("format_version", kBlockFormatVersion);
        m.total_nnz = j.value("total_nnz", std::uint64_t{0});
        for (const auto& b : j.at("blocks")) {
            BlockEntry e;
            e.id = b.at("id");
            e.status = b.at("status");
            e.worker = b.value("worker", "");
            e.digest = b.value("digest", "");
            m.blocks.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& e) {
        throw model_error("manifest missing field: " + std::string(e.what()));
    }
    return m;
}

std::vector<std::uint32_t> missing_blocks(const ModelManifest& m,
                                          const std::filesystem::path& model_dir) {
    std::vector<std::uint32_t> missing;
    for (std::uint32_t b = 0; b < m.n_batches; ++b)
        if (!std::filesystem::exists(block_path(model_dir, b))) missing.push_back(b);
    return missing;
}

ModelStats model_stats(const std::filesystem::path& model_dir, std::vector<double> bin_edges) {
    auto m = read_manifest(model_dir);
    auto missing = missing_blocks(m, model_dir);
    if (!missing.empty()) {
        std::string ids;
        for (auto b : missing) ids += (ids.empty() ? "" : ",") + std::to_string(b);
        throw model_error("incomplete model: missing blocks " + ids);
    }

    if (bin_edges.empty())
        bin_edges = {-std::numeric_limits<double>::infinity(), -1.0, -0.1, -0.01,
                     0.01, 0.1, 1.0, std::numeric_limits<double>::infinity()};
    if (!std::is_sorted(bin_edges.begin(), bin_edges.end()))
        throw std::invalid_argument("model_stats: bin edges must be increasing");

    ModelStats stats;
    stats.histogram.reserve(bin_edges.size() - 1);
    for (std::size_t i = 0; i + 1 < bin_edges.size(); ++i)
        stats.histogram.push_back({bin_edges[i], bin_edges[i + 1], 0});

    std::uint64_t small = 0;
    for (std::uint32_t b = 0; b < m.n_batches; ++b) {
        auto path = block_path(model_dir, b);
        auto block = read_block(path);
        stats.per_block_nnz.push_back(block.nnz());
        stats.total_nnz += block.nnz();
        stats.total_bytes += std::filesystem::file_size(path);
        for (const auto& w : block.weights) {
            for (double v : w.values) {
                if (std::fabs(v) < 0.01) ++small;
                auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), v);
                if (it != bin_edges.begin() && it != bin_edges.end()) {
                    std::size_t bin = static_cast<std::size_t>(it - bin_edges.begin()) - 1;
                    ++stats.histogram[bin].count;
                }
            }
        }
    }
    stats.small_weight_fraction =
        stats.total_nnz == 0 ? 0.0 : static_cast<double>(small) / static_cast<double>(stats.total_nnz);
    return stats;
}

}  // namespace dismec
