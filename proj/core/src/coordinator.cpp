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

#include <fcntl.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

#include "dismec/digest.hpp"
#include "dismec/io.hpp"
#include "dismec/train.hpp"

namespace dismec {

namespace {

namespace fs = std::filesystem;

std::string worker_id() {
    char host[256] = {0};
    if (gethostname(host, sizeof host - 1) != 0) std::snprintf(host, sizeof host, "unknown");
    return std::string(host) + ":" + std::to_string(::getpid());
}

fs::path claim_path(const fs::path& model_dir, std::uint32_t b) {
    return model_dir / "claims" / ("batch_" + std::to_string(b) + ".claim");
}

// Exclusive-create claim; exactly one cooperating process can win a batch.
bool try_claim(const fs::path& model_dir, std::uint32_t b, const std::string& worker) {
    auto path = claim_path(model_dir, b);
    int fd = ::open(path.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        if (errno == EEXIST) return false;
        throw model_error("cannot create claim file " + path.string() + ": " +
                          std::strerror(errno));
    }
    auto now = std::chrono::system_clock::now().time_since_epoch();
    std::string content =
        worker + "\n" +
        std::to_string(std::chrono::duration_cast<std::chrono::seconds>(now).count()) + "\n";
    ssize_t written = ::write(fd, content.data(), content.size());
    ::close(fd);
    if (written != static_cast<ssize_t>(content.size()))
        throw model_error("short write to claim file " + path.string());
    return true;
}

// A claim with no block whose file hasn't been touched within the timeout is
// presumed orphaned by a dead worker. Renaming it aside frees the claim path;
// only one process can win the rename.
bool retire_stale_claim(const fs::path& model_dir, std::uint32_t b,
                        std::chrono::seconds timeout) {
    auto path = claim_path(model_dir, b);
    std::error_code ec;
    auto mtime = fs::last_write_time(path, ec);
    if (ec) return false;  // already gone
    auto age = fs::file_time_type::clock::now() - mtime;
    if (age < timeout) return false;

    static std::atomic<unsigned> seq{0};
    auto aside = path;
    aside += ".stale." + std::to_string(::getpid()) + "." + std::to_string(seq.fetch_add(1));
    std::error_code rename_ec;
    fs::rename(path, aside, rename_ec);
    return !rename_ec;
}

std::string claim_owner(const fs::path& model_dir, std::uint32_t b) {
    std::ifstream in(claim_path(model_dir, b));
    std::string owner;
    if (in) std::getline(in, owner);
    return owner;
}

std::string derive_run_id(index_t L, index_t D, const TrainConfig& cfg) {
    std::ostringstream os;
    os << L << "|" << D << "|" << cfg.batch_size << "|" << cfg.C << "|" << cfg.delta << "|"
       << cfg.solver.eps << "|" << cfg.normalize << "|" << cfg.bias;
    return sha256_hex(os.str()).substr(0, 12);
}

ModelManifest bootstrap_manifest(index_t L, index_t D, const TrainConfig& cfg) {
    ModelManifest m;
    m.run_id = derive_run_id(L, D, cfg);
    m.n_labels = L;
    m.dim = D;
    m.batch_size = cfg.batch_size;
    m.n_batches = batch_count(L, cfg.batch_size);
    m.C = cfg.C;
    m.delta = cfg.delta;
    m.eps = cfg.solver.eps;
    m.normalize = cfg.normalize;
    m.bias = cfg.bias;
    m.blocks.resize(m.n_batches);
    for (std::uint32_t b = 0; b < m.n_batches; ++b) m.blocks[b] = {b, "pending", "", ""};
    return m;
}

void check_manifest_matches(const ModelManifest& existing, const ModelManifest& fresh,
                            const fs::path& model_dir) {
    auto mismatch = [&](const std::string& what) {
        throw model_error("model dir " + model_dir.string() + " holds a run with different " +
                          what + "; refusing to mix runs");
    };
    if (existing.n_labels != fresh.n_labels || existing.dim != fresh.dim) mismatch("dimensions");
    if (existing.batch_size != fresh.batch_size || existing.n_batches != fresh.n_batches)
        mismatch("batching");
    if (existing.C != fresh.C || existing.delta != fresh.delta || existing.eps != fresh.eps)
        mismatch("hyperparameters");
    if (existing.normalize != fresh.normalize || existing.bias != fresh.bias)
        mismatch("preprocessing flags");
}

}  // namespace

ModelManifest run_training(const Dataset& data, const TrainConfig& cfg, const fs::path& model_dir,
                           const TrainProgress& progress) {
    cfg.validate();
    data.validate();

    const index_t L = data.labels.labels();
    const index_t D = data.features.cols();
    const std::uint32_t B = batch_count(L, cfg.batch_size);
    const std::string worker = worker_id();

    fs::create_directories(model_dir / "claims");
    fs::create_directories(model_dir / "blocks");

    ModelManifest manifest = bootstrap_manifest(L, D, cfg);
    if (fs::exists(manifest_path(model_dir)))
        check_manifest_matches(read_manifest(model_dir), manifest, model_dir);
    else
        write_manifest(manifest, model_dir);

    // Preprocess once; the single matrix is shared read-only by all label
    // trainings below.
    const CsrMatrix* X = &data.features;
    CsrMatrix transformed;
    if (cfg.normalize || cfg.bias) {
        transformed = cfg.normalize ? row_normalize(data.features) : data.features;
        if (cfg.bias) transformed = append_bias_column(transformed);
        X = &transformed;
    }
    LabelIndex index(data.labels);

    // Start the scan at a worker-dependent offset so cooperating processes
    // don't all fight over batch 0.
    const std::uint32_t start = B == 0 ? 0 : static_cast<std::uint32_t>(::getpid()) % B;

    for (;;) {
        bool did_work = false;
        bool all_present = true;
        for (std::uint32_t k = 0; k < B; ++k) {
            std::uint32_t b = (start + k) % B;
            if (fs::exists(block_path(model_dir, b))) continue;
            all_present = false;

            bool claimed = try_claim(model_dir, b, worker);
            if (!claimed && retire_stale_claim(model_dir, b, cfg.stale_claim_timeout) &&
                !fs::exists(block_path(model_dir, b)))
                claimed = try_claim(model_dir, b, worker);
            if (!claimed) continue;

            if (progress) progress(b, "claimed");
            WeightBlock block = train_batch(*X, index, b, cfg);
            write_block(block, model_dir);
            if (progress) progress(b, "trained");
            did_work = true;
        }
        if (all_present) break;
        if (!did_work) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }

    // All block files exist; record digests and owners. Every cooperating
    // process finalizes to the same bytes, so concurrent rewrites are benign.
    manifest.total_nnz = 0;
    for (std::uint32_t b = 0; b < B; ++b) {
        auto path = block_path(model_dir, b);
        manifest.blocks[b].status = "done";
        manifest.blocks[b].worker = claim_owner(model_dir, b);
        manifest.blocks[b].digest = sha256_file(path);
        manifest.total_nnz += read_block(path).nnz();
    }
    write_manifest(manifest, model_dir);
    return manifest;
}

}  // namespace dismec
