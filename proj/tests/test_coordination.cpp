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

#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "dismec/digest.hpp"
#include "dismec/io.hpp"
#include "dismec/synthetic.hpp"
#include "dismec/train.hpp"
#include "doctest.h"

using namespace dismec;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static std::atomic<unsigned> seq{0};
        path = fs::temp_directory_path() /
               ("dismec_coord_" + std::to_string(::getpid()) + "_" +
                std::to_string(seq.fetch_add(1)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

Dataset small_dataset() {
    PowerLawSpec spec;
    spec.n_labels = 25;
    spec.head_size = 15;
    spec.beta = 1.0;
    spec.n_features = 40;
    spec.prototype_nnz = 4;
    spec.noise_nnz = 2;
    spec.seed = 71;
    return generate_powerlaw(spec);
}

TrainConfig small_config() {
    TrainConfig cfg;
    cfg.batch_size = 10;  // B = 3
    cfg.delta = 0.0;
    cfg.workers_per_batch = 2;
    return cfg;
}

std::map<std::uint32_t, std::string> block_digests(const fs::path& dir, std::uint32_t B) {
    std::map<std::uint32_t, std::string> out;
    for (std::uint32_t b = 0; b < B; ++b) out[b] = sha256_file(block_path(dir, b));
    return out;
}

// Launches `dismec train` against a shared model directory; used for the
// multi-process cooperation checks. Returns the child pid.
pid_t spawn_train(const std::string& cli, const fs::path& data, const fs::path& out,
                  const std::vector<std::string>& extra = {}) {
    pid_t pid = fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        std::vector<std::string> args{cli,          "train",      "--data", data.string(),
                                      "--out",      out.string(), "--c",    "1.0",
                                      "--delta",    "0",          "--batch-size", "10",
                                      "--threads",  "2"};
        for (const auto& e : extra) args.push_back(e);
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        argv.push_back(nullptr);
        // Quiet the children; their stderr is progress chatter.
        if (!freopen("/dev/null", "w", stderr)) _exit(90);
        execv(cli.c_str(), argv.data());
        _exit(91);
    }
    return pid;
}

int wait_for(pid_t pid) {
    int status = 0;
    REQUIRE(waitpid(pid, &status, 0) == pid);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -WTERMSIG(status);
}

}  // namespace

TEST_CASE("run_training completes a fresh run and records digests") {
    TempDir dir;
    auto data = small_dataset();
    auto cfg = small_config();

    auto manifest = run_training(data, cfg, dir.path);
    CHECK(manifest.n_batches == 3);
    REQUIRE(manifest.blocks.size() == 3);
    for (const auto& b : manifest.blocks) {
        CHECK(b.status == "done");
        CHECK(!b.digest.empty());
        CHECK(!b.worker.empty());
    }
    for (std::uint32_t b = 0; b < 3; ++b) {
        CHECK(fs::exists(block_path(dir.path, b)));
        CHECK(sha256_file(block_path(dir.path, b)) == manifest.blocks[b].digest);
    }
    CHECK(manifest.total_nnz > 0);

    SUBCASE("rerun is a no-op with identical results") {
        auto before = block_digests(dir.path, 3);
        auto again = run_training(data, cfg, dir.path);
        CHECK(block_digests(dir.path, 3) == before);
        for (std::uint32_t b = 0; b < 3; ++b) CHECK(again.blocks[b].digest == before[b]);
    }

    SUBCASE("changing hyperparameters against the same dir is refused") {
        auto other = cfg;
        other.C = 2.0;
        CHECK_THROWS_AS(run_training(data, other, dir.path), model_error);
        other = cfg;
        other.delta = 0.01;
        CHECK_THROWS_AS(run_training(data, other, dir.path), model_error);
        other = cfg;
        other.batch_size = 5;
        CHECK_THROWS_AS(run_training(data, other, dir.path), model_error);
    }
}

TEST_CASE("model bytes are invariant to thread count") {
    auto data = small_dataset();
    std::map<std::uint32_t, std::string> reference;
    for (unsigned workers : {1u, 2u, 8u}) {
        TempDir dir;
        auto cfg = small_config();
        cfg.workers_per_batch = workers;
        run_training(data, cfg, dir.path);
        auto digests = block_digests(dir.path, 3);
        if (reference.empty())
            reference = digests;
        else
            CHECK(digests == reference);
    }
}

TEST_CASE("stale claims are reclaimed after the timeout") {
    TempDir dir;
    auto data = small_dataset();
    auto cfg = small_config();
    cfg.stale_claim_timeout = std::chrono::seconds(1);

    // Fake a dead worker's leftover claim on batch 1.
    fs::create_directories(dir.path / "claims");
    {
        std::ofstream claim(dir.path / "claims" / "batch_1.claim");
        claim << "ghost:9999\n0\n";
    }
    fs::last_write_time(dir.path / "claims" / "batch_1.claim",
                        fs::file_time_type::clock::now() - std::chrono::seconds(120));

    auto manifest = run_training(data, cfg, dir.path);
    CHECK(manifest.blocks[1].status == "done");
    CHECK(fs::exists(block_path(dir.path, 1)));
    // The ghost's claim was renamed aside, and the winner's claim replaced it.
    CHECK(manifest.blocks[1].worker != "ghost:9999");

    // Same bytes as an undisturbed run.
    TempDir clean;
    run_training(data, small_config(), clean.path);
    CHECK(block_digests(dir.path, 3) == block_digests(clean.path, 3));
}

TEST_CASE("fresh claims are respected while their block is pending" *
          doctest::timeout(60)) {
    TempDir dir;
    auto data = small_dataset();
    auto cfg = small_config();  // default 30-minute staleness

    // A live claim on batch 2 from "another worker": run_training must train
    // the other batches, then wait for the block. Deliver it from a thread.
    fs::create_directories(dir.path / "claims");
    {
        std::ofstream claim(dir.path / "claims" / "batch_2.claim");
        claim << "peer:1\n0\n";
    }
    LabelIndex index(data.labels);
    auto normalized = row_normalize(data.features);
    std::thread peer([&] {
        std::this_thread::sleep_for(std::chrono::milliseconds(400));
        auto block = train_batch(normalized, index, 2, cfg);
        write_block(block, dir.path);
    });
    auto manifest = run_training(data, cfg, dir.path);
    peer.join();
    CHECK(manifest.blocks[2].status == "done");
    CHECK(manifest.blocks[2].worker == "peer:1");
}

TEST_CASE("two processes cooperate through the claim files" * doctest::timeout(240)) {
    const char* cli = std::getenv("DISMEC_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "DISMEC_CLI must point at the dismec binary");

    TempDir dir;
    auto data = small_dataset();
    auto data_path = dir.path / "train.txt";
    save_xmc(data, data_path);

    auto model_a = dir.path / "model_race";
    pid_t p1 = spawn_train(cli, data_path, model_a);
    pid_t p2 = spawn_train(cli, data_path, model_a, {"--resume"});
    CHECK(wait_for(p1) == 0);
    CHECK(wait_for(p2) == 0);

    // Every batch trained exactly once: one claim per batch, none stale.
    std::size_t claims = 0, stale = 0;
    for (const auto& entry : fs::directory_iterator(model_a / "claims")) {
        auto name = entry.path().filename().string();
        if (name.find(".stale.") != std::string::npos)
            ++stale;
        else
            ++claims;
    }
    CHECK(claims == 3);
    CHECK(stale == 0);

    // And the result matches a single-process run byte for byte.
    auto model_b = dir.path / "model_single";
    pid_t p3 = spawn_train(cli, data_path, model_b);
    CHECK(wait_for(p3) == 0);
    CHECK(block_digests(model_a, 3) == block_digests(model_b, 3));
}
