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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dismec/io.hpp"
#include "dismec/metrics.hpp"
#include "dismec/model.hpp"
#include "dismec/predict.hpp"
#include "dismec/synthetic.hpp"
#include "dismec/train.hpp"

namespace fs = std::filesystem;
using namespace dismec;

namespace {

struct TrainFlags {
    std::string data;
    std::string out;
    double c = 1.0;
    double delta = 0.01;
    index_t batch_size = 1000;
    unsigned threads = 0;
    bool no_normalize = false;
    bool bias = false;
    double eps = 0.01;
    bool resume = false;
    bool validate = false;
    long stale_timeout_sec = 30 * 60;
};

TrainConfig make_train_config(const TrainFlags& f, double c) {
    TrainConfig cfg;
    cfg.C = c;
    cfg.delta = f.delta;
    cfg.batch_size = f.batch_size;
    cfg.workers_per_batch = f.threads;
    cfg.solver.C = c;
    cfg.solver.eps = f.eps;
    cfg.normalize = !f.no_normalize;
    cfg.bias = f.bias;
    cfg.stale_claim_timeout = std::chrono::seconds(f.stale_timeout_sec);
    return cfg;
}

// Splits off every 10th row as a validation set.
void split_for_validation(const Dataset& data, Dataset& train, Dataset& val) {
    CsrBuilder train_feats(data.features.cols()), val_feats(data.features.cols());
    std::vector<std::size_t> train_off{0}, val_off{0};
    std::vector<index_t> train_lab, val_lab;
    for (index_t i = 0; i < data.rows(); ++i) {
        SparseVector row;
        auto idx = data.features.row_indices(i);
        auto values = data.features.row_values(i);
        row.indices.assign(idx.begin(), idx.end());
        row.values.assign(values.begin(), values.end());
        auto labels = data.labels.row(i);
        if (i % 10 == 9) {
            val_feats.add_row(row);
            val_lab.insert(val_lab.end(), labels.begin(), labels.end());
            val_off.push_back(val_lab.size());
        } else {
            train_feats.add_row(row);
            train_lab.insert(train_lab.end(), labels.begin(), labels.end());
            train_off.push_back(train_lab.size());
        }
    }
    train = {train_feats.finish(),
             LabelMatrix(data.labels.labels(), std::move(train_off), std::move(train_lab))};
    val = {val_feats.finish(),
           LabelMatrix(data.labels.labels(), std::move(val_off), std::move(val_lab))};
}

// In-memory training pass (no model directory) returning P@1 on `val`.
double validation_p_at_1(const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
    const CsrMatrix* X = &train.features;
    CsrMatrix transformed;
    if (cfg.normalize || cfg.bias) {
        transformed = cfg.normalize ? row_normalize(train.features) : train.features;
        if (cfg.bias) transformed = append_bias_column(transformed);
        X = &transformed;
    }
    LabelIndex index(train.labels);

    Model model;
    model.manifest.n_labels = train.labels.labels();
    model.manifest.dim = train.features.cols();
    model.manifest.batch_size = cfg.batch_size;
    model.manifest.n_batches = batch_count(train.labels.labels(), cfg.batch_size);
    model.manifest.normalize = cfg.normalize;
    model.manifest.bias = cfg.bias;
    for (std::uint32_t b = 0; b < model.manifest.n_batches; ++b)
        model.blocks.push_back(train_batch(*X, index, b, cfg));

    auto preds = predict_all(val, model, 1);
    std::size_t hits = 0, counted = 0;
    for (index_t i = 0; i < val.rows(); ++i) {
        auto gold = val.labels.row(i);
        if (gold.empty()) continue;
        ++counted;
        if (!preds[i].empty() &&
            std::binary_search(gold.begin(), gold.end(), preds[i].front().label))
            ++hits;
    }
    return counted == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(counted);
}

int cmd_train(const TrainFlags& f) {
    Dataset data = load_xmc(f.data);
    std::cerr << "loaded " << data.rows() << " rows, " << data.features.cols() << " features, "
              << data.labels.labels() << " labels, nnz " << data.features.nnz() << "\n";

    // Joining an existing run (same config, shared directory) is the normal
    // multi-process mode; --resume only documents the intent. A directory
    // holding a run with different settings is refused downstream.
    fs::path out(f.out);

    double c = f.c;
    if (f.validate) {
        Dataset tr, val;
        split_for_validation(data, tr, val);
        double best_p1 = -1.0;
        for (double cand : {0.1, 1.0, 10.0}) {
            TrainConfig vcfg = make_train_config(f, cand);
            double p1 = validation_p_at_1(tr, val, vcfg);
            std::cerr << "validation C=" << cand << " P@1=" << p1 << "\n";
            if (p1 > best_p1) {
                best_p1 = p1;
                c = cand;
            }
        }
        std::cerr << "selected C=" << c << "\n";
    }

    TrainConfig cfg = make_train_config(f, c);
    auto started = std::chrono::steady_clock::now();
    ModelManifest manifest =
        run_training(data, cfg, out, [](std::uint32_t b, const std::string& event) {
            std::cerr << "batch " << b << " " << event << "\n";
        });
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    std::cerr << "model complete: " << manifest.n_batches << " blocks, total nnz "
              << manifest.total_nnz << ", " << secs << "s\n";
    return 0;
}

int cmd_predict(const std::string& model_dir, const std::string& data_path, std::size_t topk,
                const std::string& out_path, unsigned threads) {
    Model model = load_model(model_dir);
    Dataset test = load_xmc(data_path);
    auto report = predict_file(test, model, topk, out_path, std::nullopt, threads);
    if (report.out_of_range_features > 0)
        std::cerr << "warning: dropped " << report.out_of_range_features
                  << " feature occurrences at ids past the model dimensionality\n";
    std::fprintf(stderr,
                 "{\"instances\":%zu,\"latency_mean_ms\":%.4f,\"latency_p99_ms\":%.4f}\n",
                 report.latency.instances, report.latency.mean_ms, report.latency.p99_ms);
    return 0;
}

int cmd_evaluate(const std::string& gold, const std::string& preds, const std::string& k_list,
                 bool json) {
    std::vector<std::size_t> ks;
    std::stringstream ss(k_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        long v = std::stol(tok);
        if (v < 1) throw std::invalid_argument("--k entries must be >= 1");
        ks.push_back(static_cast<std::size_t>(v));
    }
    if (ks.empty()) throw std::invalid_argument("--k produced an empty list");

    MetricReport report = evaluate_files(gold, preds, ks);
    if (json)
        print_report_json(report, std::cout);
    else
        print_report(report, std::cout);
    return 0;
}

// Re-prunes every block of a delta=0 base model at the given threshold.
Model reprune_model(const Model& base, double delta) {
    Model out;
    out.manifest = base.manifest;
    out.manifest.delta = delta;
    out.blocks.reserve(base.blocks.size());
    std::uint64_t nnz = 0;
    for (const auto& block : base.blocks) {
        WeightBlock pruned = block;
        for (auto& w : pruned.weights) {
            SparseVector kept;
            for (std::size_t i = 0; i < w.nnz(); ++i) {
                if (std::fabs(w.values[i]) >= delta) {
                    kept.indices.push_back(w.indices[i]);
                    kept.values.push_back(w.values[i]);
                }
            }
            w = std::move(kept);
        }
        nnz += pruned.nnz();
        out.blocks.push_back(std::move(pruned));
    }
    out.manifest.total_nnz = nnz;
    return out;
}

int cmd_sweep_delta(const std::string& model_dir, const std::string& data_path,
                    const std::string& gold_path, const std::string& delta_list,
                    unsigned threads) {
    std::vector<double> deltas;
    std::stringstream ss(delta_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        double d = std::stod(tok);
        if (d < 0) throw std::invalid_argument("--deltas entries must be >= 0");
        deltas.push_back(d);
    }
    if (deltas.empty()) throw std::invalid_argument("--deltas produced an empty list");
    std::sort(deltas.begin(), deltas.end());
    deltas.erase(std::unique(deltas.begin(), deltas.end()), deltas.end());

    Model base = load_model(model_dir);
    if (base.manifest.delta != 0.0)
        throw model_error("sweep requires a delta=0 base model; this one was pruned at delta=" +
                          std::to_string(base.manifest.delta));

    Dataset test = load_xmc(data_path);
    Dataset gold_data = load_xmc(gold_path);
    std::vector<std::vector<index_t>> gold(gold_data.rows());
    for (index_t i = 0; i < gold_data.rows(); ++i) {
        auto row = gold_data.labels.row(i);
        gold[i].assign(row.begin(), row.end());
    }
    const std::vector<std::size_t> ks{1, 3, 5};

    std::printf("%-10s %-14s %-10s %-10s %-10s %-12s\n", "delta", "bytes", "P@1", "P@3", "P@5",
                "nnz");
    for (double d : deltas) {
        Model pruned = reprune_model(base, d);
        std::uint64_t bytes = 0;
        for (const auto& b : pruned.blocks) bytes += b.byte_size();

        auto preds = predict_all(test, pruned, 5, nullptr, std::nullopt, threads);
        std::vector<std::vector<index_t>> ranked(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i)
            for (const auto& sl : preds[i]) ranked[i].push_back(sl.label);
        MetricReport report = evaluate(gold, ranked, ks);

        std::printf("%-10g %-14llu %-10.4f %-10.4f %-10.4f %-12llu\n", d,
                    static_cast<unsigned long long>(bytes), report.rows[0].p_at_k,
                    report.rows[1].p_at_k, report.rows[2].p_at_k,
                    static_cast<unsigned long long>(pruned.manifest.total_nnz));
    }
    return 0;
}

int cmd_gen(index_t labels, index_t features, std::size_t head_size, double beta,
            const std::string& out_prefix, std::uint64_t seed, index_t prototype_nnz,
            index_t noise_nnz) {
    PowerLawSpec spec;
    spec.n_labels = labels;
    spec.n_features = features;
    spec.head_size = head_size;
    spec.beta = beta;
    spec.seed = seed;
    spec.prototype_nnz = prototype_nnz;
    spec.noise_nnz = noise_nnz;

    Dataset full = generate_powerlaw(spec);

    // Deterministic 80/20 split.
    CsrBuilder train_feats(features), test_feats(features);
    std::vector<std::size_t> train_off{0}, test_off{0};
    std::vector<index_t> train_lab, test_lab;
    for (index_t i = 0; i < full.rows(); ++i) {
        SparseVector row;
        auto idx = full.features.row_indices(i);
        auto values = full.features.row_values(i);
        row.indices.assign(idx.begin(), idx.end());
        row.values.assign(values.begin(), values.end());
        auto labs = full.labels.row(i);
        if (i % 5 == 4) {
            test_feats.add_row(row);
            test_lab.insert(test_lab.end(), labs.begin(), labs.end());
            test_off.push_back(test_lab.size());
        } else {
            train_feats.add_row(row);
            train_lab.insert(train_lab.end(), labs.begin(), labs.end());
            train_off.push_back(train_lab.size());
        }
    }
    Dataset train{train_feats.finish(),
                  LabelMatrix(labels, std::move(train_off), std::move(train_lab))};
    Dataset test{test_feats.finish(),
                 LabelMatrix(labels, std::move(test_off), std::move(test_lab))};

    save_xmc(train, out_prefix + ".train.txt");
    save_xmc(test, out_prefix + ".test.txt");
    std::cerr << "generated " << full.rows() << " instances (" << train.rows() << " train, "
              << test.rows() << " test), " << labels << " labels, " << features << " features\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"One-vs-rest linear classification for extreme multi-label problems"};
    app.require_subcommand(1);

    TrainFlags tf;
    auto* train = app.add_subcommand("train", "Train a model into a shared model directory");
    train->add_option("--data", tf.data, "Training file (header 'N D L')")->required();
    train->add_option("--out", tf.out, "Model output directory")->required();
    train->add_option("--c", tf.c, "Loss/regularizer trade-off")->capture_default_str();
    train->add_option("--delta", tf.delta, "Pruning threshold")->capture_default_str();
    train->add_option("--batch-size", tf.batch_size, "Labels per block")->capture_default_str();
    train->add_option("--threads", tf.threads, "Parallel label trainers (0 = all cores)")
        ->envname("DISMEC_THREADS");
    train->add_flag("--no-normalize", tf.no_normalize, "Skip unit-norm row scaling");
    train->add_flag("--bias", tf.bias, "Append a constant bias feature");
    train->add_option("--eps", tf.eps, "Relative gradient-norm stopping tolerance")
        ->capture_default_str();
    train->add_flag("--resume", tf.resume, "Continue an unfinished run in --out");
    train->add_flag("--validate", tf.validate, "Pick C on a held-out 10% split");
    train->add_option("--stale-timeout", tf.stale_timeout_sec,
                      "Seconds before an unfinished claim is presumed dead")
        ->capture_default_str();

    std::string p_model, p_data, p_out;
    std::size_t p_topk = 5;
    unsigned p_threads = 0;
    auto* predict = app.add_subcommand("predict", "Rank top-k labels for every test instance");
    predict->add_option("--model", p_model, "Model directory")->required();
    predict->add_option("--data", p_data, "Test file")->required();
    predict->add_option("--topk", p_topk, "Labels per instance")->check(CLI::PositiveNumber);
    predict->add_option("--out", p_out, "Predictions output file")->required();
    predict->add_option("--threads", p_threads, "Parallel scoring threads (0 = all cores)")
        ->envname("DISMEC_THREADS");

    std::string e_gold, e_preds, e_ks = "1,3,5";
    bool e_json = false;
    auto* evaluate = app.add_subcommand("evaluate", "Compute P@k and nDCG@k against gold labels");
    evaluate->add_option("--gold", e_gold, "Gold dataset file")->required();
    evaluate->add_option("--preds", e_preds, "Predictions file")->required();
    evaluate->add_option("--k", e_ks, "Comma-separated k values")->capture_default_str();
    evaluate->add_flag("--json", e_json, "Machine-readable output");

    std::string s_model, s_data, s_gold, s_deltas = "0,0.001,0.01,0.1";
    unsigned s_threads = 0;
    auto* sweep = app.add_subcommand(
        "sweep-delta", "Re-prune a delta=0 model at several thresholds and tabulate size vs P@k");
    sweep->add_option("--model", s_model, "delta=0 model directory")->required();
    sweep->add_option("--data", s_data, "Test file")->required();
    sweep->add_option("--gold", s_gold, "Gold dataset file")->required();
    sweep->add_option("--deltas", s_deltas, "Comma-separated thresholds")->capture_default_str();
    sweep->add_option("--threads", s_threads, "Parallel scoring threads")
        ->envname("DISMEC_THREADS");

    index_t g_labels = 0, g_features = 0, g_proto_nnz = 16, g_noise_nnz = 4;
    std::size_t g_head = 0;
    double g_beta = 1.0;
    std::string g_prefix;
    std::uint64_t g_seed = 0;
    auto* gen = app.add_subcommand("gen", "Generate a power-law synthetic dataset (80/20 split)");
    gen->add_option("--labels", g_labels, "Label count")->required();
    gen->add_option("--features", g_features, "Feature dimensionality")->required();
    gen->add_option("--head-size", g_head, "Positives of the rank-1 label")->required();
    gen->add_option("--beta", g_beta, "Power-law exponent")->capture_default_str();
    gen->add_option("--out-prefix", g_prefix, "Writes <prefix>.train.txt and <prefix>.test.txt")
        ->required();
    gen->add_option("--seed", g_seed, "RNG seed")->capture_default_str();
    gen->add_option("--prototype-nnz", g_proto_nnz, "Features per label prototype")
        ->capture_default_str();
    gen->add_option("--noise-nnz", g_noise_nnz, "Noise features per instance")
        ->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return cmd_train(tf);
        if (predict->parsed()) return cmd_predict(p_model, p_data, p_topk, p_out, p_threads);
        if (evaluate->parsed()) return cmd_evaluate(e_gold, e_preds, e_ks, e_json);
        if (sweep->parsed()) return cmd_sweep_delta(s_model, s_data, s_gold, s_deltas, s_threads);
        if (gen->parsed())
            return cmd_gen(g_labels, g_features, g_head, g_beta, g_prefix, g_seed, g_proto_nnz,
                           g_noise_nnz);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
