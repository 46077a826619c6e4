/*
 * Copyright 2026 The subpool Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Pretraining, target adaptation, evaluation metrics and the edge
// permutation sweep.
//
// RNG streams per run seed: weight init, split shuffling and edge
// permutation each draw from their own stream, so a split can be varied
// without touching the initial weights.

#include "subpool/discrepancy.hpp"
#include "subpool/encoder.hpp"
#include "subpool/error.hpp"
#include "subpool/graphstore.hpp"
#include "subpool/numerics.hpp"
#include "subpool/pooling.hpp"
#include "subpool/sampler.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace subpool {

inline constexpr std::uint64_t kInitStream = 1;
inline constexpr std::uint64_t kSplitStream = 2;
inline constexpr std::uint64_t kPermuteStream = 3;

enum class EvalMetric { Accuracy, RocAuc };

inline std::string to_string(EvalMetric m) { return m == EvalMetric::Accuracy ? "accuracy" : "roc_auc"; }

inline EvalMetric parse_eval_metric(std::string_view s) {
    if (s == "accuracy") return EvalMetric::Accuracy;
    if (s == "roc_auc") return EvalMetric::RocAuc;
    throw ConfigError("unknown eval metric '" + std::string(s) + "'");
}

enum class TransferMode { None, LastLayer, Full };

inline std::string to_string(TransferMode m) {
    switch (m) {
    case TransferMode::None: return "none";
    case TransferMode::LastLayer: return "last";
    case TransferMode::Full: return "full";
    }
    return "?";
}

inline TransferMode parse_transfer_mode(std::string_view s) {
    if (s == "none") return TransferMode::None;
    if (s == "last" || s == "last_layer") return TransferMode::LastLayer;
    if (s == "full") return TransferMode::Full;
    throw ConfigError("unknown transfer mode '" + std::string(s) + "'");
}

// -----------------------------------------------------------------------------
// Metrics
// -----------------------------------------------------------------------------

/// Argmax match rate over `mask`; argmax ties go to the lowest class index.
inline double accuracy(const DenseMatrix& logits, std::span<const int> labels, std::span<const index_t> mask) {
    if (mask.empty()) throw DomainError("accuracy: empty mask");
    if (labels.size() != logits.rows()) throw ShapeError("accuracy: labels/logits row mismatch");
    index_t hits = 0;
    for (index_t i : mask) {
        auto r = logits.row(i);
        const auto pred = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
        if (pred == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(mask.size());
}

/// Mann-Whitney form: P(score_pos > score_neg) + ½P(tie), via average ranks.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels, std::span<const index_t> mask) {
    if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores/labels size mismatch");
    std::vector<std::pair<double, int>> items;
    items.reserve(mask.size());
    for (index_t i : mask) {
        if (labels[i] != 0 && labels[i] != 1) throw DomainError("roc_auc: labels must be binary");
        items.emplace_back(scores[i], labels[i]);
    }
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double pos = 0.0, neg = 0.0, pos_rank_sum = 0.0;
    for (index_t i = 0; i < items.size();) {
        index_t j = i;
        while (j < items.size() && items[j].first == items[i].first) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j); // ranks i+1..j
        for (index_t t = i; t < j; ++t) {
            if (items[t].second == 1) {
                pos += 1.0;
                pos_rank_sum += avg_rank;
            } else {
                neg += 1.0;
            }
        }
        i = j;
    }
    if (pos == 0.0 || neg == 0.0) throw DomainError("roc_auc: mask must contain both classes");
    return (pos_rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

/// Binary score for ROC-AUC: logit margin of class 1 over class 0.
inline std::vector<double> binary_scores(const DenseMatrix& logits) {
    if (logits.cols() != 2) throw DomainError("roc_auc: needs exactly two classes");
    std::vector<double> s(logits.rows());
    for (index_t i = 0; i < logits.rows(); ++i) s[i] = logits(i, 1) - logits(i, 0);
    return s;
}

inline double evaluate_metric(const DenseMatrix& logits, std::span<const int> labels, std::span<const index_t> mask,
                              EvalMetric metric) {
    if (metric == EvalMetric::Accuracy) return accuracy(logits, labels, mask);
    return roc_auc(binary_scores(logits), labels, mask);
}

// -----------------------------------------------------------------------------
// Configuration
// -----------------------------------------------------------------------------

struct TrainConfig {
    index_t epochs = 200;
    double lr = 1e-3;
    double weight_decay = 0.0;
    index_t patience = 200; // 0 disables early stopping
    std::uint64_t seed = 0;
    EvalMetric metric = EvalMetric::Accuracy;
    index_t cmd_track_interval = 0; // 0 = off
    double train_fraction = 0.6;
    double valid_fraction = 0.4;

    static TrainConfig pretrain_defaults() { return {}; }

    static TrainConfig finetune_defaults() {
        TrainConfig c;
        c.epochs = 3000;
        c.weight_decay = 1e-5;
        c.train_fraction = 0.1;
        c.valid_fraction = 0.1;
        return c;
    }

    void validate() const {
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: lr must be positive");
        if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
        if (!(train_fraction > 0.0) || !(valid_fraction >= 0.0) || train_fraction + valid_fraction > 1.0 + 1e-12)
            throw ConfigError("train: split fractions must be positive and sum to <= 1");
    }

    nlohmann::json to_json() const {
        return {{"epochs", epochs},
                {"lr", lr},
                {"weight_decay", weight_decay},
                {"early_stop_patience", patience},
                {"seed", seed},
                {"eval_metric", to_string(metric)},
                {"cmd_track_interval", cmd_track_interval},
                {"train_fraction", train_fraction},
                {"valid_fraction", valid_fraction}};
    }

    static TrainConfig from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

    static TrainConfig from_json(const nlohmann::json& j, TrainConfig base) {
        try {
            if (j.contains("epochs")) base.epochs = j.at("epochs").get<index_t>();
            if (j.contains("lr")) base.lr = j.at("lr").get<double>();
            if (j.contains("weight_decay")) base.weight_decay = j.at("weight_decay").get<double>();
            if (j.contains("early_stop_patience")) base.patience = j.at("early_stop_patience").get<index_t>();
            if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
            if (j.contains("eval_metric")) base.metric = parse_eval_metric(j.at("eval_metric").get<std::string>());
            if (j.contains("cmd_track_interval")) base.cmd_track_interval = j.at("cmd_track_interval").get<index_t>();
            if (j.contains("train_fraction")) base.train_fraction = j.at("train_fraction").get<double>();
            if (j.contains("valid_fraction")) base.valid_fraction = j.at("valid_fraction").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("train config: ") + e.what());
        }
        base.validate();
        return base;
    }
};

/// Pooling mode plus the sampler that builds its structure.
struct PoolingConfig {
    PoolingMode mode = PoolingMode::None;
    SamplerConfig sampler;

    static PoolingConfig vanilla() { return {}; }
    static PoolingConfig of(PoolingMode mode, index_t k, index_t repeats = 1, std::uint64_t seed = 0) {
        return {mode, sampler_for(mode, k, repeats, seed)};
    }

    PoolingLayer build(const Graph& g) const { return PoolingLayer::build(g, mode, sampler); }

    nlohmann::json to_json() const { return {{"mode", to_string(mode)}, {"sampler", sampler.to_json()}}; }

    static PoolingConfig from_json(const nlohmann::json& j) { return from_json(j, PoolingConfig{}); }

    static PoolingConfig from_json(const nlohmann::json& j, PoolingConfig base) {
        try {
            if (j.contains("mode")) {
                const auto mode = parse_pooling_mode(j.at("mode").get<std::string>());
                if (mode != base.mode) base = of(mode, base.sampler.k, base.sampler.repeats, base.sampler.seed);
            }
            if (j.contains("sampler")) base.sampler = SamplerConfig::from_json(j.at("sampler"), base.sampler);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("pooling config: ") + e.what());
        }
        base.sampler.validate();
        return base;
    }
};

// -----------------------------------------------------------------------------
// Run report
// -----------------------------------------------------------------------------

struct EpochRecord {
    index_t epoch = 0;
    double train_loss = 0.0;
    double train_metric = 0.0;
    double valid_metric = std::numeric_limits<double>::quiet_NaN();
    double valid_loss = std::numeric_limits<double>::quiet_NaN();
};

/// CMD between source and target pooled embeddings (`cmd`) and between the
/// pre-pooling node embeddings (`cmd_node`).
struct CmdRecord {
    index_t epoch = 0;
    double cmd = 0.0;
    double cmd_node = 0.0;
};

struct RunReport {
    std::string phase;
    nlohmann::json config;
    std::vector<EpochRecord> epochs;
    std::vector<CmdRecord> cmd_history;
    index_t best_epoch = 0;
    double best_valid_metric = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> test_metric;
    index_t gradient_evaluations = 0;
    double wall_time_seconds = 0.0;

    std::vector<double> losses() const {
        std::vector<double> out;
        for (const auto& e : epochs) out.push_back(e.train_loss);
        return out;
    }

    nlohmann::json to_json(bool include_wall_time = true) const {
        auto num = [](double v) -> nlohmann::json { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); };
        nlohmann::json ep = nlohmann::json::array();
        for (const auto& e : epochs)
            ep.push_back({{"epoch", e.epoch},
                          {"train_loss", num(e.train_loss)},
                          {"train_metric", num(e.train_metric)},
                          {"valid_metric", num(e.valid_metric)},
                          {"valid_loss", num(e.valid_loss)}});
        nlohmann::json ch = nlohmann::json::array();
        for (const auto& c : cmd_history) ch.push_back({{"epoch", c.epoch}, {"cmd", c.cmd}, {"cmd_node", c.cmd_node}});
        nlohmann::json j = {{"phase", phase},
                            {"config", config},
                            {"epochs", ep},
                            {"cmd_history", ch},
                            {"best_epoch", best_epoch},
                            {"best_valid_metric", num(best_valid_metric)},
                            {"test_metric", test_metric ? num(*test_metric) : nlohmann::json()},
                            {"gradient_evaluations", gradient_evaluations}};
        if (include_wall_time) j["wall_time_seconds"] = wall_time_seconds;
        return j;
    }
};

// -----------------------------------------------------------------------------
// Training loop
// -----------------------------------------------------------------------------

namespace detail {

/// Epoch e evaluates the parameters after e optimiser steps, then steps.
/// The best epoch maximises the valid metric, ties broken by lower valid
/// loss, then by the earlier epoch. Returns the best parameters.
template <typename Forward, typename Backward, typename OnEpoch>
EncoderParams train_loop(EncoderParams params, const TrainConfig& cfg, bool classifier_only,
                         std::span<const int> labels, const SplitMasks& split, RunReport& report, Forward&& forward,
                         Backward&& backward, OnEpoch&& on_epoch) {
    AdamWState state = AdamWState::for_params(params);
    const AdamWConfig opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
    EncoderParams best = params;
    double best_metric = -std::numeric_limits<double>::infinity();
    double best_loss = std::numeric_limits<double>::infinity();
    bool have_best = false;

    for (index_t e = 0;; ++e) {
        const DenseMatrix logits = forward(params);
        const auto loss = softmax_cross_entropy(logits, labels, split.train);
        EpochRecord rec;
        rec.epoch = e;
        rec.train_loss = loss.loss;
        rec.train_metric = evaluate_metric(logits, labels, split.train, cfg.metric);
        if (!split.valid.empty()) {
            rec.valid_metric = evaluate_metric(logits, labels, split.valid, cfg.metric);
            rec.valid_loss = softmax_cross_entropy(logits, labels, split.valid).loss;
        }
        report.epochs.push_back(rec);
        on_epoch(e, params);

        const bool improved = !have_best || split.valid.empty() || rec.valid_metric > best_metric ||
                              (rec.valid_metric == best_metric && rec.valid_loss < best_loss);
        if (improved) {
            best = params;
            best_metric = rec.valid_metric;
            best_loss = rec.valid_loss;
            report.best_epoch = e;
            report.best_valid_metric = rec.valid_metric;
            have_best = true;
        } else if (cfg.patience > 0 && e - report.best_epoch >= cfg.patience) {
            break;
        }
        if (e == cfg.epochs) break;

        EncoderParams grads = backward(params, loss.grad);
        ++report.gradient_evaluations;
        adamw_step(params, grads, state, opt, classifier_only);
    }
    return best;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

// -----------------------------------------------------------------------------
// Pretraining
// -----------------------------------------------------------------------------

struct PretrainResult {
    Checkpoint checkpoint;
    RunReport report;
    SplitMasks split;
};

/// Trains encoder, pooling and classifier end to end on the source labels.
/// With a target graph and cmd_track_interval > 0, CMD between source and
/// target embeddings is logged every interval and at the last epoch.
inline PretrainResult pretrain(const Graph& source, const EncoderConfig& enc_cfg, const PoolingConfig& pool_cfg,
                               const TrainConfig& cfg, const Graph* target = nullptr) {
    const auto t0 = std::chrono::steady_clock::now();
    enc_cfg.validate();
    cfg.validate();
    if (source.labeled_nodes().empty()) throw ConfigError("pretrain: source graph has no labeled nodes");

    RngStream split_rng(cfg.seed, kSplitStream);
    RngStream init_rng(cfg.seed, kInitStream);
    PretrainResult out;
    out.split = make_splits(source, cfg.train_fraction, cfg.valid_fraction, split_rng);

    const ModelInputs src_in = prepare_inputs(source, enc_cfg);
    const PoolingLayer src_pool = pool_cfg.build(source);
    EncoderParams params = init_params(enc_cfg, src_in.features.cols(), source.num_classes, init_rng);

    out.report.phase = "pretrain";
    out.report.config = {{"encoder", enc_cfg.to_json()},
                         {"pooling", pool_cfg.to_json()},
                         {"train", cfg.to_json()},
                         {"source", source.name},
                         {"target", target ? nlohmann::json(target->name) : nlohmann::json()}};

    const bool track = target != nullptr && cfg.cmd_track_interval > 0;
    std::optional<ModelInputs> tgt_in;
    PoolingLayer tgt_pool;
    if (track) {
        if (target->feature_dim() != source.feature_dim())
            throw ConfigError("pretrain: source and target feature widths differ");
        tgt_in = prepare_inputs(*target, enc_cfg);
        tgt_pool = pool_cfg.build(*target);
    }
    index_t last_tracked = std::numeric_limits<index_t>::max();
    auto track_cmd = [&](index_t e, const EncoderParams& p) {
        const DenseMatrix zs = encode(p, src_in.adj, src_in.features).first;
        const DenseMatrix zt = encode(p, tgt_in->adj, tgt_in->features).first;
        out.report.cmd_history.push_back({e, cmd(src_pool.forward(zs), tgt_pool.forward(zt)), cmd(zs, zt)});
        last_tracked = e;
    };

    ModelCache cache;
    EncoderParams last_params;
    out.checkpoint.config = enc_cfg;
    out.checkpoint.params = detail::train_loop(
        std::move(params), cfg, false, source.labels, out.split, out.report,
        [&](const EncoderParams& p) { return model_forward(p, src_in, src_pool, cache); },
        [&](const EncoderParams& p, const DenseMatrix& dlogits) { return model_backward(p, src_pool, cache, dlogits); },
        [&](index_t e, const EncoderParams& p) {
            if (track && e % cfg.cmd_track_interval == 0) track_cmd(e, p);
            if (track) last_params = p;
        });
    if (track && last_tracked != out.report.epochs.back().epoch) track_cmd(out.report.epochs.back().epoch, last_params);
    out.report.wall_time_seconds = detail::seconds_since(t0);
    return out;
}

/// Metric of a checkpoint on `mask` of `g` under the given pooling.
inline double evaluate_checkpoint(const Checkpoint& ck, const Graph& g, const PoolingConfig& pool_cfg,
                                  std::span<const index_t> mask, EvalMetric metric = EvalMetric::Accuracy) {
    const ModelInputs in = prepare_inputs(g, ck.config);
    ModelCache cache;
    const DenseMatrix logits = model_forward(ck.params, in, pool_cfg.build(g), cache);
    return evaluate_metric(logits, g.labels, mask, metric);
}

// -----------------------------------------------------------------------------
// Adaptation
// -----------------------------------------------------------------------------

struct AdaptResult {
    Checkpoint checkpoint;
    RunReport report;
    SplitMasks split;
};

inline void check_compatible(const Checkpoint& ck, const Graph& g, const ModelInputs& in) {
    if (ck.params.arch != ck.config.arch) throw ConfigError("adapt: checkpoint architecture does not match its config");
    if (in.features.cols() != ck.params.input_dim())
        throw ConfigError("adapt: target feature width " + std::to_string(in.features.cols()) +
                          " != checkpoint input width " + std::to_string(ck.params.input_dim()));
    if (static_cast<index_t>(g.num_classes) > ck.params.num_classes())
        throw ConfigError("adapt: target has more classes than the checkpoint classifier");
}

/// none: evaluate the pretrained model directly. last: train the classifier
/// on frozen pooled embeddings, starting from the pretrained classifier.
/// full: train every parameter. The test metric is taken at the best
/// validation epoch.
inline AdaptResult adapt(const Checkpoint& ck, const Graph& target, TransferMode mode, const PoolingConfig& pool_cfg,
                         const TrainConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    const ModelInputs in = prepare_inputs(target, ck.config);
    check_compatible(ck, target, in);
    RngStream split_rng(cfg.seed, kSplitStream);
    AdaptResult out;
    out.split = make_splits(target, cfg.train_fraction, cfg.valid_fraction, split_rng);
    if (mode != TransferMode::None && out.split.train.empty()) throw ConfigError("adapt: empty target train mask");

    const PoolingLayer pool = pool_cfg.build(target);
    out.checkpoint.config = ck.config;
    out.report.phase = "adapt";
    out.report.config = {{"encoder", ck.config.to_json()},
                         {"pooling", pool_cfg.to_json()},
                         {"train", cfg.to_json()},
                         {"mode", to_string(mode)},
                         {"target", target.name}};

    ModelCache cache;
    auto full_forward = [&](const EncoderParams& p) { return model_forward(p, in, pool, cache); };
    const auto& labels = target.labels;

    if (mode == TransferMode::None) {
        const DenseMatrix logits = full_forward(ck.params);
        EpochRecord rec;
        rec.train_loss = softmax_cross_entropy(logits, labels, out.split.train).loss;
        rec.train_metric = evaluate_metric(logits, labels, out.split.train, cfg.metric);
        if (!out.split.valid.empty()) {
            rec.valid_metric = evaluate_metric(logits, labels, out.split.valid, cfg.metric);
            rec.valid_loss = softmax_cross_entropy(logits, labels, out.split.valid).loss;
        }
        out.report.epochs.push_back(rec);
        out.report.best_valid_metric = rec.valid_metric;
        if (!out.split.test.empty()) out.report.test_metric = evaluate_metric(logits, labels, out.split.test, cfg.metric);
        out.checkpoint.params = ck.params;
    } else if (mode == TransferMode::LastLayer) {
        // The encoder is frozen, so the pooled embeddings are computed once.
        const DenseMatrix h = pool.forward(encode(ck.params, in.adj, in.features).first);
        out.checkpoint.params = detail::train_loop(
            ck.params, cfg, true, labels, out.split, out.report,
            [&](const EncoderParams& p) { return predict(p, h); },
            [&](const EncoderParams& p, const DenseMatrix& dlogits) {
                auto cls = classifier_backward(p, h, dlogits);
                EncoderParams g = zeros_like(p);
                g.classifier_weight = std::move(cls.weight);
                g.classifier_bias = std::move(cls.bias);
                return g;
            },
            [](index_t, const EncoderParams&) {});
    } else {
        out.checkpoint.params = detail::train_loop(
            ck.params, cfg, false, labels, out.split, out.report, full_forward,
            [&](const EncoderParams& p, const DenseMatrix& dlogits) { return model_backward(p, pool, cache, dlogits); },
            [](index_t, const EncoderParams&) {});
    }
    if (mode != TransferMode::None && !out.split.test.empty()) {
        const DenseMatrix logits = full_forward(out.checkpoint.params);
        out.report.test_metric = evaluate_metric(logits, labels, out.split.test, cfg.metric);
    }
    out.report.wall_time_seconds = detail::seconds_since(t0);
    return out;
}

// -----------------------------------------------------------------------------
// Edge permutation sweep
// -----------------------------------------------------------------------------

struct SweepRow {
    double rate = 0.0;
    std::uint64_t seed = 0;
    double cmd_vanilla = 0.0; // node embeddings Z
    double cmd_sp = 0.0;      // pooled embeddings H
    double metric = 0.0;      // pretrained model on the permuted target, all labeled nodes
};

/// For each (rate, seed) in that order: permute the target edges with
/// RngStream(seed, kPermuteStream), re-embed with the fixed checkpoint and
/// measure CMD against the source.
inline std::vector<SweepRow> permutation_sweep(const Checkpoint& ck, const Graph& source, const Graph& target,
                                               std::span<const double> rates, std::span<const std::uint64_t> seeds,
                                               const PoolingConfig& pool_cfg,
                                               EvalMetric metric = EvalMetric::Accuracy) {
    for (double r : rates)
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("permutation_sweep: rates must lie in [0, 1]");
    const ModelInputs src_in = prepare_inputs(source, ck.config);
    check_compatible(ck, source, src_in);
    const DenseMatrix zs = encode(ck.params, src_in.adj, src_in.features).first;
    const DenseMatrix hs = pool_cfg.build(source).forward(zs);

    std::vector<SweepRow> rows;
    for (double rate : rates) {
        for (std::uint64_t seed : seeds) {
            RngStream rng(seed, kPermuteStream);
            const Graph permuted = permute_edges(target, rate, rng);
            const ModelInputs in = prepare_inputs(permuted, ck.config);
            const DenseMatrix zt = encode(ck.params, in.adj, in.features).first;
            const DenseMatrix ht = pool_cfg.build(permuted).forward(zt);
            SweepRow row{rate, seed, cmd(zs, zt), cmd(hs, ht), 0.0};
            const auto labeled = permuted.labeled_nodes();
            if (!labeled.empty()) row.metric = evaluate_metric(predict(ck.params, ht), permuted.labels, labeled, metric);
            rows.push_back(row);
        }
    }
    return rows;
}

inline std::string sweep_to_csv(std::span<const SweepRow> rows) {
    std::string out = "rate,seed,cmd_vanilla,cmd_sp,metric\n";
    for (const auto& r : rows) {
        out += detail::format_double(r.rate) + "," + std::to_string(r.seed) + "," + detail::format_double(r.cmd_vanilla) +
               "," + detail::format_double(r.cmd_sp) + "," + detail::format_double(r.metric) + "\n";
    }
    return out;
}

// -----------------------------------------------------------------------------
// Per-dataset defaults
// -----------------------------------------------------------------------------

/// Hyperparameters keyed by source dataset family. Settings shared by every
/// family (hidden 64, 2 layers, lr 1e-3, 3000 fine-tune epochs, patience 200)
/// live in the config structs' own defaults.
struct Recipe {
    std::string family;
    index_t pretrain_epochs = 200;
    index_t k_sp = 2;
    index_t k_spp = 3;
    index_t repeats_spp = 100;
    PoolingMode sp_mode = PoolingMode::Mean;
};

inline std::optional<Recipe> recipe_for(std::string_view dataset) {
    std::string s(dataset);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    auto is_one_of = [&](std::initializer_list<std::string_view> names) {
        return std::find(names.begin(), names.end(), s) != names.end();
    };
    if (s == "acm") return Recipe{"citation", 500, 2, 3, 100, PoolingMode::Mean};
    if (s == "dblp") return Recipe{"citation", 200, 2, 3, 100, PoolingMode::Mean};
    // Learnable attention pooling is not provided; airport falls back to mean.
    if (is_one_of({"usa", "brazil", "europe"})) return Recipe{"airport", 500, 2, 3, 100, PoolingMode::Mean};
    // Twitch has no SP++ setting; the SP++ fields keep the citation values.
    if (is_one_of({"de", "en", "es", "fr", "pt", "ru"}) || s.starts_with("twitch"))
        return Recipe{"twitch", 100, 1, 3, 100, PoolingMode::GcnNorm};
    if (s.starts_with("arxiv")) return Recipe{"arxiv", 500, 1, 3, 50, PoolingMode::GcnNorm};
    return std::nullopt;
}

} // namespace subpool
