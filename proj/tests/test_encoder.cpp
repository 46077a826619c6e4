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

#include "subpool/encoder.hpp"
#include "subpool/gradcheck.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

namespace subpool {
namespace {

using testing_support::graph_from_edges;
using testing_support::random_dense;
using testing_support::TempDir;

/// Dense straight-line GCN forward used as an oracle.
DenseMatrix dense_gcn(const EncoderParams& p, const DenseMatrix& a_hat, const DenseMatrix& x) {
    auto mul = [](const DenseMatrix& a, const DenseMatrix& b) {
        DenseMatrix out(a.rows(), b.cols());
        for (index_t i = 0; i < a.rows(); ++i)
            for (index_t j = 0; j < b.cols(); ++j)
                for (index_t k = 0; k < a.cols(); ++k) out(i, j) += a(i, k) * b(k, j);
        return out;
    };
    DenseMatrix act = x;
    for (index_t l = 0; l < p.layers.size(); ++l) {
        DenseMatrix s = mul(a_hat, mul(act, p.layers[l].weight));
        for (index_t i = 0; i < s.rows(); ++i)
            for (index_t j = 0; j < s.cols(); ++j) s(i, j) += p.layers[l].bias[j];
        if (l + 1 < p.layers.size())
            for (double& v : s.data()) v = v > 0.0 ? v : p.prelu_slopes[l] * v;
        act = std::move(s);
    }
    return act;
}

Graph five_node_graph() {
    RngStream rng(8, 0);
    return make_graph("five", 5, std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}, {1, 3}, {3, 4}}, random_dense(5, 3, rng),
                      {0, 1, 1, 0, 1}, 2);
}

TEST(Encoder, GcnMatchesDenseOracle) {
    const Graph g = five_node_graph();
    EncoderConfig cfg;
    cfg.hidden = 4;
    cfg.layers = 3;
    RngStream rng(1, kInitStream);
    EncoderParams p = init_params(cfg, 3, 2, rng);
    for (auto& layer : p.layers)
        for (double& b : layer.bias) b = rng.normal();
    p.prelu_slopes = {0.25, -0.1};
    const ModelInputs in = prepare_inputs(g, cfg);
    const auto [z, cache] = encode(p, in.adj, in.features);
    EXPECT_LE(max_abs_diff(z, dense_gcn(p, in.adj.to_dense(), g.features)), 1e-12);
}

TEST(Encoder, MlpIgnoresStructure) {
    const Graph g = five_node_graph();
    EncoderConfig cfg;
    cfg.arch = Architecture::Mlp;
    cfg.hidden = 4;
    RngStream rng(2, kInitStream);
    const EncoderParams p = init_params(cfg, 3, 2, rng);
    const ModelInputs in = prepare_inputs(g, cfg);
    const auto [z, cache] = encode(p, in.adj, in.features);
    const DenseMatrix identity = SparseMatrix::identity(5).to_dense();
    EXPECT_LE(max_abs_diff(z, dense_gcn(p, identity, g.features)), 1e-12);
}

TEST(Encoder, SgcPropagationExample) {
    const Graph g = make_graph("pair", 2, std::vector<Edge>{{0, 1}}, DenseMatrix{{2.0}, {0.0}}, {0, 1}, 2);
    EncoderConfig cfg;
    cfg.arch = Architecture::Sgc;
    cfg.sgc_k = 1;
    EXPECT_LE(max_abs_diff(prepare_inputs(g, cfg).features, DenseMatrix{{1.0}, {1.0}}), 1e-15);
    cfg.sgc_k = 0;
    EXPECT_EQ(prepare_inputs(g, cfg).features, g.features);
}

TEST(Encoder, RowNormalizeOption) {
    const Graph g = make_graph("pair", 2, std::vector<Edge>{{0, 1}}, DenseMatrix{{1.0, 3.0}, {0.0, 0.0}}, {0, 1}, 2);
    EncoderConfig cfg;
    cfg.row_normalize = true;
    const DenseMatrix f = prepare_inputs(g, cfg).features;
    EXPECT_DOUBLE_EQ(f(0, 0), 0.25);
    EXPECT_DOUBLE_EQ(f(0, 1), 0.75);
    EXPECT_EQ(f(1, 0), 0.0);
}

TEST(Encoder, InitParamsShapesAndBounds) {
    EncoderConfig cfg;
    cfg.hidden = 6;
    RngStream rng(0, kInitStream);
    const EncoderParams p = init_params(cfg, 10, 3, rng);
    ASSERT_EQ(p.layers.size(), 2u);
    EXPECT_EQ(p.input_dim(), 10u);
    EXPECT_EQ(p.hidden(), 6u);
    EXPECT_EQ(p.num_classes(), 3u);
    EXPECT_EQ(p.prelu_slopes, std::vector<double>{0.25});
    const double limit = std::sqrt(6.0 / 16.0);
    for (double w : p.layers[0].weight.data()) EXPECT_LE(std::abs(w), limit);
    for (double b : p.layers[0].bias) EXPECT_EQ(b, 0.0);
    RngStream again(0, kInitStream);
    EXPECT_TRUE(init_params(cfg, 10, 3, again) == p);
    EXPECT_THROW(init_params(cfg, 0, 3, again), ConfigError);
}

TEST(Encoder, RejectsWrongInputWidth) {
    EncoderConfig cfg;
    RngStream rng(0, kInitStream);
    const EncoderParams p = init_params(cfg, 3, 2, rng);
    EXPECT_THROW(encode(p, SparseMatrix::identity(2), DenseMatrix(2, 4)), ShapeError);
}

TEST(Encoder, StaleCacheIsStateError) {
    const Graph g = five_node_graph();
    EncoderConfig cfg;
    cfg.hidden = 4;
    RngStream rng(3, kInitStream);
    const EncoderParams p = init_params(cfg, 3, 2, rng);
    const ModelInputs in = prepare_inputs(g, cfg);
    const auto [z, cache] = encode(p, in.adj, in.features);
    EXPECT_THROW(backward(p, cache, DenseMatrix(5, 5)), StateError);
    EncoderConfig deeper = cfg;
    deeper.layers = 3;
    const EncoderParams q = init_params(deeper, 3, 2, rng);
    EXPECT_THROW(backward(q, cache, z), StateError);
    EXPECT_THROW(backward(p, ForwardCache{}, z), StateError);
}

TEST(Loss, UniformLogitsGiveLogC) {
    const DenseMatrix logits(3, 4, 0.0);
    const std::vector<int> labels = {0, 3, 2};
    const std::vector<index_t> mask = {0, 1, 2};
    const LossResult r = softmax_cross_entropy(logits, labels, mask);
    EXPECT_DOUBLE_EQ(r.loss, std::log(4.0));
    EXPECT_DOUBLE_EQ(r.grad(0, 0), (0.25 - 1.0) / 3.0);
    EXPECT_DOUBLE_EQ(r.grad(0, 1), 0.25 / 3.0);
}

TEST(Loss, CrossEntropyMaskAndErrors) {
    const DenseMatrix logits{{1000.0, 0.0}, {0.0, 0.0}};
    const std::vector<int> labels = {0, kUnlabeled};
    const std::vector<index_t> mask = {0};
    const LossResult r = softmax_cross_entropy(logits, labels, mask);
    EXPECT_NEAR(r.loss, 0.0, 1e-12); // stable at large logits
    EXPECT_EQ(r.grad(1, 0), 0.0);
    EXPECT_THROW(softmax_cross_entropy(logits, labels, std::vector<index_t>{1}), DomainError);
    EXPECT_THROW(softmax_cross_entropy(logits, labels, std::vector<index_t>{}), DomainError);
}

TEST(Loss, MseExample) {
    const LossResult r = mse_loss(DenseMatrix{{1.0}}, DenseMatrix{{0.0}});
    EXPECT_DOUBLE_EQ(r.loss, 0.5);
    EXPECT_DOUBLE_EQ(r.grad(0, 0), 1.0);
    const LossResult two = mse_loss(DenseMatrix{{1.0, 3.0}}, DenseMatrix{{0.0, 1.0}});
    EXPECT_DOUBLE_EQ(two.loss, 0.25 + 1.0);
    EXPECT_THROW(mse_loss(DenseMatrix(1, 1), DenseMatrix(1, 2)), ShapeError);
}

EncoderParams scalar_params(double w) {
    EncoderParams p;
    p.arch = Architecture::Mlp;
    p.layers.push_back({DenseMatrix{{w}}, {0.0}});
    p.classifier_weight = DenseMatrix{{0.0}};
    p.classifier_bias = {0.0};
    return p;
}

TEST(AdamW, FirstStepMovesByLr) {
    EncoderParams p = scalar_params(0.0);
    EncoderParams g = scalar_params(1.0);
    AdamWState state = AdamWState::for_params(p);
    AdamWConfig cfg;
    cfg.lr = 0.1;
    adamw_step(p, g, state, cfg);
    EXPECT_NEAR(p.layers[0].weight(0, 0), -0.1, 1e-8);
    EXPECT_EQ(state.step, 1u);
}

TEST(AdamW, DecayIsDecoupled) {
    EncoderParams p = scalar_params(1.0);
    EncoderParams g = scalar_params(0.0);
    AdamWState state = AdamWState::for_params(p);
    AdamWConfig cfg;
    cfg.lr = 0.1;
    cfg.weight_decay = 0.5;
    adamw_step(p, g, state, cfg);
    // A zero gradient leaves the Adam moments at zero, so only decay acts.
    EXPECT_DOUBLE_EQ(p.layers[0].weight(0, 0), 0.95);
}

TEST(AdamW, ClassifierOnlyFreezesEncoder) {
    EncoderParams p = scalar_params(1.0);
    EncoderParams g = scalar_params(1.0);
    g.classifier_weight(0, 0) = 1.0;
    AdamWState state = AdamWState::for_params(p);
    adamw_step(p, g, state, AdamWConfig{}, true);
    EXPECT_EQ(p.layers[0].weight(0, 0), 1.0);
    EXPECT_LT(p.classifier_weight(0, 0), 0.0);
}

TEST(AdamW, RejectsNonFiniteGradient) {
    EncoderParams p = scalar_params(1.0);
    EncoderParams g = scalar_params(std::nan(""));
    AdamWState state = AdamWState::for_params(p);
    EXPECT_THROW(adamw_step(p, g, state, AdamWConfig{}), NumericError);
}

TEST(Gradients, MatchFiniteDifferencesWithNegativeSlope) {
    const Graph g = five_node_graph();
    EncoderConfig cfg;
    cfg.hidden = 3;
    cfg.layers = 3;
    RngStream rng(4, kInitStream);
    EncoderParams p = init_params(cfg, 3, 2, rng);
    p.prelu_slopes = {0.3, -0.2};
    const ModelInputs in = prepare_inputs(g, cfg);
    const std::vector<index_t> mask = {0, 1, 2, 3, 4};
    const PoolingLayer pool = PoolingLayer::build(g, PoolingMode::Mean, SamplerConfig::khop(1));
    const auto report = gradient_check(p, in, pool, g.labels, mask);
    EXPECT_LT(report.max_rel_error, 1e-5);
    EXPECT_EQ(report.tensors.size(), 9u); // 3 weights, 3 biases, slopes, Wc, bc
}

TEST(Checkpoint, RoundTrip) {
    EncoderConfig cfg;
    cfg.hidden = 5;
    cfg.layers = 3;
    RngStream rng(5, kInitStream);
    const Checkpoint ck{cfg, init_params(cfg, 4, 3, rng)};
    TempDir tmp;
    save_checkpoint(ck, tmp.path() / "ck.json");
    const Checkpoint back = load_checkpoint(tmp.path() / "ck.json");
    EXPECT_TRUE(back.params == ck.params);
    EXPECT_EQ(back.config.to_json(), cfg.to_json());
}

TEST(Checkpoint, RejectsCorruptFiles) {
    TempDir tmp;
    const auto path = tmp.path() / "ck.json";
    std::ofstream(path) << "{not json";
    EXPECT_THROW(load_checkpoint(path), FormatError);
    EncoderConfig cfg;
    RngStream rng(0, kInitStream);
    auto j = checkpoint_to_json({cfg, init_params(cfg, 2, 2, rng)});
    j["prelu_slopes"] = nlohmann::json::array();
    EXPECT_THROW(checkpoint_from_json(j), FormatError);
    j = checkpoint_to_json({cfg, init_params(cfg, 2, 2, rng)});
    j["architecture"] = "mlp";
    EXPECT_THROW(checkpoint_from_json(j), FormatError);
    EXPECT_THROW(load_checkpoint(tmp.path() / "missing.json"), IoError);
}

TEST(EncoderConfig, JsonOverlay) {
    const EncoderConfig cfg = EncoderConfig::from_json({{"backbone", "sgc"}, {"sgc_k", 3}});
    EXPECT_EQ(cfg.arch, Architecture::Sgc);
    EXPECT_EQ(cfg.sgc_k, 3u);
    EXPECT_EQ(cfg.hidden, 64u);
    EXPECT_THROW(EncoderConfig::from_json({{"backbone", "gat"}}), ConfigError);
    EXPECT_THROW(EncoderConfig::from_json({{"hidden", 0}}), ConfigError);
}

} // namespace
} // namespace subpool
