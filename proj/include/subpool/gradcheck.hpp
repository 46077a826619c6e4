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

// Central finite-difference check of the analytic model gradients.
// Relative error per entry: |a − n| / max(|a|, |n|, 1e-6).

#include "subpool/encoder.hpp"
#include "subpool/graphstore.hpp"
#include "subpool/numerics.hpp"
#include "subpool/pipeline.hpp"
#include "subpool/pooling.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace subpool {

inline constexpr double kGradCheckFloor = 1e-6;

struct TensorCheck {
    std::string name;
    index_t size = 0;
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
};

struct GradCheckReport {
    std::string label;
    std::vector<TensorCheck> tensors;
    double max_rel_error = 0.0;

    nlohmann::json to_json() const {
        nlohmann::json t = nlohmann::json::array();
        for (const auto& c : tensors)
            t.push_back({{"name", c.name}, {"size", c.size}, {"max_rel_error", c.max_rel_error},
                         {"max_abs_error", c.max_abs_error}});
        return {{"label", label}, {"max_rel_error", max_rel_error}, {"tensors", t}};
    }
};

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
}

/// Compares model_backward against central differences of the masked
/// cross-entropy for every parameter entry.
inline GradCheckReport gradient_check(EncoderParams params, const ModelInputs& in, const PoolingLayer& pool,
                                      std::span<const int> labels, std::span<const index_t> mask, double eps = 1e-5) {
    auto loss_at = [&](const EncoderParams& p) {
        ModelCache c;
        return softmax_cross_entropy(model_forward(p, in, pool, c), labels, mask).loss;
    };
    ModelCache cache;
    const DenseMatrix logits = model_forward(params, in, pool, cache);
    const auto loss = softmax_cross_entropy(logits, labels, mask);
    EncoderParams grads = model_backward(params, pool, cache, loss.grad);

    GradCheckReport report;
    auto p = tensors(params);
    auto g = tensors(grads);
    for (index_t t = 0; t < p.size(); ++t) {
        TensorCheck tc{p[t].name, p[t].values.size(), 0.0, 0.0};
        for (index_t i = 0; i < p[t].values.size(); ++i) {
            double& x = p[t].values[i];
            const double saved = x;
            x = saved + eps;
            const double up = loss_at(params);
            x = saved - eps;
            const double down = loss_at(params);
            x = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = g[t].values[i];
            tc.max_rel_error = std::max(tc.max_rel_error, relative_error(analytic, numeric));
            tc.max_abs_error = std::max(tc.max_abs_error, std::abs(analytic - numeric));
        }
        report.max_rel_error = std::max(report.max_rel_error, tc.max_rel_error);
        report.tensors.push_back(std::move(tc));
    }
    return report;
}

/// Random 30-node two-block graph with 6 features, used by the gradcheck
/// command and tests.
inline Graph gradcheck_graph(std::uint64_t seed) {
    RngStream rng(seed, 0);
    DenseMatrix means(2, 6);
    for (double& v : means.data()) v = rng.normal();
    const index_t blocks[] = {15, 15};
    return sbm_generate(blocks, 0.25, 0.08, means, 1.0, rng, "gradcheck");
}

/// Every backbone x pooling combination on gradcheck_graph(seed).
inline std::vector<GradCheckReport> gradcheck_suite(std::uint64_t seed, double eps = 1e-5) {
    const Graph g = gradcheck_graph(seed);
    std::vector<index_t> mask(g.num_nodes);
    for (index_t i = 0; i < mask.size(); ++i) mask[i] = i;

    const Architecture archs[] = {Architecture::Mlp, Architecture::Gcn, Architecture::Sgc};
    struct Variant {
        std::string name;
        PoolingConfig cfg;
    };
    const std::vector<Variant> variants = {
        {"identity", PoolingConfig::of(PoolingMode::Mean, 0)},
        {"mean", PoolingConfig::of(PoolingMode::Mean, 2)},
        {"gcn_norm", PoolingConfig::of(PoolingMode::GcnNorm, 2)},
        {"rw", PoolingConfig::of(PoolingMode::RandomWalk, 3, 10, seed)},
        {"max", {PoolingMode::Max, SamplerConfig::khop(1)}},
    };

    std::vector<GradCheckReport> out;
    for (Architecture arch : archs) {
        EncoderConfig enc;
        enc.arch = arch;
        enc.hidden = 8;
        const ModelInputs in = prepare_inputs(g, enc);
        for (const auto& v : variants) {
            RngStream init(seed, kInitStream);
            EncoderParams params = init_params(enc, in.features.cols(), g.num_classes, init);
            auto report = gradient_check(std::move(params), in, v.cfg.build(g), g.labels, mask, eps);
            report.label = to_string(arch) + "/" + v.name;
            out.push_back(std::move(report));
        }
    }
    return out;
}

} // namespace subpool
