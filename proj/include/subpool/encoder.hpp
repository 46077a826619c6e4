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

// MLP / GCN / SGC encoders with hand-written reverse mode, a linear
// classifier head, cross-entropy and squared losses, and AdamW.
//
//   gcn: Z = Â·σ(Â·X·W₁ + b₁)·W₂ + b₂
//   mlp: Z =   σ(  X·W₁ + b₁)·W₂ + b₂
//   sgc: Z = X̃·W₁ + b₁           with X̃ = Â^k·X precomputed
//
// σ is PReLU with one learnable slope per hidden layer. The full model is
// logits = g(pool(Z)) with g(H) = H·Wc + bc.

#include "subpool/error.hpp"
#include "subpool/graphstore.hpp"
#include "subpool/numerics.hpp"
#include "subpool/pooling.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace subpool {

enum class Architecture { Mlp, Gcn, Sgc };

inline std::string to_string(Architecture a) {
    switch (a) {
    case Architecture::Mlp: return "mlp";
    case Architecture::Gcn: return "gcn";
    case Architecture::Sgc: return "sgc";
    }
    return "?";
}

inline Architecture parse_architecture(std::string_view s) {
    if (s == "mlp") return Architecture::Mlp;
    if (s == "gcn") return Architecture::Gcn;
    if (s == "sgc") return Architecture::Sgc;
    throw ConfigError("unknown backbone '" + std::string(s) + "'");
}

struct EncoderConfig {
    Architecture arch = Architecture::Gcn;
    index_t hidden = 64;
    index_t layers = 2; // mlp/gcn depth; sgc always has one linear map
    index_t sgc_k = 2;  // propagation steps for sgc
    bool row_normalize = false;
    double prelu_init = 0.25;

    index_t depth() const noexcept { return arch == Architecture::Sgc ? 1 : layers; }

    void validate() const {
        if (hidden == 0) throw ConfigError("encoder: hidden width must be >= 1");
        if (arch != Architecture::Sgc && layers == 0) throw ConfigError("encoder: layers must be >= 1");
    }

    nlohmann::json to_json() const {
        return {{"backbone", to_string(arch)}, {"hidden", hidden},       {"layers", layers},
                {"sgc_k", sgc_k},              {"row_normalize", row_normalize}, {"prelu_init", prelu_init}};
    }

    static EncoderConfig from_json(const nlohmann::json& j) { return from_json(j, EncoderConfig{}); }

    static EncoderConfig from_json(const nlohmann::json& j, EncoderConfig base) {
        try {
            if (j.contains("backbone")) base.arch = parse_architecture(j.at("backbone").get<std::string>());
            if (j.contains("hidden")) base.hidden = j.at("hidden").get<index_t>();
            if (j.contains("layers")) base.layers = j.at("layers").get<index_t>();
            if (j.contains("sgc_k")) base.sgc_k = j.at("sgc_k").get<index_t>();
            if (j.contains("row_normalize")) base.row_normalize = j.at("row_normalize").get<bool>();
            if (j.contains("prelu_init")) base.prelu_init = j.at("prelu_init").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("encoder config: ") + e.what());
        }
        base.validate();
        return base;
    }
};

struct Layer {
    DenseMatrix weight; // in x out
    std::vector<double> bias;
};

/// Encoder + classifier parameters. Gradients reuse this type.
struct EncoderParams {
    Architecture arch = Architecture::Gcn;
    std::vector<Layer> layers;
    std::vector<double> prelu_slopes; // one per hidden layer (layers.size() - 1)
    DenseMatrix classifier_weight;    // hidden x C
    std::vector<double> classifier_bias;

    index_t input_dim() const noexcept { return layers.empty() ? 0 : layers.front().weight.rows(); }
    index_t hidden() const noexcept { return layers.empty() ? 0 : layers.back().weight.cols(); }
    index_t num_classes() const noexcept { return classifier_weight.cols(); }

    friend bool operator==(const EncoderParams& a, const EncoderParams& b) {
        if (a.arch != b.arch || a.layers.size() != b.layers.size()) return false;
        for (index_t l = 0; l < a.layers.size(); ++l)
            if (!(a.layers[l].weight == b.layers[l].weight) || a.layers[l].bias != b.layers[l].bias) return false;
        return a.prelu_slopes == b.prelu_slopes && a.classifier_weight == b.classifier_weight &&
               a.classifier_bias == b.classifier_bias;
    }
};

inline bool operator==(const Layer& a, const Layer& b) { return a.weight == b.weight && a.bias == b.bias; }

/// Parameter tensor view used by the optimiser and the gradient checker.
struct TensorRef {
    std::span<double> values;
    bool classifier;
    std::string name;
};

inline std::vector<TensorRef> tensors(EncoderParams& p) {
    std::vector<TensorRef> out;
    for (index_t l = 0; l < p.layers.size(); ++l) {
        out.push_back({p.layers[l].weight.data(), false, "W" + std::to_string(l + 1)});
        out.push_back({p.layers[l].bias, false, "b" + std::to_string(l + 1)});
    }
    if (!p.prelu_slopes.empty()) out.push_back({p.prelu_slopes, false, "prelu"});
    out.push_back({p.classifier_weight.data(), true, "Wc"});
    out.push_back({p.classifier_bias, true, "bc"});
    return out;
}

inline EncoderParams zeros_like(const EncoderParams& p) {
    EncoderParams z;
    z.arch = p.arch;
    for (const auto& l : p.layers)
        z.layers.push_back({DenseMatrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size(), 0.0)});
    z.prelu_slopes.assign(p.prelu_slopes.size(), 0.0);
    z.classifier_weight = DenseMatrix(p.classifier_weight.rows(), p.classifier_weight.cols());
    z.classifier_bias.assign(p.classifier_bias.size(), 0.0);
    return z;
}

/// Glorot-uniform weights in ±sqrt(6/(fan_in+fan_out)), zero biases, slopes
/// at `prelu_init`. Draw order: encoder layers, then classifier, row-major.
inline EncoderParams init_params(const EncoderConfig& cfg, index_t input_dim, index_t num_classes,
                                 RngStream& rng) {
    cfg.validate();
    if (input_dim == 0 || num_classes == 0) throw ConfigError("init_params: empty input or class dimension");
    auto glorot = [&](index_t fan_in, index_t fan_out) {
        DenseMatrix w(fan_in, fan_out);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (double& v : w.data()) v = rng.uniform(-limit, limit);
        return w;
    };
    EncoderParams p;
    p.arch = cfg.arch;
    index_t in = input_dim;
    for (index_t l = 0; l < cfg.depth(); ++l) {
        p.layers.push_back({glorot(in, cfg.hidden), std::vector<double>(cfg.hidden, 0.0)});
        in = cfg.hidden;
    }
    p.prelu_slopes.assign(cfg.depth() - 1, cfg.prelu_init);
    p.classifier_weight = glorot(cfg.hidden, num_classes);
    p.classifier_bias.assign(num_classes, 0.0);
    return p;
}

// -----------------------------------------------------------------------------
// Forward / backward
// -----------------------------------------------------------------------------

struct ForwardCache {
    Architecture arch = Architecture::Gcn;
    const SparseMatrix* adj = nullptr;  // borrowed; must outlive the cache
    const DenseMatrix* input = nullptr; // borrowed; must outlive the cache
    std::vector<DenseMatrix> hidden_inputs; // activation fed into layer l (l >= 1)
    std::vector<DenseMatrix> pre_activations; // S_l for every hidden layer
    index_t rows = 0;
    index_t out_cols = 0;
};

inline DenseMatrix sgc_propagate(const SparseMatrix& adj, const DenseMatrix& x, index_t k) {
    DenseMatrix out = x;
    for (index_t i = 0; i < k; ++i) out = spmm(adj, out);
    return out;
}

namespace detail {

inline double prelu(double s, double slope) noexcept { return s > 0.0 ? s : slope * s; }

inline void require_finite(const DenseMatrix& m, const char* what) {
    if (!m.all_finite()) throw NumericError(std::string("non-finite values in ") + what);
}

} // namespace detail

/// Encodes node features. `adj` is only read by the gcn backbone; for sgc, `x`
/// must already be the propagated features.
inline std::pair<DenseMatrix, ForwardCache> encode(const EncoderParams& params, const SparseMatrix& adj,
                                                   const DenseMatrix& x) {
    if (params.layers.empty()) throw ShapeError("encode: no layers");
    if (x.cols() != params.input_dim())
        throw ShapeError("encode: features have " + std::to_string(x.cols()) + " columns, encoder expects " +
                         std::to_string(params.input_dim()));
    const bool propagate = params.arch == Architecture::Gcn;
    if (propagate && (adj.rows() != x.rows() || adj.cols() != x.rows()))
        throw ShapeError("encode: adjacency does not match node count");
    if (params.prelu_slopes.size() + 1 != params.layers.size())
        throw ShapeError("encode: need one PReLU slope per hidden layer");

    ForwardCache cache;
    cache.arch = params.arch;
    cache.adj = propagate ? &adj : nullptr;
    cache.input = &x;
    cache.rows = x.rows();

    DenseMatrix act;
    const DenseMatrix* in = &x;
    for (index_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        DenseMatrix s = matmul(*in, layer.weight);
        if (propagate) s = spmm(adj, s);
        add_row_vector(s, layer.bias);
        const bool last = l + 1 == params.layers.size();
        if (last) {
            detail::require_finite(s, "encoder output");
            cache.out_cols = s.cols();
            return {std::move(s), std::move(cache)};
        }
        DenseMatrix a(s.rows(), s.cols());
        const double slope = params.prelu_slopes[l];
        for (index_t i = 0; i < s.size(); ++i) a.data()[i] = detail::prelu(s.data()[i], slope);
        detail::require_finite(a, "hidden activation");
        cache.pre_activations.push_back(std::move(s));
        cache.hidden_inputs.push_back(std::move(a));
        in = &cache.hidden_inputs.back();
    }
    throw ShapeError("encode: unreachable");
}

/// Gradients of the encoder parameters given dL/dZ; classifier slots are zero.
inline EncoderParams backward(const EncoderParams& params, const ForwardCache& cache, const DenseMatrix& dz) {
    if (cache.arch != params.arch || cache.input == nullptr ||
        cache.pre_activations.size() + 1 != params.layers.size() || dz.rows() != cache.rows ||
        dz.cols() != cache.out_cols || dz.cols() != params.hidden())
        throw StateError("backward: cache does not match parameters or upstream gradient");

    EncoderParams grads = zeros_like(params);
    DenseMatrix ds = dz;
    for (index_t l = params.layers.size(); l-- > 0;) {
        const auto& layer = params.layers[l];
        const DenseMatrix& in = l == 0 ? *cache.input : cache.hidden_inputs[l - 1];
        grads.layers[l].bias = column_sums(ds);
        // S = Â·(A·W) + b  ⇒  dT = Âᵀ·dS, dW = Aᵀ·dT, dA = dT·Wᵀ
        DenseMatrix dt = cache.adj ? spmm_transpose(*cache.adj, ds) : std::move(ds);
        grads.layers[l].weight = matmul_tn(in, dt);
        if (l == 0) break;
        DenseMatrix da = matmul_nt(dt, layer.weight);
        const DenseMatrix& s = cache.pre_activations[l - 1];
        const double slope = params.prelu_slopes[l - 1];
        double dslope = 0.0;
        ds = DenseMatrix(da.rows(), da.cols());
        for (index_t i = 0; i < da.size(); ++i) {
            const double sv = s.data()[i];
            if (sv > 0.0) {
                ds.data()[i] = da.data()[i];
            } else {
                ds.data()[i] = slope * da.data()[i];
                dslope += sv * da.data()[i];
            }
        }
        grads.prelu_slopes[l - 1] = dslope;
    }
    return grads;
}

/// logits = H·Wc + bc
inline DenseMatrix predict(const EncoderParams& params, const DenseMatrix& h) {
    if (h.cols() != params.classifier_weight.rows())
        throw ShapeError("predict: embedding width " + std::to_string(h.cols()) + " != classifier input " +
                         std::to_string(params.classifier_weight.rows()));
    DenseMatrix logits = matmul(h, params.classifier_weight);
    add_row_vector(logits, params.classifier_bias);
    return logits;
}

struct ClassifierGrads {
    DenseMatrix weight;
    std::vector<double> bias;
    DenseMatrix dh;
};

inline ClassifierGrads classifier_backward(const EncoderParams& params, const DenseMatrix& h,
                                           const DenseMatrix& dlogits) {
    if (dlogits.rows() != h.rows() || dlogits.cols() != params.num_classes())
        throw ShapeError("classifier_backward: gradient shape mismatch");
    return {matmul_tn(h, dlogits), column_sums(dlogits), matmul_nt(dlogits, params.classifier_weight)};
}

// -----------------------------------------------------------------------------
// Losses
// -----------------------------------------------------------------------------

struct LossResult {
    double loss = 0.0;
    DenseMatrix grad;
};

/// Mean cross-entropy over `mask`; gradient rows outside the mask are zero.
inline LossResult softmax_cross_entropy(const DenseMatrix& logits, std::span<const int> labels,
                                        std::span<const index_t> mask) {
    if (mask.empty()) throw DomainError("softmax_cross_entropy: empty mask");
    if (labels.size() != logits.rows()) throw ShapeError("softmax_cross_entropy: labels/logits row mismatch");
    const index_t c = logits.cols();
    const double inv = 1.0 / static_cast<double>(mask.size());
    LossResult out{0.0, DenseMatrix(logits.rows(), c)};
    std::vector<double> p(c);
    for (index_t i : mask) {
        const int y = labels[i];
        if (y < 0 || static_cast<index_t>(y) >= c)
            throw DomainError("softmax_cross_entropy: node " + std::to_string(i) + " has no valid label");
        auto r = logits.row(i);
        const double mx = *std::max_element(r.begin(), r.end());
        double z = 0.0;
        for (index_t j = 0; j < c; ++j) {
            p[j] = std::exp(r[j] - mx);
            z += p[j];
        }
        const double log_z = std::log(z) + mx;
        out.loss += (log_z - r[static_cast<index_t>(y)]) * inv;
        auto g = out.grad.row(i);
        for (index_t j = 0; j < c; ++j) g[j] = (p[j] / z - (static_cast<index_t>(y) == j ? 1.0 : 0.0)) * inv;
    }
    return out;
}

/// ½·mean((pred − target)²), the per-point ½(g − y)² form averaged.
inline LossResult mse_loss(const DenseMatrix& pred, const DenseMatrix& target) {
    if (!pred.same_shape(target)) throw ShapeError("mse_loss: shape mismatch");
    if (pred.empty()) throw DomainError("mse_loss: empty input");
    const double inv = 1.0 / static_cast<double>(pred.size());
    LossResult out{0.0, DenseMatrix(pred.rows(), pred.cols())};
    for (index_t i = 0; i < pred.size(); ++i) {
        const double r = pred.data()[i] - target.data()[i];
        out.loss += 0.5 * r * r * inv;
        out.grad.data()[i] = r * inv;
    }
    return out;
}

// -----------------------------------------------------------------------------
// Full model: encoder -> pooling -> classifier
// -----------------------------------------------------------------------------

/// Propagation operator plus the feature matrix the encoder consumes
/// (already Â^k-propagated for sgc, optionally row-normalised).
struct ModelInputs {
    SparseMatrix adj;
    DenseMatrix features;
};

inline ModelInputs prepare_inputs(const Graph& g, const EncoderConfig& cfg) {
    ModelInputs in{normalized_adjacency(g, true), cfg.row_normalize ? row_normalize(g.features) : g.features};
    if (cfg.arch == Architecture::Sgc) in.features = sgc_propagate(in.adj, in.features, cfg.sgc_k);
    return in;
}

struct ModelCache {
    ForwardCache encoder;
    PoolingLayer::Cache pooling;
    DenseMatrix z;
    DenseMatrix h;
};

inline DenseMatrix model_forward(const EncoderParams& params, const ModelInputs& in, const PoolingLayer& pool,
                                 ModelCache& cache) {
    auto [z, enc] = encode(params, in.adj, in.features);
    cache.encoder = std::move(enc);
    cache.h = pool.forward(z, cache.pooling);
    cache.z = std::move(z);
    return predict(params, cache.h);
}

/// Complete gradient of the loss with respect to every parameter.
inline EncoderParams model_backward(const EncoderParams& params, const PoolingLayer& pool, const ModelCache& cache,
                                    const DenseMatrix& dlogits, bool classifier_only = false) {
    auto cls = classifier_backward(params, cache.h, dlogits);
    EncoderParams grads = classifier_only ? zeros_like(params)
                                          : backward(params, cache.encoder, pool.backward(cache.pooling, cls.dh));
    grads.classifier_weight = std::move(cls.weight);
    grads.classifier_bias = std::move(cls.bias);
    return grads;
}

// -----------------------------------------------------------------------------
// AdamW
// -----------------------------------------------------------------------------

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamWState {
    EncoderParams m;
    EncoderParams v;
    std::uint64_t step = 0;

    static AdamWState for_params(const EncoderParams& p) { return {zeros_like(p), zeros_like(p), 0}; }
};

/// θ ← θ − lr·wd·θ − lr·m̂/(√v̂ + eps). Decay is applied to the weights, never
/// folded into the gradient. With `classifier_only` the encoder is untouched.
inline void adamw_step(EncoderParams& params, EncoderParams& grads, AdamWState& state, const AdamWConfig& cfg,
                       bool classifier_only = false) {
    auto p = tensors(params);
    auto g = tensors(grads);
    auto m = tensors(state.m);
    auto v = tensors(state.v);
    if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
        throw ShapeError("adamw_step: parameter structure mismatch");
    for (index_t t = 0; t < p.size(); ++t) {
        if (p[t].values.size() != g[t].values.size() || p[t].values.size() != m[t].values.size())
            throw ShapeError("adamw_step: tensor " + p[t].name + " size mismatch");
        if (classifier_only && !p[t].classifier) continue;
        for (double x : g[t].values)
            if (!std::isfinite(x)) throw NumericError("adamw_step: non-finite gradient in " + p[t].name);
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (index_t t = 0; t < p.size(); ++t) {
        if (classifier_only && !p[t].classifier) continue;
        auto& pv = p[t].values;
        auto& gv = g[t].values;
        auto& mv = m[t].values;
        auto& vv = v[t].values;
        for (index_t i = 0; i < pv.size(); ++i) {
            mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * gv[i];
            vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * gv[i] * gv[i];
            const double m_hat = mv[i] / bc1;
            const double v_hat = vv[i] / bc2;
            pv[i] -= cfg.lr * cfg.weight_decay * pv[i];
            pv[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
    }
}

// -----------------------------------------------------------------------------
// Checkpoints
// -----------------------------------------------------------------------------

struct Checkpoint {
    EncoderConfig config;
    EncoderParams params;
};

namespace detail {

inline nlohmann::json matrix_json(const DenseMatrix& m) {
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

inline DenseMatrix matrix_from_json(const nlohmann::json& j) {
    return DenseMatrix(j.at("rows").get<index_t>(), j.at("cols").get<index_t>(),
                       j.at("data").get<std::vector<double>>());
}

} // namespace detail

inline nlohmann::json checkpoint_to_json(const Checkpoint& ck) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : ck.params.layers) layers.push_back({{"weight", detail::matrix_json(l.weight)}, {"bias", l.bias}});
    return {{"format", "subpool-checkpoint"},
            {"version", 1},
            {"architecture", to_string(ck.params.arch)},
            {"encoder", ck.config.to_json()},
            {"input_dim", ck.params.input_dim()},
            {"num_classes", ck.params.num_classes()},
            {"layers", layers},
            {"prelu_slopes", ck.params.prelu_slopes},
            {"classifier", {{"weight", detail::matrix_json(ck.params.classifier_weight)},
                            {"bias", ck.params.classifier_bias}}}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
    Checkpoint ck;
    try {
        if (j.at("format").get<std::string>() != "subpool-checkpoint") throw FormatError("checkpoint: wrong format tag");
        ck.config = EncoderConfig::from_json(j.at("encoder"));
        ck.params.arch = parse_architecture(j.at("architecture").get<std::string>());
        for (const auto& l : j.at("layers"))
            ck.params.layers.push_back({detail::matrix_from_json(l.at("weight")), l.at("bias").get<std::vector<double>>()});
        ck.params.prelu_slopes = j.at("prelu_slopes").get<std::vector<double>>();
        ck.params.classifier_weight = detail::matrix_from_json(j.at("classifier").at("weight"));
        ck.params.classifier_bias = j.at("classifier").at("bias").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    if (ck.params.arch != ck.config.arch) throw FormatError("checkpoint: architecture tag disagrees with encoder config");
    if (ck.params.prelu_slopes.size() + 1 != ck.params.layers.size())
        throw FormatError("checkpoint: slope count does not match layer count");
    for (index_t l = 0; l < ck.params.layers.size(); ++l) {
        const auto& layer = ck.params.layers[l];
        if (layer.bias.size() != layer.weight.cols()) throw FormatError("checkpoint: bias width mismatch");
        if (l > 0 && layer.weight.rows() != ck.params.layers[l - 1].weight.cols())
            throw FormatError("checkpoint: layer shapes do not chain");
    }
    if (ck.params.classifier_weight.rows() != ck.params.hidden() ||
        ck.params.classifier_bias.size() != ck.params.classifier_weight.cols())
        throw FormatError("checkpoint: classifier shape mismatch");
    return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    detail::write_file(path, checkpoint_to_json(ck).dump() + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const auto text = detail::read_file(path);
    try {
        return checkpoint_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
}

} // namespace subpool
