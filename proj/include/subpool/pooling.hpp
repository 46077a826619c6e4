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

// Subgraph pooling layer appended after the encoder: H = P·Z for the
// matrix-backed modes, per-coordinate neighbourhood max for `max`.
// The layer carries no parameters; it is built from the graph it runs on.

#include "subpool/error.hpp"
#include "subpool/numerics.hpp"
#include "subpool/sampler.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace subpool {

/// `None` is the vanilla backbone with no pooling layer at all.
enum class PoolingMode { None, Mean, Max, GcnNorm, RandomWalk };

inline std::string to_string(PoolingMode m) {
    switch (m) {
    case PoolingMode::None: return "none";
    case PoolingMode::Mean: return "mean";
    case PoolingMode::Max: return "max";
    case PoolingMode::GcnNorm: return "gcn_norm";
    case PoolingMode::RandomWalk: return "rw";
    }
    return "?";
}

inline PoolingMode parse_pooling_mode(std::string_view s) {
    if (s == "none") return PoolingMode::None;
    if (s == "mean") return PoolingMode::Mean;
    if (s == "max") return PoolingMode::Max;
    if (s == "gcn_norm" || s == "gcn") return PoolingMode::GcnNorm;
    if (s == "rw") return PoolingMode::RandomWalk;
    throw ConfigError("unknown pooling mode '" + std::string(s) + "'");
}

inline DenseMatrix apply_pooling(const PoolingMatrix& p, const DenseMatrix& z) {
    return spmm(p.matrix(), z);
}

/// Argmax row per (node, channel) from the forward max.
struct MaxPoolCache {
    index_t rows = 0;
    index_t cols = 0;
    std::vector<index_t> argmax; // rows * cols
};

/// H[i][c] = max over members j of Z[j][c]; ties go to the lowest node index.
inline std::pair<DenseMatrix, MaxPoolCache> apply_max_pooling(std::span<const Neighborhood> hoods,
                                                              const DenseMatrix& z) {
    if (hoods.size() != z.rows()) throw ShapeError("apply_max_pooling: one neighbourhood per row required");
    const index_t h = z.cols();
    DenseMatrix out(z.rows(), h);
    MaxPoolCache cache{z.rows(), h, std::vector<index_t>(z.rows() * h)};
    for (index_t i = 0; i < hoods.size(); ++i) {
        const auto& members = hoods[i].members;
        if (members.empty()) throw DomainError("apply_max_pooling: empty neighbourhood");
        for (index_t c = 0; c < h; ++c) {
            // Members are sorted ascending, so strict > keeps the lowest index on ties.
            index_t best = members.front().first;
            double best_v = z(best, c);
            for (index_t p = 1; p < members.size(); ++p) {
                const index_t j = members[p].first;
                if (z(j, c) > best_v) {
                    best_v = z(j, c);
                    best = j;
                }
            }
            out(i, c) = best_v;
            cache.argmax[i * h + c] = best;
        }
    }
    return {std::move(out), std::move(cache)};
}

/// dZ = Pᵀ·dH.
inline DenseMatrix pooling_backward(const PoolingMatrix& p, const DenseMatrix& dh) {
    return spmm_transpose(p.matrix(), dh);
}

/// Routes each dH[i][c] to the cached argmax row.
inline DenseMatrix pooling_backward(const MaxPoolCache& cache, const DenseMatrix& dh) {
    if (dh.rows() != cache.rows || dh.cols() != cache.cols)
        throw StateError("pooling_backward: upstream gradient does not match the max-pool cache");
    DenseMatrix dz(cache.rows, cache.cols);
    for (index_t i = 0; i < cache.rows; ++i)
        for (index_t c = 0; c < cache.cols; ++c) dz(cache.argmax[i * cache.cols + c], c) += dh(i, c);
    return dz;
}

/// Pooling layer bound to one graph.
class PoolingLayer {
public:
    PoolingLayer() = default;

    static PoolingLayer none() { return {}; }

    static PoolingLayer from_matrix(PoolingMatrix p, PoolingMode mode = PoolingMode::Mean) {
        PoolingLayer layer;
        layer.mode_ = mode;
        layer.matrix_ = std::move(p);
        return layer;
    }

    static PoolingLayer max(std::vector<Neighborhood> hoods) {
        PoolingLayer layer;
        layer.mode_ = PoolingMode::Max;
        layer.hoods_ = std::move(hoods);
        return layer;
    }

    /// Checks that `cfg` can produce the structure `mode` expects, then samples.
    static PoolingLayer build(const Graph& g, PoolingMode mode, const SamplerConfig& cfg) {
        cfg.validate();
        switch (mode) {
        case PoolingMode::None:
            return none();
        case PoolingMode::Max:
            return max(build_neighborhoods(g, cfg));
        case PoolingMode::Mean:
            if (cfg.kind != SamplerKind::KHop || cfg.weight_scheme != WeightScheme::Mean)
                throw ConfigError("pooling mean needs a khop sampler with mean weights");
            break;
        case PoolingMode::GcnNorm:
            if (cfg.kind != SamplerKind::KHop || cfg.weight_scheme != WeightScheme::GcnNorm)
                throw ConfigError("pooling gcn_norm needs a khop sampler with gcn_norm weights");
            break;
        case PoolingMode::RandomWalk:
            if (cfg.kind != SamplerKind::RandomWalk)
                throw ConfigError("pooling rw needs an rw sampler");
            break;
        }
        return from_matrix(build_pooling_matrix(g, cfg), mode);
    }

    PoolingMode mode() const noexcept { return mode_; }
    bool is_none() const noexcept { return mode_ == PoolingMode::None; }
    const PoolingMatrix& matrix() const noexcept { return matrix_; }
    const std::vector<Neighborhood>& neighborhoods() const noexcept { return hoods_; }

    struct Cache {
        MaxPoolCache max;
    };

    DenseMatrix forward(const DenseMatrix& z, Cache& cache) const {
        switch (mode_) {
        case PoolingMode::None:
            return z;
        case PoolingMode::Max: {
            auto [h, c] = apply_max_pooling(hoods_, z);
            cache.max = std::move(c);
            return std::move(h);
        }
        default:
            return apply_pooling(matrix_, z);
        }
    }

    DenseMatrix forward(const DenseMatrix& z) const {
        Cache scratch;
        return forward(z, scratch);
    }

    DenseMatrix backward(const Cache& cache, const DenseMatrix& dh) const {
        switch (mode_) {
        case PoolingMode::None:
            return dh;
        case PoolingMode::Max:
            return pooling_backward(cache.max, dh);
        default:
            return pooling_backward(matrix_, dh);
        }
    }

private:
    PoolingMode mode_ = PoolingMode::None;
    PoolingMatrix matrix_;
    std::vector<Neighborhood> hoods_;
};

/// Sampler configuration matching a pooling mode.
inline SamplerConfig sampler_for(PoolingMode mode, index_t k, index_t repeats = 1, std::uint64_t seed = 0) {
    switch (mode) {
    case PoolingMode::GcnNorm: return {SamplerKind::KHop, k, 1, WeightScheme::GcnNorm, seed};
    case PoolingMode::RandomWalk: return {SamplerKind::RandomWalk, k, repeats, WeightScheme::VisitCount, seed};
    default: return {SamplerKind::KHop, k, 1, WeightScheme::Mean, seed};
    }
}

} // namespace subpool
