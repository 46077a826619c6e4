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

// Source/target embedding discrepancy measures.
//
// cmd: central moment discrepancy normalised by the joint value interval
//      [a, b] of both inputs:
//        ‖E(Zs) − E(Zt)‖/|b−a| + Σ_{k=2..K} ‖c_k(Zs) − c_k(Zt)‖/|b−a|^k
// node_lambda: Monte-Carlo mean of z_uᵀz_u / z_uᵀz_v over random cross pairs.
// subgraph_epsilon: Monte-Carlo mean distance between uniformly mean-pooled
//      neighbourhood embeddings (root included) over random cross pairs.

#include "subpool/error.hpp"
#include "subpool/graphstore.hpp"
#include "subpool/numerics.hpp"
#include "subpool/sampler.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace subpool {

inline std::vector<double> column_means(const DenseMatrix& z) {
    if (z.rows() == 0) throw DomainError("column_means: empty matrix");
    auto sums = column_sums(z);
    for (double& s : sums) s /= static_cast<double>(z.rows());
    return sums;
}

/// Per-column mean of (z − mean)^k. k = 1 is identically zero.
inline std::vector<double> central_moment(const DenseMatrix& z, int k) {
    if (z.rows() == 0) throw DomainError("central_moment: empty matrix");
    if (k < 1) throw DomainError("central_moment: order must be >= 1");
    std::vector<double> out(z.cols(), 0.0);
    if (k == 1) return out;
    const auto mu = column_means(z);
    for (index_t i = 0; i < z.rows(); ++i) {
        auto r = z.row(i);
        for (index_t j = 0; j < z.cols(); ++j) {
            const double c = r[j] - mu[j];
            double p = c;
            for (int e = 1; e < k; ++e) p *= c;
            out[j] += p;
        }
    }
    for (double& v : out) v /= static_cast<double>(z.rows());
    return out;
}

inline double l2_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (index_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (index_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// ‖E(Zs) − E(Zt)‖ followed by ‖c_k(Zs) − c_k(Zt)‖ for k = 2..K (unnormalised).
inline std::vector<double> moment_gaps(const DenseMatrix& zs, const DenseMatrix& zt, int max_order = 3) {
    if (zs.cols() != zt.cols()) throw ShapeError("moment_gaps: embedding widths differ");
    std::vector<double> out;
    out.push_back(l2_distance(column_means(zs), column_means(zt)));
    for (int k = 2; k <= max_order; ++k) out.push_back(l2_distance(central_moment(zs, k), central_moment(zt, k)));
    return out;
}

inline double cmd(const DenseMatrix& zs, const DenseMatrix& zt, int max_order = 3) {
    if (zs.cols() != zt.cols()) throw ShapeError("cmd: embedding widths differ");
    if (zs.rows() == 0 || zt.rows() == 0) throw DomainError("cmd: empty input");
    if (max_order < 1) throw DomainError("cmd: K must be >= 1");
    auto [lo_s, hi_s] = std::minmax_element(zs.data().begin(), zs.data().end());
    auto [lo_t, hi_t] = std::minmax_element(zt.data().begin(), zt.data().end());
    const double range = std::max(*hi_s, *hi_t) - std::min(*lo_s, *lo_t);
    // Zero range means every entry of both inputs is the same constant.
    if (range == 0.0) return 0.0;
    const auto gaps = moment_gaps(zs, zt, max_order);
    double total = 0.0;
    double scale = 1.0;
    for (double gap : gaps) {
        scale *= range;
        total += gap / scale;
    }
    return total;
}

struct LambdaEstimate {
    double lambda_hat = 0.0;
    index_t num_pairs = 0;
    index_t skipped_pairs = 0;
};

inline constexpr double kLambdaDenominatorFloor = 1e-9;

inline LambdaEstimate node_lambda_pairs(const DenseMatrix& zs, const DenseMatrix& zt,
                                        std::span<const Edge> pairs) {
    if (zs.cols() != zt.cols()) throw ShapeError("node_lambda: embedding widths differ");
    if (pairs.empty()) throw DomainError("node_lambda: need at least one pair");
    LambdaEstimate est{0.0, pairs.size(), 0};
    double sum = 0.0;
    for (auto [u, v] : pairs) {
        if (u >= zs.rows() || v >= zt.rows()) throw DomainError("node_lambda: pair index out of range");
        const double denom = dot(zs.row(u), zt.row(v));
        if (std::abs(denom) < kLambdaDenominatorFloor) {
            ++est.skipped_pairs;
            continue;
        }
        sum += dot(zs.row(u), zs.row(u)) / denom;
    }
    if (2 * est.skipped_pairs > est.num_pairs)
        throw DegeneracyError("node_lambda: " + std::to_string(est.skipped_pairs) + " of " +
                              std::to_string(est.num_pairs) + " pairs have a vanishing denominator");
    est.lambda_hat = sum / static_cast<double>(est.num_pairs - est.skipped_pairs);
    return est;
}

inline std::vector<Edge> random_cross_pairs(index_t ns, index_t nt, index_t num_pairs, RngStream& rng) {
    if (ns == 0 || nt == 0) throw DomainError("random_cross_pairs: empty node set");
    std::vector<Edge> pairs(num_pairs);
    for (auto& p : pairs) {
        p.first = rng.uniform_index(ns);
        p.second = rng.uniform_index(nt);
    }
    return pairs;
}

inline LambdaEstimate node_lambda(const DenseMatrix& zs, const DenseMatrix& zt, index_t num_pairs, RngStream& rng) {
    if (num_pairs < 1) throw DomainError("node_lambda: num_pairs must be >= 1");
    return node_lambda_pairs(zs, zt, random_cross_pairs(zs.rows(), zt.rows(), num_pairs, rng));
}

/// Uniform mean over each node's distinct sampled members, root included.
inline DenseMatrix mean_pooled_subgraphs(const Graph& g, const DenseMatrix& z, const SamplerConfig& cfg) {
    if (z.rows() != g.num_nodes) throw ShapeError("subgraph_epsilon: embedding rows != graph nodes");
    const auto hoods = build_neighborhoods(g, cfg);
    return spmm(PoolingMatrix::uniform_over(hoods).matrix(), z);
}

inline double subgraph_epsilon_pairs(const Graph& gs, const Graph& gt, const DenseMatrix& zs, const DenseMatrix& zt,
                                     const SamplerConfig& cfg, std::span<const Edge> pairs) {
    if (zs.cols() != zt.cols()) throw ShapeError("subgraph_epsilon: embedding widths differ");
    if (pairs.empty()) throw DomainError("subgraph_epsilon: need at least one pair");
    const DenseMatrix hs = mean_pooled_subgraphs(gs, zs, cfg);
    const DenseMatrix ht = mean_pooled_subgraphs(gt, zt, cfg);
    double sum = 0.0;
    for (auto [u, v] : pairs) {
        if (u >= hs.rows() || v >= ht.rows()) throw DomainError("subgraph_epsilon: pair index out of range");
        sum += l2_distance(hs.row(u), ht.row(v));
    }
    return sum / static_cast<double>(pairs.size());
}

inline double subgraph_epsilon(const Graph& gs, const Graph& gt, const DenseMatrix& zs, const DenseMatrix& zt,
                               const SamplerConfig& cfg, index_t num_pairs, RngStream& rng) {
    if (num_pairs < 1) throw DomainError("subgraph_epsilon: num_pairs must be >= 1");
    return subgraph_epsilon_pairs(gs, gt, zs, zt, cfg, random_cross_pairs(gs.num_nodes, gt.num_nodes, num_pairs, rng));
}

struct DiscrepancyReport {
    double cmd = 0.0;
    int K = 3;
    double lambda_hat = 0.0;
    double epsilon_khop = 0.0;
    double epsilon_rw = 0.0;
    index_t num_pairs = 0;
    index_t skipped_pairs = 0;

    nlohmann::json to_json() const {
        return {{"cmd", cmd},
                {"K", K},
                {"lambda_hat", lambda_hat},
                {"epsilon_khop", epsilon_khop},
                {"epsilon_rw", epsilon_rw},
                {"num_pairs", num_pairs},
                {"skipped_pairs", skipped_pairs}};
    }
};

/// All four measures for one source/target embedding pair. λ and both ε use
/// the same random pairs.
inline DiscrepancyReport measure_discrepancy(const Graph& gs, const Graph& gt, const DenseMatrix& zs,
                                             const DenseMatrix& zt, const SamplerConfig& khop_cfg,
                                             const SamplerConfig& rw_cfg, index_t num_pairs, RngStream& rng,
                                             int max_order = 3) {
    const auto pairs = random_cross_pairs(gs.num_nodes, gt.num_nodes, num_pairs, rng);
    DiscrepancyReport r;
    r.K = max_order;
    r.cmd = cmd(zs, zt, max_order);
    const auto lam = node_lambda_pairs(zs, zt, pairs);
    r.lambda_hat = lam.lambda_hat;
    r.num_pairs = lam.num_pairs;
    r.skipped_pairs = lam.skipped_pairs;
    r.epsilon_khop = subgraph_epsilon_pairs(gs, gt, zs, zt, khop_cfg, pairs);
    r.epsilon_rw = subgraph_epsilon_pairs(gs, gt, zs, zt, rw_cfg, pairs);
    return r;
}

} // namespace subpool
