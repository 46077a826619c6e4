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

// Executable checks for the mean-pooling margin bound.
//
// For a source node u with n pooled neighbours and a target node v with m:
//   h_u = (z_u + Σ z_i)/(n+1),  h_v = (z_v + Σ z_j)/(m+1)
//   Δ   = (n‖z_u − z_v‖ − ((m−n)/(m+1))‖z_v‖)/(n+1)
//   term_b = ‖Σ z_i/(n+1) − Σ z_j/(m+1)‖
// The decomposition bound is ‖h_u − h_v‖ ≤ (‖z_u − z_v‖ − Δ) + term_b and the
// headline bound drops term_b.
//
// The margin splits (m+1)z_u − (n+1)z_v as (m+1)(z_u − z_v) + (m−n)z_v and
// bounds the second norm by (m−n)‖z_v‖; that step needs |m−n|, so for n > m
// the decomposition bound can fail. `bound_abs` carries the |m−n| form, which
// is a plain triangle inequality and always holds.

#include "subpool/discrepancy.hpp"
#include "subpool/error.hpp"
#include "subpool/graphstore.hpp"
#include "subpool/numerics.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace subpool {

inline constexpr double kMarginRelativeTolerance = 1e-9;

inline double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

inline bool within_bound(double lhs, double bound) {
    return lhs <= bound + kMarginRelativeTolerance * std::max(1.0, std::abs(bound));
}

inline double delta_margin(std::span<const double> z_u, std::span<const double> z_v, index_t n, index_t m) {
    if (z_u.size() != z_v.size()) throw ShapeError("delta_margin: dimension mismatch");
    const double dn = static_cast<double>(n);
    const double dm = static_cast<double>(m);
    return (dn * l2_distance(z_u, z_v) - ((dm - dn) / (dm + 1.0)) * l2_norm(z_v)) / (dn + 1.0);
}

struct MarginReport {
    double delta = 0.0;
    double lhs = 0.0;       // ‖h_u − h_v‖
    double node_dist = 0.0; // ‖z_u − z_v‖
    double term_b = 0.0;
    double bound = 0.0;     // node_dist − Δ + term_b
    bool holds = false;
    bool headline_holds = false; // lhs ≤ node_dist − Δ
    double bound_abs = 0.0;      // same chain with |m − n|
    bool holds_abs = false;
    index_t n = 0;
    index_t m = 0;
};

/// Neighbour lists are given as matrices with one embedding per row (0 rows allowed).
inline MarginReport check_theorem1(std::span<const double> z_u, std::span<const double> z_v,
                                   const DenseMatrix& neighbors_u, const DenseMatrix& neighbors_v) {
    const index_t d = z_u.size();
    if (z_v.size() != d || (neighbors_u.rows() > 0 && neighbors_u.cols() != d) ||
        (neighbors_v.rows() > 0 && neighbors_v.cols() != d))
        throw ShapeError("check_theorem1: dimension mismatch");
    MarginReport r;
    r.n = neighbors_u.rows();
    r.m = neighbors_v.rows();
    const double n1 = static_cast<double>(r.n) + 1.0;
    const double m1 = static_cast<double>(r.m) + 1.0;

    std::vector<double> sum_u(d, 0.0), sum_v(d, 0.0);
    if (r.n > 0) sum_u = column_sums(neighbors_u);
    if (r.m > 0) sum_v = column_sums(neighbors_v);

    std::vector<double> h_u(d), h_v(d), b_u(d), b_v(d);
    for (index_t j = 0; j < d; ++j) {
        h_u[j] = (z_u[j] + sum_u[j]) / n1;
        h_v[j] = (z_v[j] + sum_v[j]) / m1;
        b_u[j] = sum_u[j] / n1;
        b_v[j] = sum_v[j] / m1;
    }
    r.lhs = l2_distance(h_u, h_v);
    r.node_dist = l2_distance(z_u, z_v);
    r.delta = delta_margin(z_u, z_v, r.n, r.m);
    r.term_b = l2_distance(b_u, b_v);
    r.bound = r.node_dist - r.delta + r.term_b;
    r.holds = within_bound(r.lhs, r.bound);
    r.headline_holds = within_bound(r.lhs, r.node_dist - r.delta);

    const double dn = static_cast<double>(r.n);
    const double dm = static_cast<double>(r.m);
    const double delta_abs = (dn * r.node_dist - (std::abs(dm - dn) / (dm + 1.0)) * l2_norm(z_v)) / (dn + 1.0);
    r.bound_abs = r.node_dist - delta_abs + r.term_b;
    r.holds_abs = within_bound(r.lhs, r.bound_abs);
    return r;
}

/// z_uᵀz_u / z_uᵀz_v, undefined when the denominator vanishes.
inline std::optional<double> pair_lambda(std::span<const double> z_u, std::span<const double> z_v) {
    const double denom = dot(z_u, z_v);
    if (std::abs(denom) < kLambdaDenominatorFloor) return std::nullopt;
    return dot(z_u, z_u) / denom;
}

enum class CorollaryTag { Cor1Size, Cor1Large, Cor2, None, Indeterminate };

inline std::string to_string(CorollaryTag t) {
    switch (t) {
    case CorollaryTag::Cor1Size: return "cor1_size";
    case CorollaryTag::Cor1Large: return "cor1_large";
    case CorollaryTag::Cor2: return "cor2";
    case CorollaryTag::None: return "none";
    case CorollaryTag::Indeterminate: return "indeterminate";
    }
    return "?";
}

/// Which corollary covers a pair. cor1_large needs the distance ratio
/// ‖z_u − z_v‖/‖z_v‖; without it that branch is never reported.
inline CorollaryTag corollary_conditions(index_t n, index_t m, std::optional<double> lambda_pair,
                                         std::optional<double> distance_ratio = std::nullopt) {
    if (n >= m) return CorollaryTag::Cor1Size;
    if (!lambda_pair) return CorollaryTag::Indeterminate;
    if (*lambda_pair >= 2.0) return CorollaryTag::Cor2;
    if (distance_ratio && n >= 1) {
        const double dn = static_cast<double>(n);
        const double dm = static_cast<double>(m);
        if (*distance_ratio >= (dm - dn) / (dn * (dm + 1.0))) return CorollaryTag::Cor1Large;
    }
    return CorollaryTag::None;
}

// -----------------------------------------------------------------------------
// Randomised check
// -----------------------------------------------------------------------------

struct TheoryCheckSummary {
    index_t trials = 0;
    std::uint64_t seed = 0;
    index_t violations = 0;          // decomposition bound as stated
    index_t violations_n_gt_m = 0;
    index_t violations_abs = 0;      // |m − n| form
    index_t headline_satisfied = 0;
    index_t delta_positive = 0;
    index_t delta_negative = 0;
    double delta_min = std::numeric_limits<double>::infinity();
    double delta_max = -std::numeric_limits<double>::infinity();
    double delta_mean = 0.0;
    index_t n_ge_m_trials = 0;
    index_t n_ge_m_delta_nonnegative = 0;
    index_t cor2_trials = 0;
    index_t cor2_delta_nonnegative = 0;  // headline bound ≤ node distance
    index_t cor2_n_zero = 0;
    index_t cor2_n_zero_delta_nonnegative = 0;
    index_t indeterminate = 0;

    double headline_rate() const { return trials ? static_cast<double>(headline_satisfied) / trials : 0.0; }

    nlohmann::json to_json() const {
        return {{"trials", trials},
                {"seed", seed},
                {"violations", violations},
                {"violations_n_gt_m", violations_n_gt_m},
                {"violations_abs_margin", violations_abs},
                {"headline_bound_rate", headline_rate()},
                {"delta", {{"positive", delta_positive},
                           {"negative", delta_negative},
                           {"min", delta_min},
                           {"max", delta_max},
                           {"mean", delta_mean}}},
                {"n_ge_m", {{"trials", n_ge_m_trials}, {"delta_nonnegative", n_ge_m_delta_nonnegative}}},
                {"cor2", {{"trials", cor2_trials},
                          {"delta_nonnegative", cor2_delta_nonnegative},
                          {"n_zero_trials", cor2_n_zero},
                          {"n_zero_delta_nonnegative", cor2_n_zero_delta_nonnegative}}},
                {"indeterminate", indeterminate}};
    }
};

/// Trial distribution: dimension uniform in [1, 8], neighbour counts n, m
/// uniform in [0, 20], every entry N(0, 1).
inline TheoryCheckSummary run_theory_check(index_t trials, std::uint64_t seed) {
    TheoryCheckSummary s;
    s.trials = trials;
    s.seed = seed;
    RngStream rng(seed, 0);
    double delta_sum = 0.0;
    for (index_t t = 0; t < trials; ++t) {
        const index_t d = 1 + rng.uniform_index(8);
        const index_t n = rng.uniform_index(21);
        const index_t m = rng.uniform_index(21);
        auto draw = [&](index_t rows) {
            DenseMatrix x(rows, d);
            for (double& v : x.data()) v = rng.normal();
            return x;
        };
        const DenseMatrix zu = draw(1), zv = draw(1), nu = draw(n), nv = draw(m);
        const auto r = check_theorem1(zu.row(0), zv.row(0), nu, nv);

        if (!r.holds) {
            ++s.violations;
            if (n > m) ++s.violations_n_gt_m;
        }
        if (!r.holds_abs) ++s.violations_abs;
        if (r.headline_holds) ++s.headline_satisfied;
        if (r.delta > 0.0) ++s.delta_positive;
        if (r.delta < 0.0) ++s.delta_negative;
        s.delta_min = std::min(s.delta_min, r.delta);
        s.delta_max = std::max(s.delta_max, r.delta);
        delta_sum += r.delta;

        if (n >= m) {
            ++s.n_ge_m_trials;
            if (r.delta >= 0.0) ++s.n_ge_m_delta_nonnegative;
        }
        const auto tag = corollary_conditions(n, m, pair_lambda(zu.row(0), zv.row(0)));
        if (tag == CorollaryTag::Indeterminate) ++s.indeterminate;
        if (tag == CorollaryTag::Cor2) {
            if (n == 0) {
                ++s.cor2_n_zero;
                if (r.delta >= 0.0) ++s.cor2_n_zero_delta_nonnegative;
            } else {
                ++s.cor2_trials;
                if (r.delta >= 0.0) ++s.cor2_delta_nonnegative;
            }
        }
    }
    s.delta_mean = trials ? delta_sum / static_cast<double>(trials) : 0.0;
    return s;
}

// -----------------------------------------------------------------------------
// Over-smoothing fixture
// -----------------------------------------------------------------------------

struct TwinFixture {
    Graph graph;
    index_t u = 0;
    index_t v = 1;
};

/// Twin nodes u = 0 and v = 1 share features and the neighbour set {2, 3, 4},
/// are not adjacent, and carry labels 0 and 1. A second ring of nodes
/// (5..10) hangs off the shared neighbours so walks of length > 1 diverge.
inline TwinFixture oversmoothing_fixture(RngStream& rng, index_t feature_dim = 4) {
    const index_t n = 11;
    const std::vector<Edge> edges = {{0, 2}, {0, 3}, {0, 4}, {1, 2}, {1, 3}, {1, 4}, {2, 5}, {2, 6},
                                     {3, 7}, {4, 8}, {4, 9}, {5, 7}, {6, 10}, {8, 10}, {9, 10}};
    DenseMatrix x(n, feature_dim);
    for (double& v : x.data()) v = rng.normal();
    for (index_t j = 0; j < feature_dim; ++j) x(1, j) = x(0, j);
    std::vector<int> labels(n);
    labels[0] = 0;
    labels[1] = 1;
    for (index_t i = 2; i < n; ++i) labels[i] = static_cast<int>(rng.uniform_index(2));
    return {make_graph("twins", n, edges, std::move(x), std::move(labels), 2), 0, 1};
}

/// Minimum of ½Σ_i (wᵀh_i + b − y_i)² over all affine maps (closed form: the
/// residual of the centred targets after projecting onto the span of the
/// centred feature columns, via modified Gram-Schmidt).
inline double least_squares_risk(const DenseMatrix& h, std::span<const double> y) {
    if (h.rows() != y.size() || h.rows() == 0) throw ShapeError("least_squares_risk: rows != targets");
    const index_t n = h.rows();
    const auto mu = column_means(h);
    double y_mean = 0.0;
    for (double v : y) y_mean += v;
    y_mean /= static_cast<double>(n);

    std::vector<double> r(n);
    for (index_t i = 0; i < n; ++i) r[i] = y[i] - y_mean;

    std::vector<std::vector<double>> basis;
    double scale = 0.0;
    for (double v : h.data()) scale = std::max(scale, std::abs(v));
    const double rank_tol = 1e-12 * std::max(1.0, scale) * std::sqrt(static_cast<double>(n));
    for (index_t c = 0; c < h.cols(); ++c) {
        std::vector<double> q(n);
        for (index_t i = 0; i < n; ++i) q[i] = h(i, c) - mu[c];
        for (const auto& b : basis) {
            const double proj = dot(q, b);
            for (index_t i = 0; i < n; ++i) q[i] -= proj * b[i];
        }
        const double norm = l2_norm(q);
        if (norm <= rank_tol) continue;
        for (double& v : q) v /= norm;
        const double proj = dot(r, q);
        for (index_t i = 0; i < n; ++i) r[i] -= proj * q[i];
        basis.push_back(std::move(q));
    }
    return 0.5 * dot(r, r);
}

} // namespace subpool
