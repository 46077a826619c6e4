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

// Per-node subgraph sampling (k-hop balls and bounded random walks) and the
// row-stochastic pooling matrix built from those neighbourhoods.
//
// Sampling is preprocessing: a PoolingMatrix is built once per (graph, config)
// and reused for every epoch. Random-walk sampling for node i draws from
// RngStream(config.seed, i), so the result does not depend on build order.

#include "subpool/error.hpp"
#include "subpool/graphstore.hpp"
#include "subpool/numerics.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace subpool {

enum class SamplerKind { KHop, RandomWalk };
enum class WeightScheme { Mean, GcnNorm, VisitCount };

inline std::string to_string(SamplerKind k) { return k == SamplerKind::KHop ? "khop" : "rw"; }

inline std::string to_string(WeightScheme w) {
    switch (w) {
    case WeightScheme::Mean: return "mean";
    case WeightScheme::GcnNorm: return "gcn_norm";
    case WeightScheme::VisitCount: return "visit_count";
    }
    return "?";
}

inline SamplerKind parse_sampler_kind(std::string_view s) {
    if (s == "khop") return SamplerKind::KHop;
    if (s == "rw") return SamplerKind::RandomWalk;
    throw ConfigError("unknown sampler kind '" + std::string(s) + "'");
}

inline WeightScheme parse_weight_scheme(std::string_view s) {
    if (s == "mean") return WeightScheme::Mean;
    if (s == "gcn_norm") return WeightScheme::GcnNorm;
    if (s == "visit_count") return WeightScheme::VisitCount;
    throw ConfigError("unknown weight scheme '" + std::string(s) + "'");
}

struct SamplerConfig {
    SamplerKind kind = SamplerKind::KHop;
    index_t k = 2;       // hop radius, or walk length for RandomWalk
    index_t repeats = 1; // walks per node (RandomWalk only)
    WeightScheme weight_scheme = WeightScheme::Mean;
    std::uint64_t seed = 0;

    static SamplerConfig khop(index_t k, WeightScheme w = WeightScheme::Mean) {
        return {SamplerKind::KHop, k, 1, w, 0};
    }
    static SamplerConfig random_walk(index_t k, index_t repeats, std::uint64_t seed) {
        return {SamplerKind::RandomWalk, k, repeats, WeightScheme::VisitCount, seed};
    }

    void validate() const {
        if (kind == SamplerKind::KHop && weight_scheme == WeightScheme::VisitCount)
            throw ConfigError("sampler: khop requires weight_scheme mean or gcn_norm");
        if (kind == SamplerKind::RandomWalk && weight_scheme != WeightScheme::VisitCount)
            throw ConfigError("sampler: rw requires weight_scheme visit_count");
        if (repeats < 1) throw ConfigError("sampler: repeats must be >= 1");
    }

    nlohmann::json to_json() const {
        return {{"kind", to_string(kind)},
                {"k", k},
                {"repeats", repeats},
                {"weight_scheme", to_string(weight_scheme)},
                {"seed", seed}};
    }

    static SamplerConfig from_json(const nlohmann::json& j) { return from_json(j, SamplerConfig{}); }

    static SamplerConfig from_json(const nlohmann::json& j, SamplerConfig base) {
        try {
            if (j.contains("kind")) {
                base.kind = parse_sampler_kind(j.at("kind").get<std::string>());
                // Pick the matching default scheme unless one is given explicitly.
                if (!j.contains("weight_scheme"))
                    base.weight_scheme = base.kind == SamplerKind::RandomWalk ? WeightScheme::VisitCount
                                                                              : WeightScheme::Mean;
            }
            if (j.contains("k")) base.k = j.at("k").get<index_t>();
            if (j.contains("repeats")) base.repeats = j.at("repeats").get<index_t>();
            if (j.contains("weight_scheme"))
                base.weight_scheme = parse_weight_scheme(j.at("weight_scheme").get<std::string>());
            if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("sampler config: ") + e.what());
        }
        base.validate();
        return base;
    }
};

/// Sampled neighbourhood of `root`; members are sorted by node id and always
/// include the root. For k-hop balls every count is 1.
struct Neighborhood {
    index_t root = 0;
    std::vector<std::pair<index_t, index_t>> members; // (node, visit count)

    index_t size() const noexcept { return members.size(); }

    index_t total_count() const noexcept {
        index_t t = 0;
        for (auto [_, c] : members) t += c;
        return t;
    }

    index_t count_of(index_t node) const noexcept {
        for (auto [v, c] : members)
            if (v == node) return c;
        return 0;
    }

    std::vector<index_t> nodes() const {
        std::vector<index_t> out;
        out.reserve(members.size());
        for (auto [v, _] : members) out.push_back(v);
        return out;
    }
};

namespace detail {

/// Reusable BFS scratch space; `stamp` avoids clearing O(n) state per root.
class BfsWorkspace {
public:
    explicit BfsWorkspace(index_t n) : stamp_(n, 0) {}

    std::vector<index_t> ball(const Graph& g, index_t root, index_t k) {
        if (++generation_ == 0) {
            std::fill(stamp_.begin(), stamp_.end(), 0);
            generation_ = 1;
        }
        std::vector<index_t> visited{root};
        stamp_[root] = generation_;
        index_t frontier_begin = 0;
        for (index_t hop = 0; hop < k; ++hop) {
            const index_t frontier_end = visited.size();
            if (frontier_begin == frontier_end) break;
            for (index_t f = frontier_begin; f < frontier_end; ++f) {
                for (index_t nb : g.neighbors(visited[f])) {
                    if (stamp_[nb] == generation_) continue;
                    stamp_[nb] = generation_;
                    visited.push_back(nb);
                }
            }
            frontier_begin = frontier_end;
        }
        std::sort(visited.begin(), visited.end());
        return visited;
    }

private:
    std::vector<std::uint32_t> stamp_;
    std::uint32_t generation_ = 0;
};

inline Neighborhood to_neighborhood(index_t root, const std::vector<index_t>& sorted_nodes) {
    Neighborhood nb{root, {}};
    nb.members.reserve(sorted_nodes.size());
    for (index_t v : sorted_nodes) nb.members.emplace_back(v, 1);
    return nb;
}

inline void check_node(const Graph& g, index_t node, const char* who) {
    if (node >= g.num_nodes)
        throw DomainError(std::string(who) + ": node " + std::to_string(node) + " >= num_nodes");
}

} // namespace detail

/// All nodes within hop distance <= k of `node`, root included.
inline Neighborhood sample_khop(const Graph& g, index_t node, index_t k) {
    detail::check_node(g, node, "sample_khop");
    detail::BfsWorkspace ws(g.num_nodes);
    return detail::to_neighborhood(node, ws.ball(g, node, k));
}

/// `repeats` independent walks of exactly k uniform neighbour steps (cut short
/// at a degree-0 node). Every visited position, including each walk's start,
/// adds one to that node's count.
inline Neighborhood sample_rw(const Graph& g, index_t node, index_t k, index_t repeats, RngStream& rng) {
    detail::check_node(g, node, "sample_rw");
    if (k < 1) throw DomainError("sample_rw: walk length k must be >= 1");
    if (repeats < 1) throw DomainError("sample_rw: repeats must be >= 1");
    std::vector<index_t> visits;
    visits.reserve(repeats * (k + 1));
    for (index_t r = 0; r < repeats; ++r) {
        index_t pos = node;
        visits.push_back(pos);
        for (index_t step = 0; step < k; ++step) {
            auto nb = g.neighbors(pos);
            if (nb.empty()) break;
            pos = nb[rng.uniform_index(nb.size())];
            visits.push_back(pos);
        }
    }
    std::sort(visits.begin(), visits.end());
    Neighborhood out{node, {}};
    for (index_t v : visits) {
        if (!out.members.empty() && out.members.back().first == v)
            ++out.members.back().second;
        else
            out.members.emplace_back(v, 1);
    }
    return out;
}

/// One neighbourhood per node under `cfg`. k = 0 gives singletons.
inline std::vector<Neighborhood> build_neighborhoods(const Graph& g, const SamplerConfig& cfg) {
    cfg.validate();
    std::vector<Neighborhood> out;
    out.reserve(g.num_nodes);
    if (cfg.k == 0) {
        for (index_t i = 0; i < g.num_nodes; ++i) out.push_back({i, {{i, 1}}});
        return out;
    }
    if (cfg.kind == SamplerKind::KHop) {
        detail::BfsWorkspace ws(g.num_nodes);
        for (index_t i = 0; i < g.num_nodes; ++i) out.push_back(detail::to_neighborhood(i, ws.ball(g, i, cfg.k)));
    } else {
        for (index_t i = 0; i < g.num_nodes; ++i) {
            RngStream rng(cfg.seed, i);
            out.push_back(sample_rw(g, i, cfg.k, cfg.repeats, rng));
        }
    }
    return out;
}

// -----------------------------------------------------------------------------
// PoolingMatrix
// -----------------------------------------------------------------------------

/// Row-stochastic n×n matrix P with strictly positive entries; row i is
/// supported on node i's neighbourhood, so H = P·Z realises subgraph pooling.
class PoolingMatrix {
public:
    static constexpr double kRowSumTolerance = 1e-12;

    PoolingMatrix() = default;

    explicit PoolingMatrix(SparseMatrix m) : m_(std::move(m)) {
        if (m_.rows() != m_.cols()) throw ShapeError("PoolingMatrix: must be square");
        for (index_t i = 0; i < m_.rows(); ++i) {
            double s = 0.0;
            for (double v : m_.row_values(i)) {
                if (!(v > 0.0)) throw DomainError("PoolingMatrix: non-positive weight in row " + std::to_string(i));
                s += v;
            }
            if (std::abs(s - 1.0) > kRowSumTolerance)
                throw DomainError("PoolingMatrix: row " + std::to_string(i) + " sums to " + std::to_string(s));
        }
    }

    static PoolingMatrix identity(index_t n) { return PoolingMatrix(SparseMatrix::identity(n)); }

    /// Uniform weights over each neighbourhood's distinct members.
    static PoolingMatrix uniform_over(std::span<const Neighborhood> hoods) {
        return from_weights(hoods, [](const Neighborhood& nb, index_t) { return 1.0 / static_cast<double>(nb.size()); });
    }

    const SparseMatrix& matrix() const noexcept { return m_; }
    index_t size() const noexcept { return m_.rows(); }

    template <typename WeightFn>
    static PoolingMatrix from_weights(std::span<const Neighborhood> hoods, WeightFn&& weight) {
        const index_t n = hoods.size();
        std::vector<index_t> row_ptr(n + 1, 0);
        std::vector<index_t> col_idx;
        std::vector<double> values;
        for (index_t i = 0; i < n; ++i) {
            const auto& nb = hoods[i];
            if (nb.root != i) throw StateError("PoolingMatrix: neighbourhood order does not match node ids");
            for (index_t p = 0; p < nb.members.size(); ++p) {
                col_idx.push_back(nb.members[p].first);
                values.push_back(weight(nb, p));
            }
            row_ptr[i + 1] = col_idx.size();
        }
        return PoolingMatrix(SparseMatrix(n, n, std::move(row_ptr), std::move(col_idx), std::move(values)));
    }

private:
    SparseMatrix m_;
};

/// Materialises the pooling matrix for every node of `g`.
///   mean        1/|N(i)|
///   gcn_norm    ∝ 1/sqrt((d_i+1)(d_j+1)), renormalised per row
///   visit_count count_j / Σ counts
/// k = 0 yields the identity (pooling disabled).
inline PoolingMatrix build_pooling_matrix(const Graph& g, const SamplerConfig& cfg) {
    cfg.validate();
    if (cfg.k == 0) return PoolingMatrix::identity(g.num_nodes);
    const auto hoods = build_neighborhoods(g, cfg);
    switch (cfg.weight_scheme) {
    case WeightScheme::Mean:
        return PoolingMatrix::uniform_over(hoods);
    case WeightScheme::GcnNorm: {
        std::vector<double> inv_sqrt(g.num_nodes);
        for (index_t i = 0; i < g.num_nodes; ++i)
            inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i)) + 1.0);
        std::vector<double> row_total(g.num_nodes, 0.0);
        for (const auto& nb : hoods)
            for (auto [v, _] : nb.members) row_total[nb.root] += inv_sqrt[nb.root] * inv_sqrt[v];
        return PoolingMatrix::from_weights(hoods, [&](const Neighborhood& nb, index_t p) {
            return inv_sqrt[nb.root] * inv_sqrt[nb.members[p].first] / row_total[nb.root];
        });
    }
    case WeightScheme::VisitCount:
        return PoolingMatrix::from_weights(hoods, [](const Neighborhood& nb, index_t p) {
            return static_cast<double>(nb.members[p].second) / static_cast<double>(nb.total_count());
        });
    }
    throw ConfigError("build_pooling_matrix: unknown weight scheme");
}

// -----------------------------------------------------------------------------
// Cache file: one JSON header line, then little-endian u64 row_ptr, u64 col_idx,
// f64 values.
// -----------------------------------------------------------------------------

namespace detail {

template <typename T>
void append_le(std::string& out, T value) {
    static_assert(sizeof(T) == 8);
    auto raw = std::bit_cast<std::uint64_t>(value);
    if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap64(raw);
    char buf[8];
    std::memcpy(buf, &raw, 8);
    out.append(buf, 8);
}

template <typename T>
T read_le(std::string_view bytes, index_t offset) {
    std::uint64_t raw;
    std::memcpy(&raw, bytes.data() + offset, 8);
    if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap64(raw);
    return std::bit_cast<T>(raw);
}

} // namespace detail

inline void save_pooling_cache(const PoolingMatrix& p, const SamplerConfig& cfg,
                               const std::filesystem::path& path) {
    const auto& m = p.matrix();
    nlohmann::json header = {{"rows", m.rows()},
                             {"nnz", m.nnz()},
                             {"index_encoding", "u64-le"},
                             {"value_encoding", "f64-le"},
                             {"config", cfg.to_json()}};
    std::string out = header.dump() + "\n";
    for (index_t v : m.row_ptr()) detail::append_le<std::uint64_t>(out, v);
    for (index_t v : m.col_idx()) detail::append_le<std::uint64_t>(out, v);
    for (double v : m.values()) detail::append_le<double>(out, v);
    detail::write_file(path, out);
}

struct LoadedPoolingCache {
    PoolingMatrix matrix;
    SamplerConfig config;
};

inline LoadedPoolingCache load_pooling_cache(const std::filesystem::path& path) {
    const std::string bytes = detail::read_file(path);
    const auto nl = bytes.find('\n');
    if (nl == std::string::npos) throw FormatError("pooling cache: missing header line");
    nlohmann::json header;
    index_t rows = 0, nnz = 0;
    SamplerConfig cfg;
    try {
        header = nlohmann::json::parse(bytes.substr(0, nl));
        rows = header.at("rows").get<index_t>();
        nnz = header.at("nnz").get<index_t>();
        cfg = SamplerConfig::from_json(header.at("config"));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("pooling cache header: ") + e.what());
    }
    const std::string_view body(bytes.data() + nl + 1, bytes.size() - nl - 1);
    if (body.size() != 8 * ((rows + 1) + 2 * nnz)) throw FormatError("pooling cache: body length mismatch");
    std::vector<index_t> row_ptr(rows + 1), col_idx(nnz);
    std::vector<double> values(nnz);
    index_t off = 0;
    for (auto& v : row_ptr) { v = detail::read_le<std::uint64_t>(body, off); off += 8; }
    for (auto& v : col_idx) { v = detail::read_le<std::uint64_t>(body, off); off += 8; }
    for (auto& v : values) { v = detail::read_le<double>(body, off); off += 8; }
    return {PoolingMatrix(SparseMatrix(rows, rows, std::move(row_ptr), std::move(col_idx), std::move(values))), cfg};
}

} // namespace subpool
