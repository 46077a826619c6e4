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

// Undirected attributed graphs: in-memory model, the on-disk dataset
// directory format, GCN normalisation, node splits, edge permutation and
// stochastic-block-model generation.
//
// Dataset directory layout:
//   meta.json      {name, num_nodes, num_edges, feature_dim, num_classes, feature_encoding}
//   edges.csv      "src,dst" per line (directed pairs; symmetrised on load)
//   features.csv   one comma-separated row per node          (feature_encoding = "text-csv")
//   features.f32   little-endian f32, row-major, n*d values  (feature_encoding = "binary-f32")
//   labels.csv     "node_id,label" per line; absent nodes are unlabeled

#include "subpool/error.hpp"
#include "subpool/numerics.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_set>
#include <utility>
#include <vector>

namespace subpool {

inline constexpr int kUnlabeled = -1;

using Edge = std::pair<index_t, index_t>;

struct Graph {
    std::string name;
    index_t num_nodes = 0;
    SparseMatrix adjacency;  // symmetric, binary, zero diagonal
    DenseMatrix features;    // num_nodes x d
    std::vector<int> labels; // class in [0, num_classes) or kUnlabeled
    int num_classes = 0;

    index_t num_edges() const noexcept { return adjacency.nnz() / 2; }
    index_t feature_dim() const noexcept { return features.cols(); }
    index_t degree(index_t i) const noexcept { return adjacency.row_nnz(i); }
    std::span<const index_t> neighbors(index_t i) const noexcept { return adjacency.row_cols(i); }

    bool is_labeled(index_t i) const noexcept { return labels[i] != kUnlabeled; }

    std::vector<index_t> labeled_nodes() const {
        std::vector<index_t> out;
        for (index_t i = 0; i < num_nodes; ++i)
            if (is_labeled(i)) out.push_back(i);
        return out;
    }

    /// Each undirected edge once as (min, max), ascending.
    std::vector<Edge> undirected_edges() const {
        std::vector<Edge> out;
        out.reserve(num_edges());
        for (index_t i = 0; i < num_nodes; ++i)
            for (index_t j : neighbors(i))
                if (i < j) out.emplace_back(i, j);
        return out;
    }

    void validate() const {
        if (adjacency.rows() != num_nodes || adjacency.cols() != num_nodes)
            throw ShapeError("Graph: adjacency is not num_nodes x num_nodes");
        if (features.rows() != num_nodes) throw ShapeError("Graph: features.rows != num_nodes");
        if (labels.size() != num_nodes) throw ShapeError("Graph: labels.size != num_nodes");
        for (index_t i = 0; i < num_nodes; ++i) {
            if (adjacency.at(i, i) != 0.0) throw FormatError("Graph: self-loop stored at " + std::to_string(i));
            if (labels[i] != kUnlabeled && (labels[i] < 0 || labels[i] >= num_classes))
                throw FormatError("Graph: label out of range at node " + std::to_string(i));
        }
        if (!adjacency.is_symmetric()) throw FormatError("Graph: adjacency not symmetric");
        if (!features.all_finite()) throw NumericError("Graph: non-finite feature");
    }
};

/// Binary symmetric adjacency from directed pairs: symmetrised, deduplicated,
/// self-loops dropped.
inline SparseMatrix adjacency_from_edges(index_t n, std::span<const Edge> edges) {
    std::vector<std::vector<index_t>> rows(n);
    for (auto [u, v] : edges) {
        if (u >= n || v >= n) {
            throw FormatError("edge (" + std::to_string(u) + "," + std::to_string(v) +
                              ") references a node >= num_nodes=" + std::to_string(n));
        }
        if (u == v) continue;
        rows[u].push_back(v);
        rows[v].push_back(u);
    }
    std::vector<index_t> row_ptr(n + 1, 0);
    std::vector<index_t> col_idx;
    for (index_t i = 0; i < n; ++i) {
        auto& r = rows[i];
        std::sort(r.begin(), r.end());
        r.erase(std::unique(r.begin(), r.end()), r.end());
        col_idx.insert(col_idx.end(), r.begin(), r.end());
        row_ptr[i + 1] = col_idx.size();
    }
    std::vector<double> values(col_idx.size(), 1.0);
    return SparseMatrix(n, n, std::move(row_ptr), std::move(col_idx), std::move(values));
}

inline Graph make_graph(std::string name, index_t n, std::span<const Edge> edges,
                        DenseMatrix features, std::vector<int> labels, int num_classes) {
    Graph g;
    g.name = std::move(name);
    g.num_nodes = n;
    g.adjacency = adjacency_from_edges(n, edges);
    g.features = std::move(features);
    g.labels = std::move(labels);
    g.num_classes = num_classes;
    g.validate();
    return g;
}

// -----------------------------------------------------------------------------
// On-disk format
// -----------------------------------------------------------------------------

enum class FeatureEncoding { TextCsv, BinaryF32 };

inline std::string to_string(FeatureEncoding e) {
    return e == FeatureEncoding::TextCsv ? "text-csv" : "binary-f32";
}

inline FeatureEncoding parse_feature_encoding(std::string_view s) {
    if (s == "text-csv") return FeatureEncoding::TextCsv;
    if (s == "binary-f32") return FeatureEncoding::BinaryF32;
    throw FormatError("unknown feature_encoding '" + std::string(s) + "'");
}

struct DatasetMeta {
    std::string name;
    index_t num_nodes = 0;
    index_t num_edges = 0;
    index_t feature_dim = 0;
    int num_classes = 0;
    FeatureEncoding feature_encoding = FeatureEncoding::TextCsv;

    nlohmann::json to_json() const {
        return {{"name", name},
                {"num_nodes", num_nodes},
                {"num_edges", num_edges},
                {"feature_dim", feature_dim},
                {"num_classes", num_classes},
                {"feature_encoding", subpool::to_string(feature_encoding)}};
    }

    static DatasetMeta from_json(const nlohmann::json& j) {
        DatasetMeta m;
        try {
            m.name = j.at("name").get<std::string>();
            m.num_nodes = j.at("num_nodes").get<index_t>();
            m.num_edges = j.at("num_edges").get<index_t>();
            m.feature_dim = j.at("feature_dim").get<index_t>();
            m.num_classes = j.at("num_classes").get<int>();
            m.feature_encoding = parse_feature_encoding(j.at("feature_encoding").get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("meta.json: ") + e.what());
        }
        return m;
    }
};

inline DatasetMeta describe(const Graph& g, FeatureEncoding enc = FeatureEncoding::TextCsv) {
    return {g.name, g.num_nodes, g.num_edges(), g.feature_dim(), g.num_classes, enc};
}

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Calls `fn(line_number, line)` for every non-empty line; tolerates CRLF.
template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    index_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        fn(line_no, line);
    }
}

template <typename T>
T parse_number(std::string_view tok, const std::string& where) {
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    T value{};
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
        throw FormatError(where + ": cannot parse '" + std::string(tok) + "'");
    return value;
}

inline std::pair<std::string_view, std::string_view> split_pair(std::string_view line,
                                                                 const std::string& where) {
    const auto comma = line.find(',');
    if (comma == std::string_view::npos || line.find(',', comma + 1) != std::string_view::npos)
        throw FormatError(where + ": expected exactly two comma-separated fields");
    return {line.substr(0, comma), line.substr(comma + 1)};
}

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

inline void write_file(const std::filesystem::path& p, std::string_view content) {
    std::error_code ec;
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + p.string());
}

} // namespace detail

inline DatasetMeta read_meta(const std::filesystem::path& dir) {
    const auto text = detail::read_file(dir / "meta.json");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("meta.json: " + std::string(e.what()));
    }
    return DatasetMeta::from_json(j);
}

inline Graph load_dataset(const std::filesystem::path& dir) {
    const DatasetMeta meta = read_meta(dir);
    const index_t n = meta.num_nodes;
    const index_t d = meta.feature_dim;

    std::vector<Edge> edges;
    detail::for_each_line(detail::read_file(dir / "edges.csv"), [&](index_t ln, std::string_view line) {
        const std::string where = "edges.csv:" + std::to_string(ln);
        auto [a, b] = detail::split_pair(line, where);
        edges.emplace_back(detail::parse_number<index_t>(a, where), detail::parse_number<index_t>(b, where));
    });

    DenseMatrix features(n, d);
    if (meta.feature_encoding == FeatureEncoding::TextCsv) {
        index_t row = 0;
        detail::for_each_line(detail::read_file(dir / "features.csv"), [&](index_t ln, std::string_view line) {
            const std::string where = "features.csv:" + std::to_string(ln);
            if (row >= n) throw FormatError(where + ": more feature rows than num_nodes");
            index_t col = 0;
            std::string_view rest = line;
            for (;;) {
                const auto comma = rest.find(',');
                if (col >= d) throw FormatError(where + ": more than feature_dim values");
                features(row, col++) = detail::parse_number<double>(rest.substr(0, comma), where);
                if (comma == std::string_view::npos) break;
                rest = rest.substr(comma + 1);
            }
            if (col != d) throw FormatError(where + ": expected " + std::to_string(d) + " values");
            ++row;
        });
        if (row != n) {
            throw FormatError("features.csv: " + std::to_string(row) + " rows, expected " + std::to_string(n));
        }
    } else {
        const auto bytes = detail::read_file(dir / "features.f32");
        if (bytes.size() != n * d * 4) {
            throw FormatError("features.f32: " + std::to_string(bytes.size()) + " bytes, expected " +
                              std::to_string(n * d * 4));
        }
        for (index_t i = 0; i < n * d; ++i) {
            std::uint32_t raw;
            std::memcpy(&raw, bytes.data() + 4 * i, 4);
            if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
            features.data()[i] = static_cast<double>(std::bit_cast<float>(raw));
        }
    }

    std::vector<int> labels(n, kUnlabeled);
    detail::for_each_line(detail::read_file(dir / "labels.csv"), [&](index_t ln, std::string_view line) {
        const std::string where = "labels.csv:" + std::to_string(ln);
        auto [a, b] = detail::split_pair(line, where);
        const auto node = detail::parse_number<index_t>(a, where);
        const auto label = detail::parse_number<int>(b, where);
        if (node >= n) throw FormatError(where + ": node " + std::to_string(node) + " >= num_nodes");
        if (label < 0 || label >= meta.num_classes)
            throw FormatError(where + ": label " + std::to_string(label) + " outside [0, num_classes)");
        if (labels[node] != kUnlabeled) throw FormatError(where + ": duplicate label for node");
        labels[node] = label;
    });

    Graph g = make_graph(meta.name, n, edges, std::move(features), std::move(labels), meta.num_classes);
    if (g.num_edges() != meta.num_edges) {
        throw FormatError("edges.csv: " + std::to_string(g.num_edges()) +
                          " undirected edges after symmetrisation, meta says " +
                          std::to_string(meta.num_edges));
    }
    return g;
}

inline void save_dataset(const Graph& g, const std::filesystem::path& dir,
                         FeatureEncoding enc = FeatureEncoding::TextCsv) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

    detail::write_file(dir / "meta.json", describe(g, enc).to_json().dump(2) + "\n");

    std::string edges;
    for (auto [u, v] : g.undirected_edges()) {
        edges += std::to_string(u);
        edges += ',';
        edges += std::to_string(v);
        edges += '\n';
    }
    detail::write_file(dir / "edges.csv", edges);

    if (enc == FeatureEncoding::TextCsv) {
        std::string feats;
        for (index_t i = 0; i < g.num_nodes; ++i) {
            auto r = g.features.row(i);
            for (index_t j = 0; j < r.size(); ++j) {
                if (j) feats += ',';
                feats += detail::format_double(r[j]);
            }
            feats += '\n';
        }
        detail::write_file(dir / "features.csv", feats);
    } else {
        std::string bytes(g.features.size() * 4, '\0');
        for (index_t i = 0; i < g.features.size(); ++i) {
            auto raw = std::bit_cast<std::uint32_t>(static_cast<float>(g.features.data()[i]));
            if constexpr (std::endian::native == std::endian::big) raw = __builtin_bswap32(raw);
            std::memcpy(bytes.data() + 4 * i, &raw, 4);
        }
        detail::write_file(dir / "features.f32", bytes);
    }

    std::string labels;
    for (index_t i = 0; i < g.num_nodes; ++i) {
        if (!g.is_labeled(i)) continue;
        labels += std::to_string(i);
        labels += ',';
        labels += std::to_string(g.labels[i]);
        labels += '\n';
    }
    detail::write_file(dir / "labels.csv", labels);
}

// -----------------------------------------------------------------------------
// Structure operations
// -----------------------------------------------------------------------------

/// D̃^{-1/2}(A+I)D̃^{-1/2} with self-loops, D^{-1/2}AD^{-1/2} without.
/// Without self-loops an isolated node's row is empty (all zero).
inline SparseMatrix normalized_adjacency(const Graph& g, bool add_self_loops) {
    const index_t n = g.num_nodes;
    std::vector<double> inv_sqrt(n);
    for (index_t i = 0; i < n; ++i) {
        const double deg = static_cast<double>(g.degree(i)) + (add_self_loops ? 1.0 : 0.0);
        inv_sqrt[i] = deg > 0.0 ? 1.0 / std::sqrt(deg) : 0.0;
    }
    std::vector<index_t> row_ptr(n + 1, 0);
    std::vector<index_t> col_idx;
    std::vector<double> values;
    col_idx.reserve(g.adjacency.nnz() + n);
    values.reserve(g.adjacency.nnz() + n);
    for (index_t i = 0; i < n; ++i) {
        bool diag_done = !add_self_loops;
        for (index_t j : g.neighbors(i)) {
            if (!diag_done && i < j) {
                col_idx.push_back(i);
                values.push_back(inv_sqrt[i] * inv_sqrt[i]);
                diag_done = true;
            }
            col_idx.push_back(j);
            values.push_back(inv_sqrt[i] * inv_sqrt[j]);
        }
        if (!diag_done) {
            col_idx.push_back(i);
            values.push_back(inv_sqrt[i] * inv_sqrt[i]);
        }
        row_ptr[i + 1] = col_idx.size();
    }
    return SparseMatrix(n, n, std::move(row_ptr), std::move(col_idx), std::move(values));
}

/// Removes ⌊rate·|E|⌋ uniformly chosen edges, then inserts the same number of
/// uniformly random node pairs that are neither self-loops nor edges of the
/// original graph nor already inserted. |E| is conserved.
inline Graph permute_edges(const Graph& g, double rate, RngStream& rng) {
    if (!(rate >= 0.0 && rate <= 1.0)) throw DomainError("permute_edges: rate must lie in [0, 1]");
    auto edges = g.undirected_edges();
    const index_t m = edges.size();
    const auto swap_count = static_cast<index_t>(std::floor(rate * static_cast<double>(m)));
    if (swap_count == 0) return g;

    const index_t n = g.num_nodes;
    const std::uint64_t all_pairs = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    if (all_pairs - m < swap_count) {
        throw InsertionError("permute_edges: only " + std::to_string(all_pairs - m) +
                             " free node pairs for " + std::to_string(swap_count) + " insertions");
    }

    // Partial Fisher-Yates: the first swap_count slots become the removed edges.
    for (index_t i = 0; i < swap_count; ++i) std::swap(edges[i], edges[i + rng.uniform_index(m - i)]);

    std::vector<Edge> inserted;
    inserted.reserve(swap_count);
    const std::uint64_t free_pairs = all_pairs - m;
    if (free_pairs <= 4 * static_cast<std::uint64_t>(swap_count)) {
        // Dense regime: enumerate the free pairs and draw without replacement.
        std::vector<Edge> candidates;
        candidates.reserve(free_pairs);
        for (index_t u = 0; u < n; ++u) {
            auto nb = g.neighbors(u);
            auto it = nb.begin();
            for (index_t v = u + 1; v < n; ++v) {
                while (it != nb.end() && *it < v) ++it;
                if (it != nb.end() && *it == v) continue;
                candidates.emplace_back(u, v);
            }
        }
        for (index_t i = 0; i < swap_count; ++i) {
            std::swap(candidates[i], candidates[i + rng.uniform_index(candidates.size() - i)]);
            inserted.push_back(candidates[i]);
        }
    } else {
        std::unordered_set<std::uint64_t> taken;
        taken.reserve(swap_count * 2);
        while (inserted.size() < swap_count) {
            index_t u = rng.uniform_index(n);
            index_t v = rng.uniform_index(n);
            if (u == v) continue;
            if (u > v) std::swap(u, v);
            if (g.adjacency.at(u, v) != 0.0) continue;
            if (!taken.insert(static_cast<std::uint64_t>(u) * n + v).second) continue;
            inserted.emplace_back(u, v);
        }
    }

    std::vector<Edge> next(edges.begin() + static_cast<std::ptrdiff_t>(swap_count), edges.end());
    next.insert(next.end(), inserted.begin(), inserted.end());
    Graph out = g;
    out.adjacency = adjacency_from_edges(n, next);
    return out;
}

struct SplitMasks {
    std::vector<index_t> train;
    std::vector<index_t> valid;
    std::vector<index_t> test;
};

/// Shuffles the labeled nodes; the first ⌈q·n⌉ are train, the next
/// ⌈valid_fraction·n⌉ valid, the rest test. Each set is returned sorted.
inline SplitMasks make_splits(const Graph& g, double train_fraction, double valid_fraction,
                              RngStream& rng) {
    if (train_fraction < 0.0 || valid_fraction < 0.0 || train_fraction + valid_fraction > 1.0 + 1e-12)
        throw ConfigError("make_splits: fractions must be >= 0 and sum to <= 1");
    auto nodes = g.labeled_nodes();
    rng.shuffle(nodes);
    const double nl = static_cast<double>(nodes.size());
    // The small offset keeps e.g. 0.6*5 = 3.0000000000000004 from rounding up to 4.
    const auto n_train = std::min<index_t>(nodes.size(), static_cast<index_t>(std::ceil(train_fraction * nl - 1e-9)));
    const auto n_valid = std::min<index_t>(nodes.size() - n_train,
                                           static_cast<index_t>(std::ceil(valid_fraction * nl - 1e-9)));
    if (n_train == 0) throw ConfigError("make_splits: train fraction yields zero train nodes");

    SplitMasks s;
    const auto b = nodes.begin();
    s.train.assign(b, b + static_cast<std::ptrdiff_t>(n_train));
    s.valid.assign(b + static_cast<std::ptrdiff_t>(n_train), b + static_cast<std::ptrdiff_t>(n_train + n_valid));
    s.test.assign(b + static_cast<std::ptrdiff_t>(n_train + n_valid), nodes.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.valid.begin(), s.valid.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

/// Stochastic block model. Node features are the block's mean row plus
/// N(0, sigma²) noise; labels are block indices. Edge draws come first
/// (pairs i<j in row-major order), then feature noise row-major.
inline Graph sbm_generate(std::span<const index_t> block_sizes, double intra_p, double inter_p,
                          const DenseMatrix& class_feature_means, double feature_noise_sigma,
                          RngStream& rng, std::string name = "sbm") {
    if (block_sizes.empty()) throw ConfigError("sbm_generate: no blocks");
    for (index_t s : block_sizes)
        if (s == 0) throw ConfigError("sbm_generate: empty block");
    if (!(intra_p >= 0.0 && intra_p <= 1.0 && inter_p >= 0.0 && inter_p <= 1.0))
        throw ConfigError("sbm_generate: probabilities must lie in [0, 1]");
    if (class_feature_means.rows() != block_sizes.size())
        throw ConfigError("sbm_generate: need one mean row per block");
    if (feature_noise_sigma < 0.0) throw ConfigError("sbm_generate: negative noise sigma");

    std::vector<int> labels;
    for (index_t b = 0; b < block_sizes.size(); ++b) labels.insert(labels.end(), block_sizes[b], static_cast<int>(b));
    const index_t n = labels.size();

    std::vector<Edge> edges;
    for (index_t i = 0; i < n; ++i)
        for (index_t j = i + 1; j < n; ++j)
            if (rng.bernoulli(labels[i] == labels[j] ? intra_p : inter_p)) edges.emplace_back(i, j);

    const index_t d = class_feature_means.cols();
    DenseMatrix features(n, d);
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j < d; ++j)
            features(i, j) = class_feature_means(static_cast<index_t>(labels[i]), j) +
                             feature_noise_sigma * rng.normal();

    return make_graph(std::move(name), n, edges, std::move(features), std::move(labels),
                      static_cast<int>(block_sizes.size()));
}

} // namespace subpool
