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

#include "subpool/graphstore.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <set>

namespace subpool {
namespace {

using testing_support::graph_from_edges;
using testing_support::path_graph;
using testing_support::TempDir;

void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream(p, std::ios::binary) << s;
}

void write_path_dataset(const std::filesystem::path& dir, const std::string& edges, int meta_edges = 3) {
    std::filesystem::create_directories(dir);
    write_text(dir / "meta.json",
               R"({"name":"path4","num_nodes":4,"num_edges":)" + std::to_string(meta_edges) +
                   R"(,"feature_dim":2,"num_classes":2,"feature_encoding":"text-csv"})");
    write_text(dir / "edges.csv", edges);
    write_text(dir / "features.csv", "1,0\n0,1\n1,1\n0.5,-2\n");
    write_text(dir / "labels.csv", "0,0\n1,1\n3,1\n");
}

TEST(GraphStore, LoadsPathDataset) {
    TempDir tmp;
    write_path_dataset(tmp.path(), "0,1\n1,2\n2,3\n");
    const Graph g = load_dataset(tmp.path());
    EXPECT_EQ(g.name, "path4");
    EXPECT_EQ(g.num_nodes, 4u);
    EXPECT_EQ(g.num_edges(), 3u);
    const index_t expected[] = {1, 2, 2, 1};
    for (index_t i = 0; i < 4; ++i) EXPECT_EQ(g.degree(i), expected[i]) << i;
    EXPECT_EQ(g.features(3, 1), -2.0);
    EXPECT_EQ(g.labels, (std::vector<int>{0, 1, kUnlabeled, 1}));
    EXPECT_EQ(g.labeled_nodes(), (std::vector<index_t>{0, 1, 3}));
}

TEST(GraphStore, DirectedDuplicatesCollapse) {
    TempDir tmp;
    write_path_dataset(tmp.path(), "0,1\n1,0\n1,2\n2,3\n3,2\n");
    EXPECT_EQ(load_dataset(tmp.path()).num_edges(), 3u);
}

TEST(GraphStore, RejectsOutOfRangeNode) {
    TempDir tmp;
    write_path_dataset(tmp.path(), "0,1\n1,2\n2,99\n");
    EXPECT_THROW(load_dataset(tmp.path()), FormatError);
}

TEST(GraphStore, RejectsEdgeCountMismatch) {
    TempDir tmp;
    write_path_dataset(tmp.path(), "0,1\n1,2\n2,3\n", 4);
    EXPECT_THROW(load_dataset(tmp.path()), FormatError);
}

TEST(GraphStore, RejectsMalformedRows) {
    TempDir tmp;
    write_path_dataset(tmp.path(), "0,1\n1;2\n");
    EXPECT_THROW(load_dataset(tmp.path()), FormatError);
    write_path_dataset(tmp.path(), "0,1\n1,2\n2,3\n");
    write_text(tmp.path() / "features.csv", "1,0\n0,1\n1\n0.5,-2\n");
    EXPECT_THROW(load_dataset(tmp.path()), FormatError);
    write_text(tmp.path() / "features.csv", "1,0\n0,1\n1,1\n0.5,-2\n");
    write_text(tmp.path() / "labels.csv", "0,5\n");
    EXPECT_THROW(load_dataset(tmp.path()), FormatError);
}

TEST(GraphStore, MissingDirectoryIsIoError) {
    EXPECT_THROW(load_dataset("/nonexistent/subpool/dataset"), IoError);
}

TEST(GraphStore, RoundTripText) {
    RngStream rng(5, 0);
    const DenseMatrix means{{0.25, -1.0, 3.0}, {-0.5, 2.0, 1e-7}};
    const index_t blocks[] = {12, 9};
    Graph g = sbm_generate(blocks, 0.4, 0.05, means, 0.7, rng, "rt");
    g.labels[3] = kUnlabeled;
    TempDir tmp;
    save_dataset(g, tmp.path());
    const Graph back = load_dataset(tmp.path());
    EXPECT_EQ(back.name, g.name);
    EXPECT_EQ(back.undirected_edges(), g.undirected_edges());
    EXPECT_EQ(back.features, g.features);
    EXPECT_EQ(back.labels, g.labels);
    EXPECT_EQ(back.num_classes, g.num_classes);
}

TEST(GraphStore, RoundTripBinaryRoundsToFloat) {
    RngStream rng(6, 0);
    const DenseMatrix means{{1.0, 2.0}, {-1.0, 0.1}};
    const index_t blocks[] = {5, 5};
    const Graph g = sbm_generate(blocks, 0.5, 0.1, means, 1.0, rng);
    TempDir tmp;
    save_dataset(g, tmp.path(), FeatureEncoding::BinaryF32);
    EXPECT_TRUE(std::filesystem::exists(tmp.path() / "features.f32"));
    const Graph back = load_dataset(tmp.path());
    for (index_t i = 0; i < g.features.size(); ++i)
        EXPECT_EQ(back.features.data()[i], static_cast<double>(static_cast<float>(g.features.data()[i])));
}

TEST(NormalizedAdjacency, SingleEdgeIsHalf) {
    const Graph g = graph_from_edges(2, {{0, 1}});
    const DenseMatrix a = normalized_adjacency(g, true).to_dense();
    EXPECT_LE(max_abs_diff(a, DenseMatrix{{0.5, 0.5}, {0.5, 0.5}}), 1e-15);
}

TEST(NormalizedAdjacency, EdgelessGraphIsIdentity) {
    const Graph g = graph_from_edges(4, {});
    EXPECT_EQ(normalized_adjacency(g, true).to_dense(), SparseMatrix::identity(4).to_dense());
    EXPECT_EQ(normalized_adjacency(g, false).nnz(), 0u);
}

TEST(NormalizedAdjacency, PathEntries) {
    const SparseMatrix a = normalized_adjacency(path_graph(3), true);
    EXPECT_DOUBLE_EQ(a.at(0, 1), 1.0 / std::sqrt(6.0));
    EXPECT_DOUBLE_EQ(a.at(1, 1), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(a.at(0, 0), 0.5);
    EXPECT_EQ(a.at(0, 2), 0.0);
    EXPECT_TRUE(a.is_symmetric());
    const SparseMatrix b = normalized_adjacency(path_graph(3), false);
    EXPECT_DOUBLE_EQ(b.at(0, 1), 1.0 / std::sqrt(2.0));
    EXPECT_EQ(b.at(1, 1), 0.0);
}

Graph ten_node_graph() {
    std::vector<Edge> e;
    for (index_t i = 0; i < 10; ++i) e.emplace_back(i, (i + 1) % 10);
    for (index_t i = 0; i < 5; ++i) e.emplace_back(i, i + 5);
    return graph_from_edges(10, e);
}

TEST(PermuteEdges, RateZeroIsIdentity) {
    const Graph g = ten_node_graph();
    RngStream rng(1, 0);
    EXPECT_EQ(permute_edges(g, 0.0, rng).undirected_edges(), g.undirected_edges());
}

TEST(PermuteEdges, PreservesEdgeCountAndSwapsFloorRate) {
    RngStream gen(2, 0);
    const DenseMatrix means{{0.0}, {1.0}};
    const index_t blocks[] = {40, 40};
    const Graph g = sbm_generate(blocks, 0.2, 0.02, means, 1.0, gen);
    const auto before = g.undirected_edges();
    const std::set<Edge> original(before.begin(), before.end());
    for (double rate : {0.1, 0.25, 0.5, 1.0}) {
        RngStream rng(3, 0);
        const Graph p = permute_edges(g, rate, rng);
        ASSERT_EQ(p.num_edges(), g.num_edges());
        index_t kept = 0;
        for (const Edge& e : p.undirected_edges()) kept += original.count(e);
        EXPECT_EQ(kept, before.size() - static_cast<index_t>(std::floor(rate * static_cast<double>(before.size()))))
            << rate;
        EXPECT_EQ(p.features, g.features);
        EXPECT_EQ(p.labels, g.labels);
    }
}

TEST(PermuteEdges, FullRateDenseRegimeLeavesNoOriginal) {
    const Graph g = ten_node_graph();
    ASSERT_EQ(g.num_edges(), 15u);
    const auto before = g.undirected_edges();
    const std::set<Edge> original(before.begin(), before.end());
    RngStream rng(4, 0);
    const Graph p = permute_edges(g, 1.0, rng);
    EXPECT_EQ(p.num_edges(), 15u);
    for (const Edge& e : p.undirected_edges()) EXPECT_EQ(original.count(e), 0u);
}

TEST(PermuteEdges, Errors) {
    const Graph g = ten_node_graph();
    RngStream rng(5, 0);
    EXPECT_THROW(permute_edges(g, 1.5, rng), DomainError);
    EXPECT_THROW(permute_edges(g, -0.1, rng), DomainError);
    std::vector<Edge> e;
    for (index_t i = 0; i < 4; ++i)
        for (index_t j = i + 1; j < 4; ++j)
            if (!(i == 0 && j == 1)) e.emplace_back(i, j);
    const Graph dense = graph_from_edges(4, e); // 5 of 6 pairs present
    EXPECT_THROW(permute_edges(dense, 0.5, rng), InsertionError);
}

TEST(PermuteEdges, Deterministic) {
    const Graph g = ten_node_graph();
    RngStream a(9, 0), b(9, 0);
    EXPECT_EQ(permute_edges(g, 0.4, a).undirected_edges(), permute_edges(g, 0.4, b).undirected_edges());
}

TEST(Splits, SizesAndDisjointness) {
    std::vector<int> labels(100, 0);
    labels[7] = kUnlabeled;
    for (index_t i = 50; i < 100; ++i) labels[i] = 1;
    const Graph g = graph_from_edges(100, {}, 1, labels, 2);
    RngStream rng(0, 2);
    const SplitMasks s = make_splits(g, 0.1, 0.1, rng);
    EXPECT_EQ(s.train.size(), 10u); // ceil(9.9)
    EXPECT_EQ(s.valid.size(), 10u);
    EXPECT_EQ(s.test.size(), 79u);
    std::set<index_t> all(s.train.begin(), s.train.end());
    all.insert(s.valid.begin(), s.valid.end());
    all.insert(s.test.begin(), s.test.end());
    EXPECT_EQ(all.size(), 99u);
    EXPECT_EQ(all.count(7), 0u);
    EXPECT_TRUE(std::is_sorted(s.train.begin(), s.train.end()));
}

TEST(Splits, ExactFractionsDoNotRoundUp) {
    const Graph g = graph_from_edges(5, {});
    RngStream rng(0, 2);
    const SplitMasks s = make_splits(g, 0.6, 0.4, rng);
    EXPECT_EQ(s.train.size(), 3u);
    EXPECT_EQ(s.valid.size(), 2u);
    EXPECT_TRUE(s.test.empty());
}

TEST(Splits, RejectsBadFractions) {
    const Graph g = graph_from_edges(5, {});
    RngStream rng(0, 2);
    EXPECT_THROW(make_splits(g, 0.7, 0.4, rng), ConfigError);
    EXPECT_THROW(make_splits(g, 0.0, 0.5, rng), ConfigError);
}

TEST(Sbm, ExtremeProbabilitiesGiveCliques) {
    RngStream rng(1, 0);
    const DenseMatrix means{{0.0}, {0.0}};
    const index_t blocks[] = {6, 4};
    const Graph g = sbm_generate(blocks, 1.0, 0.0, means, 0.0, rng);
    EXPECT_EQ(g.num_edges(), 15u + 6u);
    for (index_t i = 0; i < 10; ++i) EXPECT_EQ(g.degree(i), i < 6 ? 5u : 3u);
}

TEST(Sbm, EdgeDensityMatchesProbability) {
    RngStream rng(2, 0);
    const DenseMatrix means{{0.0}};
    const index_t blocks[] = {100};
    const Graph g = sbm_generate(blocks, 0.2, 0.0, means, 1.0, rng);
    const double density = static_cast<double>(g.num_edges()) / 4950.0;
    EXPECT_NEAR(density, 0.2, 0.03); // about 5 standard deviations
}

TEST(Sbm, FeaturesCenterOnBlockMeans) {
    RngStream rng(3, 0);
    const DenseMatrix means{{2.0, -1.0}, {-3.0, 0.5}};
    const index_t blocks[] = {400, 400};
    const Graph g = sbm_generate(blocks, 0.0, 0.0, means, 1.0, rng);
    for (index_t b = 0; b < 2; ++b) {
        for (index_t j = 0; j < 2; ++j) {
            double mean = 0.0;
            for (index_t i = 400 * b; i < 400 * (b + 1); ++i) mean += g.features(i, j);
            EXPECT_NEAR(mean / 400.0, means(b, j), 0.25);
        }
    }
    EXPECT_EQ(g.labels[0], 0);
    EXPECT_EQ(g.labels[799], 1);
}

TEST(Sbm, RejectsBadConfig) {
    RngStream rng(0, 0);
    const DenseMatrix means{{0.0}};
    const index_t empty_block[] = {0};
    EXPECT_THROW(sbm_generate(empty_block, 0.1, 0.1, means, 1.0, rng), ConfigError);
    const index_t two[] = {3, 3};
    EXPECT_THROW(sbm_generate(two, 0.1, 0.1, means, 1.0, rng), ConfigError);
    const index_t one[] = {3};
    EXPECT_THROW(sbm_generate(one, 1.1, 0.1, means, 1.0, rng), ConfigError);
}

} // namespace
} // namespace subpool
