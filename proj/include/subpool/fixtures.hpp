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

// Synthetic source/target pair for structural-shift experiments: two
// 2-block SBMs sharing class feature means and differing only in the
// intra-block edge probability.

#include "subpool/graphstore.hpp"
#include "subpool/numerics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <utility>

namespace subpool {

struct SbmPairConfig {
    index_t block_size = 100;
    index_t feature_dim = 8;
    double mean_magnitude = 0.1; // class means are ±mean_magnitude, alternating sign per column
    double noise_sigma = 1.0;
    double source_intra_p = 0.10;
    double target_intra_p = 0.04;
    double inter_p = 0.0;

    nlohmann::json to_json() const {
        return {{"block_size", block_size},         {"feature_dim", feature_dim},
                {"mean_magnitude", mean_magnitude}, {"noise_sigma", noise_sigma},
                {"source_intra_p", source_intra_p}, {"target_intra_p", target_intra_p},
                {"inter_p", inter_p}};
    }
};

inline DenseMatrix alternating_class_means(index_t feature_dim, double magnitude) {
    DenseMatrix means(2, feature_dim);
    for (index_t j = 0; j < feature_dim; ++j) {
        means(0, j) = j % 2 == 0 ? -magnitude : magnitude;
        means(1, j) = -means(0, j);
    }
    return means;
}

/// Source is drawn first, then target, both from RngStream(seed, 100).
inline std::pair<Graph, Graph> sbm_transfer_pair(const SbmPairConfig& cfg, std::uint64_t seed) {
    RngStream rng(seed, 100);
    const DenseMatrix means = alternating_class_means(cfg.feature_dim, cfg.mean_magnitude);
    const index_t blocks[] = {cfg.block_size, cfg.block_size};
    Graph source = sbm_generate(blocks, cfg.source_intra_p, cfg.inter_p, means, cfg.noise_sigma, rng, "sbm_source");
    Graph target = sbm_generate(blocks, cfg.target_intra_p, cfg.inter_p, means, cfg.noise_sigma, rng, "sbm_target");
    return {std::move(source), std::move(target)};
}

} // namespace subpool
