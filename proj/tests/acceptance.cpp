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

// Acceptance gate. `acceptance <ID>` runs one criterion, no argument runs
// all of them. Each prints one PASS/FAIL line; the exit status is non-zero
// if any selected criterion fails.

#include "subpool/subpool.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

namespace {

using namespace subpool;

// Tolerances and budgets.
constexpr double kP1MaxRelError = 1e-4;
constexpr double kP1Seconds = 30.0;
constexpr index_t kP2Trials = 10000;
constexpr std::uint64_t kP2Seed = 0;
constexpr double kP2Seconds = 5.0;
constexpr index_t kP3Seeds = 100;
constexpr index_t kP3MinDistinct = 90;
constexpr double kP3DistanceFloor = 1e-9;
constexpr index_t kP4Instances = 100;
constexpr double kP4PropertyTol = 1e-12;
constexpr double kP4OracleTol = 1e-10;
constexpr index_t kP5Seeds = 10;
constexpr index_t kP5MinCmdWins = 9;
constexpr double kP5MinAccuracyGain = 0.02;
constexpr double kP5GrowthFactor = 1.5;
constexpr double kP5Seconds = 180.0;
constexpr index_t kP5PretrainEpochs = 200;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome p1_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto reports = gradcheck_suite(1, 1e-5);
    double worst = 0.0;
    std::string worst_label;
    for (const auto& r : reports) {
        if (r.max_rel_error > worst) {
            worst = r.max_rel_error;
            worst_label = r.label;
        }
    }
    const double secs = elapsed(t0);
    return {worst < kP1MaxRelError && secs < kP1Seconds,
            fmt("combinations=%zu max_rel_error=%.3e (%s) tol=%.0e time=%.2fs", reports.size(), worst,
                worst_label.c_str(), kP1MaxRelError, secs)};
}

Outcome p2_theory() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto s = run_theory_check(kP2Trials, kP2Seed);
    const double secs = elapsed(t0);
    const bool pass = s.violations == 0 && s.n_ge_m_delta_nonnegative == s.n_ge_m_trials && secs < kP2Seconds;
    return {pass, fmt("trials=%zu violations=%zu (n>m: %zu, |m-n| margin: %zu) n>=m delta>=0: %zu/%zu time=%.2fs",
                      s.trials, s.violations, s.violations_n_gt_m, s.violations_abs, s.n_ge_m_delta_nonnegative,
                      s.n_ge_m_trials, secs)};
}

Outcome p3_twins() {
    RngStream fixture_rng(0, 0);
    const TwinFixture f = oversmoothing_fixture(fixture_rng);
    const Graph& g = f.graph;
    EncoderConfig enc;
    enc.hidden = 16;
    RngStream init(0, kInitStream);
    const EncoderParams params = init_params(enc, g.feature_dim(), g.num_classes, init);
    const ModelInputs in = prepare_inputs(g, enc);
    const DenseMatrix z = encode(params, in.adj, in.features).first;

    auto pair_rows = [&](const DenseMatrix& h) {
        DenseMatrix out(2, h.cols());
        for (index_t j = 0; j < h.cols(); ++j) {
            out(0, j) = h(f.u, j);
            out(1, j) = h(f.v, j);
        }
        return out;
    };
    const std::vector<double> y = {static_cast<double>(g.labels[f.u]), static_cast<double>(g.labels[f.v])};

    const DenseMatrix h_khop = PoolingConfig::of(PoolingMode::Mean, 2).build(g).forward(z);
    const double khop_dist = l2_distance(h_khop.row(f.u), h_khop.row(f.v));
    const double khop_risk = least_squares_risk(pair_rows(h_khop), y);

    index_t distinct = 0;
    double rw_risk_sum = 0.0;
    for (std::uint64_t seed = 0; seed < kP3Seeds; ++seed) {
        const DenseMatrix h = PoolingConfig::of(PoolingMode::RandomWalk, 3, 10, seed).build(g).forward(z);
        if (l2_distance(h.row(f.u), h.row(f.v)) > kP3DistanceFloor) ++distinct;
        rw_risk_sum += least_squares_risk(pair_rows(h), y);
    }
    const double rw_risk = rw_risk_sum / static_cast<double>(kP3Seeds);
    const bool pass = khop_dist == 0.0 && distinct >= kP3MinDistinct && rw_risk < khop_risk;
    return {pass, fmt("khop_distance=%.3e rw_distinct=%zu/%zu risk_khop=%.6f risk_rw_mean=%.6f", khop_dist, distinct,
                      kP3Seeds, khop_risk, rw_risk)};
}

/// Interval-normalised cmd with K = 3 written as explicit loops.
double cmd_oracle(const DenseMatrix& x, const DenseMatrix& y) {
    double lo = x(0, 0), hi = x(0, 0);
    for (const DenseMatrix* m : {&x, &y})
        for (index_t i = 0; i < m->rows(); ++i)
            for (index_t j = 0; j < m->cols(); ++j) {
                lo = std::min(lo, (*m)(i, j));
                hi = std::max(hi, (*m)(i, j));
            }
    const double r = hi - lo;
    double sq[4] = {0, 0, 0, 0};
    for (index_t j = 0; j < x.cols(); ++j) {
        double mx = 0, my = 0;
        for (index_t i = 0; i < x.rows(); ++i) mx += x(i, j);
        for (index_t i = 0; i < y.rows(); ++i) my += y(i, j);
        mx /= static_cast<double>(x.rows());
        my /= static_cast<double>(y.rows());
        sq[1] += (mx - my) * (mx - my);
        for (int k = 2; k <= 3; ++k) {
            double cx = 0, cy = 0;
            for (index_t i = 0; i < x.rows(); ++i) cx += std::pow(x(i, j) - mx, k);
            for (index_t i = 0; i < y.rows(); ++i) cy += std::pow(y(i, j) - my, k);
            cx /= static_cast<double>(x.rows());
            cy /= static_cast<double>(y.rows());
            sq[k] += (cx - cy) * (cx - cy);
        }
    }
    return std::sqrt(sq[1]) / r + std::sqrt(sq[2]) / (r * r) + std::sqrt(sq[3]) / (r * r * r);
}

Outcome p4_cmd() {
    RngStream rng(4, 0);
    double self = 0.0, sym = 0.0, perm = 0.0, oracle = 0.0;
    for (index_t t = 0; t < kP4Instances; ++t) {
        const index_t d = 1 + rng.uniform_index(16);
        auto draw = [&](index_t rows, double scale, double shift) {
            DenseMatrix m(rows, d);
            for (double& v : m.data()) v = scale * rng.normal() + shift;
            return m;
        };
        const DenseMatrix a = draw(2 + rng.uniform_index(200), 1.0 + rng.uniform01() * 3.0, rng.normal());
        const DenseMatrix b = draw(2 + rng.uniform_index(200), 1.0 + rng.uniform01() * 3.0, rng.normal());
        std::vector<index_t> order(a.rows());
        for (index_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        DenseMatrix ap(a.rows(), d);
        for (index_t i = 0; i < a.rows(); ++i)
            for (index_t j = 0; j < d; ++j) ap(i, j) = a(order[i], j);
        const double ab = cmd(a, b);
        self = std::max(self, std::abs(cmd(a, a)));
        sym = std::max(sym, std::abs(ab - cmd(b, a)));
        perm = std::max(perm, std::abs(ab - cmd(ap, b)));
        oracle = std::max(oracle, std::abs(ab - cmd_oracle(a, b)));
    }
    const bool pass = self <= kP4PropertyTol && sym <= kP4PropertyTol && perm <= kP4PropertyTol && oracle <= kP4OracleTol;
    return {pass, fmt("instances=%zu max|cmd(Z,Z)|=%.1e max_asym=%.1e max_perm=%.1e max_oracle_diff=%.1e",
                      kP4Instances, self, sym, perm, oracle)};
}

Outcome p5_negative_transfer() {
    const auto t0 = std::chrono::steady_clock::now();
    const SbmPairConfig pair_cfg;
    const PoolingConfig sp = PoolingConfig::of(PoolingMode::Mean, 2);
    const std::vector<double> rates = {0.0, 0.1, 0.2, 0.4};
    index_t cmd_wins = 0, sweep_ordered = 0, sweep_growth = 0;
    double acc_vanilla = 0.0, acc_sp = 0.0;
    for (std::uint64_t seed = 0; seed < kP5Seeds; ++seed) {
        const auto [source, target] = sbm_transfer_pair(pair_cfg, seed);
        const EncoderConfig enc;
        TrainConfig pre = TrainConfig::pretrain_defaults();
        pre.epochs = kP5PretrainEpochs;
        pre.seed = seed;
        pre.cmd_track_interval = kP5PretrainEpochs;
        const auto vanilla = pretrain(source, enc, PoolingConfig::vanilla(), pre, &target);
        const auto pooled = pretrain(source, enc, sp, pre, &target);
        const double cmd_z = vanilla.report.cmd_history.back().cmd_node;
        const double cmd_h = pooled.report.cmd_history.back().cmd;
        if (cmd_z > cmd_h) ++cmd_wins;

        TrainConfig ft = TrainConfig::finetune_defaults();
        ft.seed = seed;
        const double av = *adapt(vanilla.checkpoint, target, TransferMode::LastLayer, PoolingConfig::vanilla(), ft)
                               .report.test_metric;
        const double as = *adapt(pooled.checkpoint, target, TransferMode::LastLayer, sp, ft).report.test_metric;
        acc_vanilla += av;
        acc_sp += as;

        const std::vector<std::uint64_t> seeds = {seed};
        const auto rows = permutation_sweep(pooled.checkpoint, source, target, rates, seeds, sp);
        bool ordered = true;
        for (const auto& r : rows) ordered = ordered && r.cmd_sp < r.cmd_vanilla;
        if (ordered) ++sweep_ordered;
        if (rows.back().cmd_vanilla >= kP5GrowthFactor * rows.front().cmd_vanilla) ++sweep_growth;

        std::printf("  P5 seed=%llu cmd_Z=%.4f cmd_H=%.4f acc_gcn=%.4f acc_sp=%.4f sweep(Z,H):",
                    static_cast<unsigned long long>(seed), cmd_z, cmd_h, av, as);
        for (const auto& r : rows) std::printf(" %.2f:(%.4f,%.4f)", r.rate, r.cmd_vanilla, r.cmd_sp);
        std::printf("\n");
    }
    acc_vanilla /= static_cast<double>(kP5Seeds);
    acc_sp /= static_cast<double>(kP5Seeds);
    const double secs = elapsed(t0);
    const bool a = cmd_wins >= kP5MinCmdWins;
    const bool b = acc_sp - acc_vanilla >= kP5MinAccuracyGain;
    const bool c = sweep_ordered == kP5Seeds && sweep_growth == kP5Seeds;
    return {a && b && c && secs < kP5Seconds,
            fmt("(a) cmd_Z>cmd_H %zu/%zu [%s] (b) acc gcn=%.4f sp=%.4f gain=%+.4f [%s] (c) ordered %zu/%zu, "
                "growth>=%.1fx %zu/%zu [%s] time=%.1fs",
                cmd_wins, kP5Seeds, a ? "ok" : "miss", acc_vanilla, acc_sp, acc_sp - acc_vanilla, b ? "ok" : "miss",
                sweep_ordered, kP5Seeds, kP5GrowthFactor, sweep_growth, kP5Seeds, c ? "ok" : "miss", secs)};
}

Outcome p6_identity_pooling() {
    const auto [source, target] = sbm_transfer_pair(SbmPairConfig{}, 0);
    TrainConfig cfg = TrainConfig::pretrain_defaults();
    cfg.seed = 3;
    cfg.patience = 0;
    const EncoderConfig enc;
    const auto vanilla = pretrain(source, enc, PoolingConfig::vanilla(), cfg).report.losses();
    const auto identity = pretrain(source, enc, PoolingConfig::of(PoolingMode::Mean, 0), cfg).report.losses();
    index_t mismatches = vanilla.size() == identity.size() ? 0 : std::max(vanilla.size(), identity.size());
    for (index_t i = 0; i < std::min(vanilla.size(), identity.size()); ++i)
        if (std::bit_cast<std::uint64_t>(vanilla[i]) != std::bit_cast<std::uint64_t>(identity[i])) ++mismatches;
    return {mismatches == 0, fmt("epochs=%zu bitwise_mismatches=%zu", vanilla.size(), mismatches)};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"P1", p1_gradients}, {"P2", p2_theory},          {"P3", p3_twins},
        {"P4", p4_cmd},       {"P5", p5_negative_transfer}, {"P6", p6_identity_pooling},
    };
    std::vector<std::string> selected(argv + 1, argv + argc);
    bool all_pass = true;
    bool ran = false;
    for (const auto& [id, fn] : criteria) {
        if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) continue;
        ran = true;
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %s %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && o.pass;
    }
    if (!ran) {
        std::fprintf(stderr, "usage: acceptance [P1..P6]...\n");
        return 2;
    }
    return all_pass ? 0 : 1;
}
