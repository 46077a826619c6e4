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

// Command-line front end. Reports go to `out` as JSON, diagnostics to `err`;
// failures print one JSON error line to `err`.
//
// Config resolution: built-in defaults, then the per-dataset recipe when the
// source dataset name is recognised, then the --config file, then flags.

#include "subpool/discrepancy.hpp"
#include "subpool/encoder.hpp"
#include "subpool/error.hpp"
#include "subpool/fixtures.hpp"
#include "subpool/gradcheck.hpp"
#include "subpool/graphstore.hpp"
#include "subpool/pipeline.hpp"
#include "subpool/theory.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace subpool::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitNumeric = 4;

inline constexpr double kGradcheckTolerance = 1e-4;

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Io:
    case ErrorKind::Format:
    case ErrorKind::Insertion:
        return kExitConfig;
    case ErrorKind::Numeric:
    case ErrorKind::Degeneracy:
        return kExitNumeric;
    default:
        return kExitInternal;
    }
}

struct DiscrepancyOptions {
    index_t num_pairs = 10000;
    index_t khop_k = 2;
    index_t rw_k = 3;
    index_t rw_repeats = 10;
    std::uint64_t seed = 0;

    nlohmann::json to_json() const {
        return {{"num_pairs", num_pairs}, {"khop_k", khop_k}, {"rw_k", rw_k}, {"rw_repeats", rw_repeats}, {"seed", seed}};
    }
};

/// Fully resolved experiment configuration.
struct ExperimentConfig {
    std::string source;
    std::string target;
    std::string checkpoint;
    std::string output;
    EncoderConfig encoder;
    PoolingConfig pooling;
    TrainConfig pretrain = TrainConfig::pretrain_defaults();
    TrainConfig finetune = TrainConfig::finetune_defaults();
    TransferMode mode = TransferMode::LastLayer;
    DiscrepancyOptions discrepancy;
    std::vector<double> rates = {0.0, 0.1, 0.2, 0.4};
    std::vector<std::uint64_t> sweep_seeds = {0};
    std::optional<std::string> recipe;

    nlohmann::json to_json() const {
        return {{"source", source},
                {"target", target},
                {"checkpoint", checkpoint},
                {"output", output},
                {"encoder", encoder.to_json()},
                {"pooling", pooling.to_json()},
                {"pretrain", pretrain.to_json()},
                {"finetune", finetune.to_json()},
                {"mode", to_string(mode)},
                {"discrepancy", discrepancy.to_json()},
                {"sweep", {{"rates", rates}, {"seeds", sweep_seeds}}},
                {"recipe", recipe ? nlohmann::json(*recipe) : nlohmann::json()}};
    }
};

struct Flags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string mode;
    std::string rates;
    std::optional<index_t> trials;
};

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p)) throw IoError("config file not found: " + p.string());
    try {
        return nlohmann::json::parse(detail::read_file(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + p.string() + ": " + e.what());
    }
}

inline std::vector<double> parse_rates(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(detail::parse_number<double>(item, "--rates"));
        } catch (const FormatError&) {
            throw ConfigError("--rates: '" + item + "' is not a number");
        }
    }
    if (out.empty()) throw ConfigError("--rates: empty list");
    return out;
}

/// Applies the dataset recipe for the source dataset's name, if any.
inline void apply_recipe(ExperimentConfig& cfg, const std::string& dataset_name) {
    const auto r = recipe_for(dataset_name);
    if (!r) return;
    cfg.recipe = r->family;
    cfg.pretrain.epochs = r->pretrain_epochs;
    cfg.pooling = PoolingConfig::of(r->sp_mode, r->k_sp);
}

inline ExperimentConfig resolve_config(const Flags& flags) {
    ExperimentConfig cfg;
    nlohmann::json j = nlohmann::json::object();
    if (!flags.config_path.empty()) j = read_json_file(flags.config_path);
    if (!j.is_object()) throw ConfigError("config must be a JSON object");

    try {
        if (j.contains("source")) cfg.source = j.at("source").get<std::string>();
        if (j.contains("target")) cfg.target = j.at("target").get<std::string>();
        if (j.contains("checkpoint")) cfg.checkpoint = j.at("checkpoint").get<std::string>();
        if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!cfg.source.empty() && std::filesystem::exists(std::filesystem::path(cfg.source) / "meta.json"))
        apply_recipe(cfg, read_meta(cfg.source).name);

    if (j.contains("encoder")) cfg.encoder = EncoderConfig::from_json(j.at("encoder"), cfg.encoder);
    if (j.contains("pooling")) cfg.pooling = PoolingConfig::from_json(j.at("pooling"), cfg.pooling);
    if (j.contains("pretrain")) cfg.pretrain = TrainConfig::from_json(j.at("pretrain"), cfg.pretrain);
    if (j.contains("finetune")) cfg.finetune = TrainConfig::from_json(j.at("finetune"), cfg.finetune);
    try {
        if (j.contains("mode")) cfg.mode = parse_transfer_mode(j.at("mode").get<std::string>());
        if (j.contains("discrepancy")) {
            const auto& d = j.at("discrepancy");
            if (d.contains("num_pairs")) cfg.discrepancy.num_pairs = d.at("num_pairs").get<index_t>();
            if (d.contains("khop_k")) cfg.discrepancy.khop_k = d.at("khop_k").get<index_t>();
            if (d.contains("rw_k")) cfg.discrepancy.rw_k = d.at("rw_k").get<index_t>();
            if (d.contains("rw_repeats")) cfg.discrepancy.rw_repeats = d.at("rw_repeats").get<index_t>();
            if (d.contains("seed")) cfg.discrepancy.seed = d.at("seed").get<std::uint64_t>();
        }
        if (j.contains("sweep")) {
            const auto& s = j.at("sweep");
            if (s.contains("rates")) cfg.rates = s.at("rates").get<std::vector<double>>();
            if (s.contains("seeds")) cfg.sweep_seeds = s.at("seeds").get<std::vector<std::uint64_t>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    if (flags.seed) {
        cfg.pretrain.seed = *flags.seed;
        cfg.finetune.seed = *flags.seed;
        cfg.discrepancy.seed = *flags.seed;
        cfg.sweep_seeds = {*flags.seed};
    }
    if (!flags.out.empty()) cfg.output = flags.out;
    if (!flags.mode.empty()) cfg.mode = parse_transfer_mode(flags.mode);
    if (!flags.rates.empty()) cfg.rates = parse_rates(flags.rates);
    return cfg;
}

inline void require(const std::string& value, const char* what) {
    if (value.empty()) throw ConfigError(std::string("missing required setting '") + what + "'");
}

inline void write_json(std::ostream& out, const nlohmann::json& j) { out << j.dump(2) << "\n"; }

// -----------------------------------------------------------------------------
// Subcommands
// -----------------------------------------------------------------------------

inline int cmd_pretrain(const ExperimentConfig& cfg, std::ostream& out) {
    require(cfg.source, "source");
    require(cfg.output, "output (checkpoint path)");
    const Graph source = load_dataset(cfg.source);
    std::optional<Graph> target;
    if (!cfg.target.empty()) target = load_dataset(cfg.target);
    auto result = pretrain(source, cfg.encoder, cfg.pooling, cfg.pretrain, target ? &*target : nullptr);
    save_checkpoint(result.checkpoint, cfg.output);
    auto j = result.report.to_json();
    j["resolved_config"] = cfg.to_json();
    write_json(out, j);
    return kExitOk;
}

inline int cmd_adapt(const ExperimentConfig& cfg, std::ostream& out) {
    require(cfg.checkpoint, "checkpoint");
    require(cfg.target, "target");
    const Checkpoint ck = load_checkpoint(cfg.checkpoint);
    const Graph target = load_dataset(cfg.target);
    auto result = adapt(ck, target, cfg.mode, cfg.pooling, cfg.finetune);
    if (!cfg.output.empty()) save_checkpoint(result.checkpoint, cfg.output);
    auto j = result.report.to_json();
    j["resolved_config"] = cfg.to_json();
    write_json(out, j);
    return kExitOk;
}

inline int cmd_transfer(const ExperimentConfig& cfg, std::ostream& out) {
    require(cfg.source, "source");
    require(cfg.target, "target");
    const Graph source = load_dataset(cfg.source);
    const Graph target = load_dataset(cfg.target);
    auto pre = pretrain(source, cfg.encoder, cfg.pooling, cfg.pretrain, &target);
    // In a transfer run `checkpoint` names where the pretrained model goes.
    if (!cfg.checkpoint.empty()) save_checkpoint(pre.checkpoint, cfg.checkpoint);
    auto post = adapt(pre.checkpoint, target, cfg.mode, cfg.pooling, cfg.finetune);
    if (!cfg.output.empty()) save_checkpoint(post.checkpoint, cfg.output);
    write_json(out, {{"pretrain", pre.report.to_json()},
                     {"adapt", post.report.to_json()},
                     {"test_metric", post.report.test_metric ? nlohmann::json(*post.report.test_metric)
                                                             : nlohmann::json()},
                     {"resolved_config", cfg.to_json()}});
    return kExitOk;
}

inline int cmd_discrepancy(const ExperimentConfig& cfg, std::ostream& out) {
    require(cfg.checkpoint, "checkpoint");
    require(cfg.source, "source");
    require(cfg.target, "target");
    const Checkpoint ck = load_checkpoint(cfg.checkpoint);
    const Graph source = load_dataset(cfg.source);
    const Graph target = load_dataset(cfg.target);
    const ModelInputs si = prepare_inputs(source, ck.config);
    const ModelInputs ti = prepare_inputs(target, ck.config);
    check_compatible(ck, source, si);
    check_compatible(ck, target, ti);
    const DenseMatrix zs = encode(ck.params, si.adj, si.features).first;
    const DenseMatrix zt = encode(ck.params, ti.adj, ti.features).first;
    const auto& d = cfg.discrepancy;
    RngStream rng(d.seed, 0);
    const auto report = measure_discrepancy(source, target, zs, zt, SamplerConfig::khop(d.khop_k),
                                            SamplerConfig::random_walk(d.rw_k, d.rw_repeats, d.seed), d.num_pairs, rng);
    auto j = report.to_json();
    j["resolved_config"] = cfg.to_json();
    if (!cfg.output.empty()) detail::write_file(cfg.output, j.dump(2) + "\n");
    write_json(out, j);
    return kExitOk;
}

inline int cmd_permute_sweep(const ExperimentConfig& cfg, std::ostream& out) {
    require(cfg.checkpoint, "checkpoint");
    require(cfg.source, "source");
    require(cfg.target, "target");
    const Checkpoint ck = load_checkpoint(cfg.checkpoint);
    const Graph source = load_dataset(cfg.source);
    const Graph target = load_dataset(cfg.target);
    const auto rows = permutation_sweep(ck, source, target, cfg.rates, cfg.sweep_seeds, cfg.pooling,
                                        cfg.finetune.metric);
    if (!cfg.output.empty()) detail::write_file(cfg.output, sweep_to_csv(rows));
    nlohmann::json table = nlohmann::json::array();
    for (const auto& r : rows)
        table.push_back({{"rate", r.rate}, {"seed", r.seed}, {"cmd_vanilla", r.cmd_vanilla}, {"cmd_sp", r.cmd_sp},
                         {"metric", r.metric}});
    write_json(out, {{"rows", table}, {"resolved_config", cfg.to_json()}});
    return kExitOk;
}

inline int cmd_theory_check(const Flags& flags, std::ostream& out) {
    const index_t trials = flags.trials.value_or(10000);
    const std::uint64_t seed = flags.seed.value_or(0);
    auto j = run_theory_check(trials, seed).to_json();
    j["resolved_config"] = {{"trials", trials}, {"seed", seed}};
    if (!flags.out.empty()) detail::write_file(flags.out, j.dump(2) + "\n");
    write_json(out, j);
    return kExitOk;
}

inline int cmd_gradcheck(const Flags& flags, std::ostream& out) {
    const std::uint64_t seed = flags.seed.value_or(1);
    const auto reports = gradcheck_suite(seed);
    double worst = 0.0;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : reports) {
        worst = std::max(worst, r.max_rel_error);
        runs.push_back(r.to_json());
    }
    const bool pass = worst < kGradcheckTolerance;
    write_json(out, {{"max_rel_error", worst},
                     {"tolerance", kGradcheckTolerance},
                     {"pass", pass},
                     {"runs", runs},
                     {"resolved_config", {{"seed", seed}, {"eps", 1e-5}}}});
    if (!pass) throw NumericError("gradcheck: max relative error " + detail::format_double(worst) + " exceeds tolerance");
    return kExitOk;
}

/// Writes the bundled synthetic datasets under the output directory.
inline int cmd_fixture(const Flags& flags, std::ostream& out) {
    require(flags.out, "--out");
    const std::uint64_t seed = flags.seed.value_or(0);
    const std::filesystem::path dir(flags.out);
    const SbmPairConfig pair_cfg;
    auto [source, target] = sbm_transfer_pair(pair_cfg, seed);
    RngStream twin_rng(seed, 0);
    const auto twins = oversmoothing_fixture(twin_rng);
    const Graph grad = gradcheck_graph(seed);
    nlohmann::json written = nlohmann::json::array();
    for (const Graph* g : std::initializer_list<const Graph*>{&source, &target, &twins.graph, &grad}) {
        save_dataset(*g, dir / g->name);
        written.push_back({{"name", g->name}, {"path", (dir / g->name).string()}, {"nodes", g->num_nodes},
                           {"edges", g->num_edges()}});
    }
    write_json(out, {{"datasets", written},
                     {"resolved_config", {{"seed", seed}, {"out", flags.out}, {"sbm_pair", pair_cfg.to_json()}}}});
    return kExitOk;
}

// -----------------------------------------------------------------------------
// Entry point
// -----------------------------------------------------------------------------

inline void print_error(std::ostream& err, const std::string& kind, const std::string& message, int code) {
    err << nlohmann::json{{"error", kind}, {"message", message}, {"exit_code", code}}.dump() << "\n";
}

/// `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Subgraph pooling transfer-learning toolkit", "subpool"};
    app.require_subcommand(1, 1);
    Flags flags;

    auto add_common = [&](CLI::App* sc) {
        sc->add_option("--config", flags.config_path, "JSON experiment config");
        sc->add_option("--seed", flags.seed, "Run seed");
        sc->add_option("--out", flags.out, "Output path");
    };
    struct Entry {
        const char* name;
        const char* help;
        CLI::App* app = nullptr;
    };
    std::vector<Entry> entries = {
        {"pretrain", "Train encoder, pooling and classifier on the source graph"},
        {"adapt", "Adapt a checkpoint to the target graph"},
        {"transfer", "Pretrain on the source, then adapt to the target"},
        {"discrepancy", "CMD, lambda and epsilon for a checkpoint on a graph pair"},
        {"permute-sweep", "CMD under random target edge permutation"},
        {"theory-check", "Randomised check of the mean-pooling margin bound"},
        {"gradcheck", "Finite-difference check of the analytic gradients"},
        {"fixture", "Write the bundled synthetic datasets"},
    };
    for (auto& e : entries) {
        e.app = app.add_subcommand(e.name, e.help);
        add_common(e.app);
    }
    for (const char* name : {"adapt", "transfer"})
        app.get_subcommand(name)->add_option("--mode", flags.mode, "none | last | full");
    app.get_subcommand("permute-sweep")->add_option("--rates", flags.rates, "Comma-separated permutation rates");
    app.get_subcommand("theory-check")->add_option("--trials", flags.trials, "Number of random trials");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        print_error(err, "usage", e.what(), kExitUsage);
        err << app.help();
        return kExitUsage;
    }

    try {
        if (app.got_subcommand("theory-check")) return cmd_theory_check(flags, out);
        if (app.got_subcommand("gradcheck")) return cmd_gradcheck(flags, out);
        if (app.got_subcommand("fixture")) return cmd_fixture(flags, out);
        const ExperimentConfig cfg = resolve_config(flags);
        if (app.got_subcommand("pretrain")) return cmd_pretrain(cfg, out);
        if (app.got_subcommand("adapt")) return cmd_adapt(cfg, out);
        if (app.got_subcommand("transfer")) return cmd_transfer(cfg, out);
        if (app.got_subcommand("discrepancy")) return cmd_discrepancy(cfg, out);
        if (app.got_subcommand("permute-sweep")) return cmd_permute_sweep(cfg, out);
    } catch (const Error& e) {
        const int code = exit_code_for(e.kind());
        print_error(err, std::string(to_string(e.kind())), e.what(), code);
        return code;
    } catch (const std::exception& e) {
        print_error(err, "internal", e.what(), kExitInternal);
        return kExitInternal;
    }
    print_error(err, "usage", "no subcommand", kExitUsage);
    return kExitUsage;
}

} // namespace subpool::cli
