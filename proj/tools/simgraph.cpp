#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "simgraph/commands.hpp"

namespace fs = std::filesystem;
using namespace simgraph;

namespace {

struct Common {
    std::string config;
    std::string preset;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::size_t> threads;
};

ExperimentConfig resolve(const Common& c) {
    if (!c.config.empty() && !c.preset.empty()) throw ConfigError("--config and --preset are mutually exclusive");
    ExperimentConfig cfg;
    if (!c.config.empty()) {
        if (!fs::exists(c.config)) throw ConfigError("config file not found: " + c.config);
        cfg = load_config(c.config);
    } else {
        cfg = preset(c.preset.empty() ? "toy" : c.preset);
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.out) cfg.out_dir = *c.out;
    if (c.threads) cfg.threads = *c.threads;
    cfg.validate();
    return cfg;
}

// "label=path" or a bare path labeled by its stem.
LabeledGraph parse_labeled(const std::string& s) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) return {fs::path(s).stem().string(), s};
    return {s.substr(0, eq), s.substr(eq + 1)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Similarity-graph refinement with policy-gradient edge learning"};
    app.require_subcommand(1, 1);

    Common common;
    app.add_option("--config", common.config, "experiment config (JSON)");
    app.add_option("--preset", common.preset, "named preset, used when --config is absent (default: toy)");
    app.add_option("--seed", common.seed, "override the experiment seed");
    app.add_option("--out", common.out, "override the output directory");
    app.add_option("--threads", common.threads, "worker threads (0 = all cores)");

    auto* prepare = app.add_subcommand("prepare", "write dataset splits, ground truth and manifest");
    auto* build = app.add_subcommand("build", "build the initial graph");

    auto* train = app.add_subcommand("train", "refine the initial graph");
    bool verbose = false;
    train->add_flag("-v,--verbose", verbose, "print one line per epoch");

    auto* prune = app.add_subcommand("prune", "magnitude-pruning baseline");
    std::string prune_input;
    prune->add_option("--input", prune_input, "graph to prune (default: the initial graph)");

    auto* sweep = app.add_subcommand("sweep", "recall against DCS over a range of ef");
    std::vector<std::size_t> ef_list;
    std::vector<std::string> sweep_graphs;
    sweep->add_option("--ef", ef_list, "beam widths (default: from config)");
    sweep->add_option("--graph", sweep_graphs, "label=path (default: initial, refined, pruned)");

    auto* hubs = app.add_subcommand("hubs", "most visited vertices on the training queries");
    std::optional<std::size_t> top_n;
    std::string hubs_graph;
    hubs->add_option("--top", top_n, "number of rows, start vertex included (default: from config)");
    hubs->add_option("--graph", hubs_graph, "graph file (default: refined graph if present)");

    auto* validate = app.add_subcommand("validate", "check config and graph files");
    std::vector<std::string> validate_graphs;
    validate->add_option("--graph", validate_graphs, "graph files (default: all in the output directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        const ExperimentConfig cfg = resolve(common);
        if (*prepare) {
            std::cout << cmd_prepare(cfg).string() << '\n';
        } else if (*build) {
            std::cout << cmd_build(cfg).string() << '\n';
        } else if (*train) {
            const TrainSummary s = cmd_train(cfg, verbose ? &std::cerr : nullptr);
            std::cout << "val reward " << s.initial_val_reward << " -> " << s.best_val_reward << " (epoch "
                      << s.best_epoch << "), edges " << s.edges_before << " -> " << s.edges_after << '\n';
        } else if (*prune) {
            std::cout << cmd_prune(cfg, prune_input).string() << '\n';
        } else if (*sweep) {
            std::vector<LabeledGraph> graphs;
            for (const auto& s : sweep_graphs) graphs.push_back(parse_labeled(s));
            if (graphs.empty()) graphs = default_sweep_graphs(cfg);
            std::cout << cmd_sweep(cfg, ef_list.empty() ? cfg.sweep_ef : ef_list, graphs).string() << '\n';
        } else if (*hubs) {
            fs::path g = hubs_graph;
            if (g.empty()) g = fs::exists(cfg.refined_path()) ? cfg.refined_path() : cfg.graph_path();
            std::cout << cmd_hubs(cfg, top_n.value_or(cfg.hubs_top_n), g).string() << '\n';
        } else if (*validate) {
            std::vector<fs::path> graphs(validate_graphs.begin(), validate_graphs.end());
            if (graphs.empty())
                for (const auto& p : {cfg.graph_path(), cfg.refined_path(), cfg.pruned_path()})
                    if (fs::exists(p)) graphs.push_back(p);
            cmd_validate(cfg, graphs, std::cout);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::usage);
    } catch (const DivergenceError& e) {
        std::cerr << "training diverged: " << e.what() << '\n';
        return static_cast<int>(ExitCode::divergence);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return static_cast<int>(ExitCode::data);
    }
    return static_cast<int>(ExitCode::ok);
}
