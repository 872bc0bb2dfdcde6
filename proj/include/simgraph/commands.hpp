#pragma once

#include <cstddef>
#include <filesystem>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "simgraph/config.hpp"
#include "simgraph/dataset.hpp"
#include "simgraph/graph.hpp"

namespace simgraph {

/// Exit codes of the command-line driver.
enum class ExitCode : int { ok = 0, usage = 1, data = 2, divergence = 3 };

/// Writes the dataset splits (fvecs), their ground truth (ivecs) and manifest.json into
/// the output directory. Returns the manifest path.
std::filesystem::path cmd_prepare(const ExperimentConfig& cfg);

/// Reads a manifest written by cmd_prepare; relative paths resolve against its directory.
Dataset load_manifest(const std::filesystem::path& manifest);

/// Builds the initial graph (graph.bin) and its outdegree histogram (graph_degree.csv).
std::filesystem::path cmd_build(const ExperimentConfig& cfg);

struct TrainSummary {
    double initial_val_reward = 0.0;
    double best_val_reward = 0.0;
    std::size_t best_epoch = 0;
    std::size_t edges_before = 0;
    std::size_t edges_after = 0;
};

/// Refines graph.bin: writes refined.bin, refined_probs.bin (initial topology with the learned
/// edge state), refined_degree.csv, training_log.csv and policy.bin.
TrainSummary cmd_train(const ExperimentConfig& cfg, std::ostream* progress = nullptr);

/// Magnitude pruning of `input` (graph.bin by default): pruned.bin, weights.csv, prune_sweep.csv.
std::filesystem::path cmd_prune(const ExperimentConfig& cfg, const std::filesystem::path& input = {});

using LabeledGraph = std::pair<std::string, std::filesystem::path>;

/// Graphs present in the output directory: initial, refined, pruned.
std::vector<LabeledGraph> default_sweep_graphs(const ExperimentConfig& cfg);

/// Recall@1 against mean DCS on the test split, one row per (graph, ef), rows of each graph
/// sorted by mean DCS. Writes sweep.csv.
std::filesystem::path cmd_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& ef_list,
                                const std::vector<LabeledGraph>& graphs);

/// Most-expanded vertices over the training queries, start vertex first. Writes hubs.csv.
std::filesystem::path cmd_hubs(const ExperimentConfig& cfg, std::size_t top_n,
                               const std::filesystem::path& graph);

/// Checks the configuration and every given graph file; reports to `out`.
void cmd_validate(const ExperimentConfig& cfg, const std::vector<std::filesystem::path>& graphs,
                  std::ostream& out);

} // namespace simgraph
