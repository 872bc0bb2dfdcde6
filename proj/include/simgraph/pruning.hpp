#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <vector>

#include "simgraph/dataset.hpp"
#include "simgraph/graph.hpp"
#include "simgraph/search.hpp"
#include "simgraph/trainer.hpp"

namespace simgraph {

/// Visitation counts from searches over a query set.
struct EdgeUsage {
    std::vector<std::size_t> edge_visits;    // per edge id
    std::vector<std::size_t> vertex_visits;  // per vertex: number of expansions
};

/// Accumulates usage from finished traces. An edge counts once per expansion in which its
/// target's distance was computed through it (first visit of the target).
void accumulate_usage(EdgeUsage& usage, const Graph& g, const SearchTrace& trace);

/// Runs the all-keep search for every query and tallies usage.
EdgeUsage collect_usage(const Graph& g, const FloatMatrix& base, const FloatMatrix& queries,
                        const SearchParams& params, std::size_t threads = 1);

/// w_ij = (n_e + lambda) / (n_v + lambda * outdegree(i))
std::vector<double> edge_weights(const EdgeUsage& usage, const Graph& g, double lambda);

/// Drops every edge whose weight is below `threshold`.
Graph prune_below(const Graph& g, std::span<const double> weights, double threshold);

struct PruneCandidate {
    double threshold = 0.0;
    std::size_t edges = 0;
    double val_mean_reward = 0.0;
    double val_recall = 0.0;
    double val_mean_dcs = 0.0;
};

struct PruneResult {
    Graph graph;
    double threshold = 0.0;
    double val_mean_reward = 0.0;
    std::vector<PruneCandidate> sweep;
};

struct PruneConfig {
    double lambda = 0.1;
    std::size_t quantiles = 64;
    RewardConfig reward;
    SearchParams search{1, 10};
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

/// Candidate thresholds: 0 plus `count` evenly spaced quantiles of the weights, deduplicated
/// and sorted ascending.
std::vector<double> threshold_candidates(std::span<const double> weights, std::size_t count);

/// Sweeps the candidate thresholds and keeps the pruned graph with the highest validation
/// mean reward (the lowest threshold wins ties).
PruneResult tune_threshold_and_prune(const Graph& g, const FloatMatrix& base, const EdgeUsage& usage,
                                     const QuerySet& val, const PruneConfig& cfg);

/// src,dst,weight
void write_weights_csv(std::ostream& out, const Graph& g, std::span<const double> weights);

} // namespace simgraph
