#include "simgraph/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>

#include "simgraph/parallel.hpp"

namespace simgraph {

void accumulate_usage(EdgeUsage& usage, const Graph& g, const SearchTrace& trace) {
    if (trace.visited.empty()) return;
    std::vector<std::uint8_t> seen(g.num_vertices(), 0);
    seen[trace.visited.front()] = 1;
    for (const auto& step : trace.steps) {
        ++usage.vertex_visits[step.vertex];
        for (EdgeId e : trace.kept(step)) {
            const VertexId t = g.edge_target(e);
            if (seen[t]) continue;
            seen[t] = 1;
            ++usage.edge_visits[e];
        }
    }
}

EdgeUsage collect_usage(const Graph& g, const FloatMatrix& base, const FloatMatrix& queries,
                        const SearchParams& params, std::size_t threads) {
    EdgeUsage usage{std::vector<std::size_t>(g.num_edges(), 0),
                    std::vector<std::size_t>(g.num_vertices(), 0)};
    if (queries.empty()) return usage;
    const KeepAllAgent agent;
    std::vector<SearchTrace> traces(queries.rows());
    parallel_for(queries.rows(), threads, [&](std::size_t i) {
        traces[i] = beam_search(g, base, agent, queries.row(i), params, i);
    });
    for (const auto& t : traces) accumulate_usage(usage, g, t);
    return usage;
}

std::vector<double> edge_weights(const EdgeUsage& usage, const Graph& g, double lambda) {
    if (usage.edge_visits.size() != g.num_edges() || usage.vertex_visits.size() != g.num_vertices())
        throw DataError("edge_weights: usage does not match graph");
    std::vector<double> w(g.num_edges());
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
        const double denom = static_cast<double>(usage.vertex_visits[v]) +
                             lambda * static_cast<double>(g.outdegree(v));
        for (EdgeId e = g.edge_begin(v); e < g.edge_end(v); ++e)
            w[e] = (static_cast<double>(usage.edge_visits[e]) + lambda) / denom;
    }
    return w;
}

Graph prune_below(const Graph& g, std::span<const double> weights, double threshold) {
    if (weights.size() != g.num_edges()) throw DataError("prune_below: weight count mismatch");
    return g.filter_edges([&](EdgeId e) { return weights[e] >= threshold; });
}

std::vector<double> threshold_candidates(std::span<const double> weights, std::size_t count) {
    std::vector<double> out{0.0};
    if (!weights.empty() && count > 0) {
        std::vector<double> sorted(weights.begin(), weights.end());
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < count; ++i) {
            const double q = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
            const auto idx = static_cast<std::size_t>(std::llround(q * static_cast<double>(sorted.size() - 1)));
            out.push_back(sorted[idx]);
        }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

PruneResult tune_threshold_and_prune(const Graph& g, const FloatMatrix& base, const EdgeUsage& usage,
                                     const QuerySet& val, const PruneConfig& cfg) {
    if (val.size() == 0 || val.gt.size() != val.size())
        throw DataError("tune_threshold_and_prune: validation queries need ground truth");
    const auto weights = edge_weights(usage, g, cfg.lambda);
    const KeepAllAgent agent;
    const EvalOptions opts{cfg.seed, cfg.threads, false};

    PruneResult best;
    bool have = false;
    for (double thr : threshold_candidates(weights, cfg.quantiles)) {
        Graph pruned = prune_below(g, weights, thr);
        const EvalResult r = evaluate(pruned, base, agent, val.vectors, val.gt, cfg.search, opts);
        PruneCandidate c{thr, pruned.num_edges(), mean_reward(r, cfg.reward), r.recall_at_1, r.mean_dcs};
        best.sweep.push_back(c);
        if (!have || c.val_mean_reward > best.val_mean_reward) {
            have = true;
            best.graph = std::move(pruned);
            best.threshold = thr;
            best.val_mean_reward = c.val_mean_reward;
        }
    }
    return best;
}

void write_weights_csv(std::ostream& out, const Graph& g, std::span<const double> weights) {
    out << "src,dst,weight\n" << std::setprecision(10);
    for (VertexId v = 0; v < g.num_vertices(); ++v)
        for (EdgeId e = g.edge_begin(v); e < g.edge_end(v); ++e)
            out << v << ',' << g.edge_target(e) << ',' << weights[e] << '\n';
}

} // namespace simgraph
