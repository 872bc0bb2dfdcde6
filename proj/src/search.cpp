#include "simgraph/search.hpp"

#include <algorithm>
#include <functional>

#include "simgraph/parallel.hpp"

namespace simgraph {

void KeepAllAgent::decide(const SearchState&, std::span<std::uint8_t> keep, Rng&) const {
    std::fill(keep.begin(), keep.end(), std::uint8_t{1});
}

void EdgeMaskAgent::decide(const SearchState& state, std::span<std::uint8_t> keep, Rng&) const {
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = mask_[state.first_edge + i];
}

SearchTrace beam_search(const Graph& g, const FloatMatrix& base, const EdgeAgent& agent,
                        std::span<const float> query, const SearchParams& params,
                        std::uint64_t seed) {
    if (params.k < 1) throw DataError("beam_search: k must be >= 1");
    if (params.ef < params.k) throw DataError("beam_search: ef must be >= k");
    if (query.size() != base.dim()) throw DataError("beam_search: query dim mismatch");

    const std::size_t capacity = std::max(params.ef, params.k);
    Rng rng(seed);
    std::vector<std::uint8_t> visited(g.num_vertices(), 0);
    std::vector<Neighbor> candidates;  // min-heap
    std::vector<Neighbor> results;     // max-heap, worst on top
    std::vector<std::uint8_t> keep;
    const auto min_first = std::greater<>{};

    SearchTrace trace;
    const VertexId start = g.start_vertex();
    const Neighbor s{start, squared_l2(query, base.row(start))};
    visited[start] = 1;
    trace.visited.push_back(start);
    candidates.push_back(s);
    results.push_back(s);

    while (!candidates.empty()) {
        const Neighbor current = candidates.front();
        if (results.size() >= capacity && results.front() < current) break;
        std::pop_heap(candidates.begin(), candidates.end(), min_first);
        candidates.pop_back();

        const auto nbrs = g.neighbors(current.id);
        const EdgeId first = g.edge_begin(current.id);
        keep.assign(nbrs.size(), 0);
        const SearchState state{query, current.id, nbrs, first, visited, candidates};
        agent.decide(state, keep, rng);

        ExpansionStep step;
        step.vertex = current.id;
        step.kept_begin = static_cast<std::uint32_t>(trace.kept_edges.size());
        step.dropped_begin = static_cast<std::uint32_t>(trace.dropped_edges.size());
        for (std::size_t i = 0; i < nbrs.size(); ++i) {
            const EdgeId e = first + static_cast<EdgeId>(i);
            if (!keep[i]) {
                trace.dropped_edges.push_back(e);
                continue;
            }
            trace.kept_edges.push_back(e);
            const VertexId t = nbrs[i];
            if (visited[t]) continue;
            visited[t] = 1;
            trace.visited.push_back(t);
            const Neighbor nb{t, squared_l2(query, base.row(t))};
            if (results.size() < capacity || nb < results.front()) {
                candidates.push_back(nb);
                std::push_heap(candidates.begin(), candidates.end(), min_first);
                results.push_back(nb);
                std::push_heap(results.begin(), results.end());
                if (results.size() > capacity) {
                    std::pop_heap(results.begin(), results.end());
                    results.pop_back();
                }
            }
        }
        step.kept_end = static_cast<std::uint32_t>(trace.kept_edges.size());
        step.dropped_end = static_cast<std::uint32_t>(trace.dropped_edges.size());
        trace.steps.push_back(step);
    }

    std::sort_heap(results.begin(), results.end());
    results.resize(std::min(results.size(), params.k));
    trace.topk = std::move(results);
    trace.dcs = trace.visited.size();
    trace.hops = trace.steps.size();
    return trace;
}

SearchTrace greedy_search(const Graph& g, const FloatMatrix& base, const EdgeAgent& agent,
                          std::span<const float> query, std::uint64_t seed) {
    return beam_search(g, base, agent, query, {1, 1}, seed);
}

EvalResult evaluate(const Graph& g, const FloatMatrix& base, const EdgeAgent& agent,
                    const FloatMatrix& queries, std::span<const VertexId> gt,
                    const SearchParams& params, const EvalOptions& options,
                    std::vector<SearchTrace>* traces) {
    if (queries.empty()) throw DataError("evaluate: empty query set");
    if (gt.size() != queries.rows()) throw DataError("evaluate: ground truth size mismatch");
    for (VertexId id : gt)
        if (id >= g.num_vertices()) throw DataError("evaluate: ground truth id out of range");

    const std::size_t nq = queries.rows();
    std::vector<SearchTrace> local;
    const bool keep_traces = options.keep_traces || traces != nullptr;
    if (keep_traces) local.resize(nq);

    EvalResult r;
    r.per_query.resize(nq);
    std::vector<std::vector<VertexId>> expanded(nq);
    parallel_for(nq, options.threads, [&](std::size_t i) {
        SearchTrace t = beam_search(g, base, agent, queries.row(i), params, mix_seed(options.seed, i));
        r.per_query[i] = {t.best() == gt[i], t.dcs, t.hops};
        expanded[i].reserve(t.steps.size());
        for (const auto& s : t.steps) expanded[i].push_back(s.vertex);
        if (keep_traces) local[i] = std::move(t);
    });

    r.stats.outdegree_histogram = degree_histogram(g);
    r.stats.visit_counts.assign(g.num_vertices(), 0);
    r.stats.nn_counts.assign(g.num_vertices(), 0);
    std::size_t found = 0, dcs = 0, hops = 0;
    for (std::size_t i = 0; i < nq; ++i) {
        found += r.per_query[i].found ? 1 : 0;
        dcs += r.per_query[i].dcs;
        hops += r.per_query[i].hops;
        for (VertexId v : expanded[i]) ++r.stats.visit_counts[v];
        ++r.stats.nn_counts[gt[i]];
    }
    const auto n = static_cast<double>(nq);
    r.recall_at_1 = static_cast<double>(found) / n;
    r.mean_dcs = static_cast<double>(dcs) / n;
    r.mean_hops = static_cast<double>(hops) / n;
    if (traces) *traces = std::move(local);
    return r;
}

void write_eval_csv(std::ostream& out, const EvalResult& result) {
    out << "query_id,found,dcs,hops\n";
    for (std::size_t i = 0; i < result.per_query.size(); ++i) {
        const auto& q = result.per_query[i];
        out << i << ',' << (q.found ? 1 : 0) << ',' << q.dcs << ',' << q.hops << '\n';
    }
}

} // namespace simgraph
