#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "simgraph/common.hpp"
#include "simgraph/dataset.hpp"
#include "simgraph/graph.hpp"
#include "simgraph/trace.hpp"

namespace simgraph {

/// What an agent sees when the search expands a vertex.
struct SearchState {
    std::span<const float> query;
    VertexId vertex = 0;
    std::span<const VertexId> neighbors;  // out-edges of `vertex`, edge ids first_edge + i
    EdgeId first_edge = 0;
    std::span<const std::uint8_t> visited;   // per-vertex flag
    std::span<const Neighbor> candidates;    // heap storage, unordered
};

/// Decides which out-edges of the expanded vertex the search may follow.
class EdgeAgent {
public:
    virtual ~EdgeAgent() = default;
    /// keep.size() == state.neighbors.size(); entries arrive zeroed.
    virtual void decide(const SearchState& state, std::span<std::uint8_t> keep, Rng& rng) const = 0;
};

class KeepAllAgent final : public EdgeAgent {
public:
    void decide(const SearchState& state, std::span<std::uint8_t> keep, Rng& rng) const override;
};

/// Follows a fixed per-edge keep mask.
class EdgeMaskAgent final : public EdgeAgent {
public:
    explicit EdgeMaskAgent(std::span<const std::uint8_t> mask) : mask_(mask) {}
    void decide(const SearchState& state, std::span<std::uint8_t> keep, Rng& rng) const override;

private:
    std::span<const std::uint8_t> mask_;
};

struct SearchParams {
    std::size_t k = 1;
    std::size_t ef = 1;
};

/// Best-first beam search from the graph's start vertex. The result structure holds
/// max(ef, k) entries; the loop stops once the nearest candidate is worse than the worst
/// entry of a full result structure. Returns the k best.
SearchTrace beam_search(const Graph& g, const FloatMatrix& base, const EdgeAgent& agent,
                        std::span<const float> query, const SearchParams& params,
                        std::uint64_t seed);

/// Moves to the closest kept neighbor until nothing improves; beam_search with ef = k = 1.
SearchTrace greedy_search(const Graph& g, const FloatMatrix& base, const EdgeAgent& agent,
                          std::span<const float> query, std::uint64_t seed);

struct QueryOutcome {
    bool found = false;
    std::size_t dcs = 0;
    std::size_t hops = 0;
};

struct EvalResult {
    double recall_at_1 = 0.0;
    double mean_dcs = 0.0;
    double mean_hops = 0.0;
    GraphStats stats;
    std::vector<QueryOutcome> per_query;
};

struct EvalOptions {
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    bool keep_traces = false;
};

/// Runs one search per query; query i uses seed mix_seed(options.seed, i).
EvalResult evaluate(const Graph& g, const FloatMatrix& base, const EdgeAgent& agent,
                    const FloatMatrix& queries, std::span<const VertexId> gt,
                    const SearchParams& params, const EvalOptions& options = {},
                    std::vector<SearchTrace>* traces = nullptr);

/// query_id,found,dcs,hops
void write_eval_csv(std::ostream& out, const EvalResult& result);

} // namespace simgraph
