#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "simgraph/common.hpp"
#include "simgraph/dataset.hpp"
#include "simgraph/trace.hpp"

namespace simgraph {

class GraphError : public DataError {
public:
    using DataError::DataError;
};

/// Per-edge Bernoulli keep-probability and freeze flag, indexed by edge id.
struct EdgeState {
    std::vector<float> prob;
    std::vector<std::uint8_t> frozen;

    bool operator==(const EdgeState&) const = default;
};

/// Directed graph in compressed form: the out-edges of v occupy edge ids
/// [offsets[v], offsets[v+1]) of a single flat neighbor array.
class Graph {
public:
    Graph() = default;
    Graph(std::vector<EdgeId> offsets, std::vector<VertexId> neighbors, VertexId start);

    static Graph from_lists(const std::vector<std::vector<VertexId>>& lists, VertexId start);

    std::size_t num_vertices() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t num_edges() const noexcept { return neighbors_.size(); }
    VertexId start_vertex() const noexcept { return start_; }
    void set_start_vertex(VertexId v);

    std::span<const VertexId> neighbors(VertexId v) const {
        return {neighbors_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    std::size_t outdegree(VertexId v) const { return offsets_[v + 1] - offsets_[v]; }
    EdgeId edge_begin(VertexId v) const { return offsets_[v]; }
    EdgeId edge_end(VertexId v) const { return offsets_[v + 1]; }
    VertexId edge_target(EdgeId e) const { return neighbors_[e]; }
    /// Source vertex of every edge, indexed by edge id.
    std::vector<VertexId> edge_sources() const;
    bool has_edge(VertexId from, VertexId to) const;

    const std::vector<EdgeId>& offsets() const noexcept { return offsets_; }
    const std::vector<VertexId>& flat_neighbors() const noexcept { return neighbors_; }

    bool has_edge_state() const noexcept { return state_.has_value(); }
    const EdgeState& edge_state() const;
    EdgeState& edge_state();
    void set_edge_state(EdgeState state);
    void clear_edge_state() noexcept { state_.reset(); }

    /// Keeps the edges for which keep(edge_id) is true; surviving edge_state entries follow.
    Graph filter_edges(const std::function<bool(EdgeId)>& keep) const;

    /// Throws GraphError on out-of-range ids, self-loops, duplicate edges or a bad start vertex.
    void validate() const;

    double mean_outdegree() const;

    bool operator==(const Graph&) const = default;

private:
    std::vector<EdgeId> offsets_{0};
    std::vector<VertexId> neighbors_;
    VertexId start_ = 0;
    std::optional<EdgeState> state_;
};

/// True if every edge of `sub` is present in `super` over the same vertex set.
bool is_subgraph(const Graph& sub, const Graph& super);

/// Every ordered pair (i, j), i != j.
Graph build_complete(std::size_t n, VertexId start);

struct NswParams {
    std::size_t M = 12;
    std::size_t ef_construction = 500;
    std::uint64_t seed = 0;
};

/// Flat navigable small-world graph by incremental insertion. Each new point is linked both
/// ways to the M nearest results of an ef_construction-wide beam search; over-full neighbor
/// lists drop their farthest target that still has another in-edge. Vertices left unreachable
/// from the start are then linked from their nearest reachable vertex. Insertion order is a
/// seeded permutation and the first inserted point becomes the start vertex.
Graph build_nsw(const FloatMatrix& base, const NswParams& params);

/// Keeps exactly the edges with prob >= 0.5 and drops the edge state.
Graph extract_deterministic(const Graph& g);

/// Keeps the edges through which some trace first reached the edge's target.
Graph prune_unvisited(const Graph& g, std::span<const SearchTrace> traces);

struct GraphStats {
    std::map<std::size_t, std::size_t> outdegree_histogram;
    std::vector<std::size_t> visit_counts;  // expansions per vertex
    std::vector<std::size_t> nn_counts;     // queries for which the vertex is the exact NN
};

std::map<std::size_t, std::size_t> degree_histogram(const Graph& g);

std::vector<std::uint8_t> serialize(const Graph& g);
Graph deserialize(std::span<const std::uint8_t> bytes);
void save_graph(const std::filesystem::path& path, const Graph& g);
Graph load_graph(const std::filesystem::path& path);

void write_histogram_csv(std::ostream& out, const std::map<std::size_t, std::size_t>& hist);
/// vertex,outdegree,visits,nn_count
void write_vertex_stats_csv(std::ostream& out, const Graph& g, const GraphStats& stats);

} // namespace simgraph
