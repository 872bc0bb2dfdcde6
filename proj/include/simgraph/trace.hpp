#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "simgraph/common.hpp"

namespace simgraph {

struct Neighbor {
    VertexId id = 0;
    double distance = 0.0;

    friend bool operator<(const Neighbor& a, const Neighbor& b) noexcept {
        return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
    }
    friend bool operator>(const Neighbor& a, const Neighbor& b) noexcept { return b < a; }
    bool operator==(const Neighbor&) const = default;
};

/// One expansion of the search loop. The ranges index into SearchTrace::kept_edges
/// and SearchTrace::dropped_edges.
struct ExpansionStep {
    VertexId vertex = 0;
    std::uint32_t kept_begin = 0;
    std::uint32_t kept_end = 0;
    std::uint32_t dropped_begin = 0;
    std::uint32_t dropped_end = 0;

    bool operator==(const ExpansionStep&) const = default;
};

/// Everything one search session did. dcs == visited.size(); hops == steps.size().
struct SearchTrace {
    std::vector<VertexId> visited;
    std::vector<ExpansionStep> steps;
    std::vector<EdgeId> kept_edges;
    std::vector<EdgeId> dropped_edges;
    std::size_t dcs = 0;
    std::size_t hops = 0;
    std::vector<Neighbor> topk;

    std::span<const EdgeId> kept(const ExpansionStep& s) const {
        return std::span<const EdgeId>(kept_edges).subspan(s.kept_begin, s.kept_end - s.kept_begin);
    }
    std::span<const EdgeId> dropped(const ExpansionStep& s) const {
        return std::span<const EdgeId>(dropped_edges)
            .subspan(s.dropped_begin, s.dropped_end - s.dropped_begin);
    }
    /// Id of the best result, or the start vertex if the search returned nothing else.
    VertexId best() const { return topk.front().id; }

    bool operator==(const SearchTrace&) const = default;
};

} // namespace simgraph
