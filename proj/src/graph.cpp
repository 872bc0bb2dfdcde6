#include "simgraph/graph.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <queue>
#include <string>

namespace simgraph {

namespace {

constexpr char kGraphMagic[4] = {'S', 'G', 'R', 'F'};
constexpr std::uint32_t kGraphVersion = 1;
constexpr std::uint32_t kHasEdgeState = 1u;

class ByteWriter {
public:
    template <typename T>
    void put(const T& v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    template <typename T>
    void put_array(const std::vector<T>& v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
        bytes.insert(bytes.end(), p, p + v.size() * sizeof(T));
    }
    std::vector<std::uint8_t> bytes;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> b) : bytes_(b) {}

    template <typename T>
    T get() {
        T v{};
        need(sizeof(T));
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    template <typename T>
    std::vector<T> get_array(std::size_t count) {
        if (count > (bytes_.size() - pos_) / sizeof(T)) need(count * sizeof(T));
        std::vector<T> v(count);
        std::memcpy(v.data(), bytes_.data() + pos_, count * sizeof(T));
        pos_ += count * sizeof(T);
        return v;
    }
    bool done() const { return pos_ == bytes_.size(); }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError("graph file truncated", pos_);
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

// Beam search over mutable adjacency lists; returns up to ef results sorted nearest first.
std::vector<Neighbor> search_lists(const std::vector<std::vector<VertexId>>& lists,
                                   const FloatMatrix& base, VertexId start,
                                   std::span<const float> q, std::size_t ef,
                                   std::vector<std::uint32_t>& seen, std::uint32_t stamp) {
    std::priority_queue<Neighbor, std::vector<Neighbor>, std::greater<>> candidates;
    std::priority_queue<Neighbor> results;
    const Neighbor s{start, squared_l2(q, base.row(start))};
    seen[start] = stamp;
    candidates.push(s);
    results.push(s);
    while (!candidates.empty()) {
        const Neighbor c = candidates.top();
        if (results.size() >= ef && results.top() < c) break;
        candidates.pop();
        for (VertexId t : lists[c.id]) {
            if (seen[t] == stamp) continue;
            seen[t] = stamp;
            const Neighbor nb{t, squared_l2(q, base.row(t))};
            if (results.size() < ef || nb < results.top()) {
                candidates.push(nb);
                results.push(nb);
                if (results.size() > ef) results.pop();
            }
        }
    }
    std::vector<Neighbor> out(results.size());
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
        *it = results.top();
        results.pop();
    }
    return out;
}

// Drops one edge from an over-full list: the farthest target that keeps another in-edge,
// or the farthest overall if every target would become orphaned.
void trim_nearest(std::vector<VertexId>& list, VertexId owner, const FloatMatrix& base,
                  std::size_t cap, std::vector<std::uint32_t>& indegree) {
    while (list.size() > cap) {
        std::vector<Neighbor> scored;
        scored.reserve(list.size());
        for (VertexId t : list) scored.push_back({t, squared_l2(base.row(owner), base.row(t))});
        std::sort(scored.begin(), scored.end());
        std::size_t victim = scored.size() - 1;
        for (std::size_t i = scored.size(); i-- > 0;) {
            if (indegree[scored[i].id] > 1) {
                victim = i;
                break;
            }
        }
        --indegree[scored[victim].id];
        scored.erase(scored.begin() + static_cast<std::ptrdiff_t>(victim));
        list.clear();
        for (const auto& nb : scored) list.push_back(nb.id);
    }
}

std::vector<std::uint8_t> reachable(const std::vector<std::vector<VertexId>>& lists, VertexId start) {
    std::vector<std::uint8_t> seen(lists.size(), 0);
    std::vector<VertexId> stack{start};
    seen[start] = 1;
    while (!stack.empty()) {
        const VertexId v = stack.back();
        stack.pop_back();
        for (VertexId t : lists[v])
            if (!seen[t]) {
                seen[t] = 1;
                stack.push_back(t);
            }
    }
    return seen;
}

// Links every vertex left unreachable by trimming from its nearest reachable vertex. A vertex
// with a free slot is preferred; otherwise the nearest one gives up its farthest edge.
void repair_reachability(std::vector<std::vector<VertexId>>& lists, const FloatMatrix& base,
                         VertexId start, std::span<const VertexId> order, std::size_t cap,
                         std::vector<std::uint32_t>& indegree) {
    auto seen = reachable(lists, start);
    for (std::size_t round = 0; round < 4 * order.size(); ++round) {
        const auto it = std::find_if(order.begin(), order.end(), [&](VertexId v) { return !seen[v]; });
        if (it == order.end()) return;
        const VertexId u = *it;
        std::vector<Neighbor> near;
        for (VertexId v = 0; v < lists.size(); ++v)
            if (seen[v]) near.push_back({v, squared_l2(base.row(u), base.row(v))});
        std::sort(near.begin(), near.end());
        auto host = std::find_if(near.begin(), near.end(), [&](const Neighbor& nb) { return lists[nb.id].size() < cap; });
        const VertexId r = host != near.end() ? host->id : near.front().id;
        lists[r].push_back(u);
        ++indegree[u];
        trim_nearest(lists[r], r, base, cap, indegree);
        seen = reachable(lists, start);
    }
    throw GraphError("build_nsw: could not make every vertex reachable from the start");
}

} // namespace

Graph::Graph(std::vector<EdgeId> offsets, std::vector<VertexId> neighbors, VertexId start)
    : offsets_(std::move(offsets)), neighbors_(std::move(neighbors)), start_(start) {
    if (offsets_.empty() || offsets_.front() != 0 || offsets_.back() != neighbors_.size())
        throw GraphError("graph offsets do not cover the neighbor array");
}

Graph Graph::from_lists(const std::vector<std::vector<VertexId>>& lists, VertexId start) {
    std::vector<EdgeId> offsets(lists.size() + 1, 0);
    std::size_t total = 0;
    for (std::size_t v = 0; v < lists.size(); ++v) {
        total += lists[v].size();
        if (total > std::numeric_limits<EdgeId>::max()) throw GraphError("too many edges");
        offsets[v + 1] = static_cast<EdgeId>(total);
    }
    std::vector<VertexId> flat;
    flat.reserve(total);
    for (const auto& l : lists) flat.insert(flat.end(), l.begin(), l.end());
    Graph g(std::move(offsets), std::move(flat), start);
    g.validate();
    return g;
}

void Graph::set_start_vertex(VertexId v) {
    if (v >= num_vertices()) throw GraphError("start vertex out of range");
    start_ = v;
}

std::vector<VertexId> Graph::edge_sources() const {
    std::vector<VertexId> src(num_edges());
    for (VertexId v = 0; v < num_vertices(); ++v)
        std::fill(src.begin() + offsets_[v], src.begin() + offsets_[v + 1], v);
    return src;
}

bool Graph::has_edge(VertexId from, VertexId to) const {
    auto n = neighbors(from);
    return std::find(n.begin(), n.end(), to) != n.end();
}

const EdgeState& Graph::edge_state() const {
    if (!state_) throw GraphError("graph has no edge state");
    return *state_;
}

EdgeState& Graph::edge_state() {
    if (!state_) throw GraphError("graph has no edge state");
    return *state_;
}

void Graph::set_edge_state(EdgeState state) {
    if (state.prob.size() != num_edges() || state.frozen.size() != num_edges())
        throw GraphError("edge state size does not match edge count");
    for (std::size_t e = 0; e < state.prob.size(); ++e)
        if (!(state.prob[e] >= 0.0f && state.prob[e] <= 1.0f) || state.frozen[e] > 1)
            throw GraphError("edge state entry " + std::to_string(e) + " out of range");
    state_ = std::move(state);
}

Graph Graph::filter_edges(const std::function<bool(EdgeId)>& keep) const {
    std::vector<EdgeId> offsets(offsets_.size(), 0);
    std::vector<VertexId> flat;
    std::optional<EdgeState> state;
    if (state_) state.emplace();
    for (VertexId v = 0; v < num_vertices(); ++v) {
        for (EdgeId e = offsets_[v]; e < offsets_[v + 1]; ++e) {
            if (!keep(e)) continue;
            flat.push_back(neighbors_[e]);
            if (state) {
                state->prob.push_back(state_->prob[e]);
                state->frozen.push_back(state_->frozen[e]);
            }
        }
        offsets[v + 1] = static_cast<EdgeId>(flat.size());
    }
    Graph out(std::move(offsets), std::move(flat), start_);
    out.state_ = std::move(state);
    return out;
}

void Graph::validate() const {
    const std::size_t n = num_vertices();
    if (n == 0) throw GraphError("graph has no vertices");
    if (start_ >= n) throw GraphError("start vertex " + std::to_string(start_) + " out of range");
    for (std::size_t v = 0; v < n; ++v)
        if (offsets_[v] > offsets_[v + 1]) throw GraphError("offsets not monotone");
    std::vector<std::uint32_t> mark(n, 0);
    for (VertexId v = 0; v < n; ++v) {
        for (VertexId t : neighbors(v)) {
            if (t >= n)
                throw GraphError("edge " + std::to_string(v) + "->" + std::to_string(t) +
                                 " leaves the vertex range");
            if (t == v) throw GraphError("self-loop at vertex " + std::to_string(v));
            if (mark[t] == v + 1)
                throw GraphError("duplicate edge " + std::to_string(v) + "->" + std::to_string(t));
            mark[t] = v + 1;
        }
    }
    if (state_) {
        if (state_->prob.size() != num_edges() || state_->frozen.size() != num_edges())
            throw GraphError("edge state size does not match edge count");
        for (float p : state_->prob)
            if (!(p >= 0.0f && p <= 1.0f)) throw GraphError("edge probability outside [0, 1]");
    }
}

double Graph::mean_outdegree() const {
    const std::size_t n = num_vertices();
    return n == 0 ? 0.0 : static_cast<double>(num_edges()) / static_cast<double>(n);
}

bool is_subgraph(const Graph& sub, const Graph& super) {
    if (sub.num_vertices() != super.num_vertices()) return false;
    for (VertexId v = 0; v < sub.num_vertices(); ++v) {
        auto a = super.neighbors(v);
        std::vector<VertexId> sorted(a.begin(), a.end());
        std::sort(sorted.begin(), sorted.end());
        for (VertexId t : sub.neighbors(v))
            if (!std::binary_search(sorted.begin(), sorted.end(), t)) return false;
    }
    return true;
}

Graph build_complete(std::size_t n, VertexId start) {
    if (n == 0) throw GraphError("build_complete: n must be positive");
    if (start >= n) throw GraphError("build_complete: start vertex out of range");
    std::vector<std::vector<VertexId>> lists(n);
    for (VertexId i = 0; i < n; ++i) {
        lists[i].reserve(n - 1);
        for (VertexId j = 0; j < n; ++j)
            if (i != j) lists[i].push_back(j);
    }
    return Graph::from_lists(lists, start);
}

Graph build_nsw(const FloatMatrix& base, const NswParams& params) {
    if (base.empty()) throw GraphError("build_nsw: empty base");
    if (params.M < 1) throw GraphError("build_nsw: M must be >= 1");
    if (params.ef_construction < params.M) throw GraphError("build_nsw: ef_construction must be >= M");

    const std::size_t n = base.rows();
    std::vector<VertexId> order(n);
    std::iota(order.begin(), order.end(), VertexId{0});
    Rng rng(params.seed);
    std::shuffle(order.begin(), order.end(), rng);

    const VertexId start = order.front();
    const std::size_t cap = 2 * params.M;
    std::vector<std::vector<VertexId>> lists(n);
    std::vector<std::uint32_t> seen(n, 0);
    std::vector<std::uint32_t> indegree(n, 0);
    for (std::size_t i = 1; i < n; ++i) {
        const VertexId p = order[i];
        const auto found = search_lists(lists, base, start, base.row(p), params.ef_construction,
                                        seen, static_cast<std::uint32_t>(i));
        const std::size_t links = std::min(params.M, found.size());
        for (std::size_t j = 0; j < links; ++j) {
            const VertexId t = found[j].id;
            lists[p].push_back(t);
            lists[t].push_back(p);
            ++indegree[t];
            ++indegree[p];
            trim_nearest(lists[t], t, base, cap, indegree);
        }
    }
    repair_reachability(lists, base, start, order, cap, indegree);
    return Graph::from_lists(lists, start);
}

Graph extract_deterministic(const Graph& g) {
    const auto& state = g.edge_state();
    Graph out = g.filter_edges([&](EdgeId e) { return state.prob[e] >= 0.5f; });
    out.clear_edge_state();
    return out;
}

Graph prune_unvisited(const Graph& g, std::span<const SearchTrace> traces) {
    std::vector<std::uint8_t> used(g.num_edges(), 0);
    std::vector<std::uint8_t> seen(g.num_vertices(), 0);
    for (const auto& trace : traces) {
        // An edge is used when the search reached its target through it.
        std::fill(seen.begin(), seen.end(), 0);
        if (!trace.visited.empty()) {
            if (trace.visited.front() >= g.num_vertices()) throw GraphError("trace starts outside the graph");
            seen[trace.visited.front()] = 1;
        }
        for (const auto& step : trace.steps) {
            if (step.vertex >= g.num_vertices())
                throw GraphError("trace expands vertex outside the graph");
            for (EdgeId e : trace.kept(step)) {
                if (e < g.edge_begin(step.vertex) || e >= g.edge_end(step.vertex))
                    throw GraphError("trace edge " + std::to_string(e) +
                                     " does not leave vertex " + std::to_string(step.vertex));
                const VertexId t = g.edge_target(e);
                if (seen[t]) continue;
                seen[t] = 1;
                used[e] = 1;
            }
        }
    }
    return g.filter_edges([&](EdgeId e) { return used[e] != 0; });
}

std::map<std::size_t, std::size_t> degree_histogram(const Graph& g) {
    std::map<std::size_t, std::size_t> hist;
    for (VertexId v = 0; v < g.num_vertices(); ++v) ++hist[g.outdegree(v)];
    return hist;
}

std::vector<std::uint8_t> serialize(const Graph& g) {
    ByteWriter w;
    w.bytes.insert(w.bytes.end(), std::begin(kGraphMagic), std::end(kGraphMagic));
    w.put(kGraphVersion);
    w.put(static_cast<std::uint32_t>(g.has_edge_state() ? kHasEdgeState : 0u));
    w.put(static_cast<std::uint64_t>(g.num_vertices()));
    w.put(static_cast<std::uint64_t>(g.num_edges()));
    w.put(static_cast<std::uint32_t>(g.start_vertex()));
    std::vector<std::uint64_t> offsets(g.offsets().begin(), g.offsets().end());
    w.put_array(offsets);
    w.put_array(g.flat_neighbors());
    if (g.has_edge_state()) {
        w.put_array(g.edge_state().prob);
        w.put_array(g.edge_state().frozen);
    }
    return std::move(w.bytes);
}

Graph deserialize(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kGraphMagic, 4) != 0)
        throw FormatError("not a graph file (bad magic)", 0);
    ByteReader r(bytes.subspan(4));
    const auto version = r.get<std::uint32_t>();
    if (version != kGraphVersion)
        throw FormatError("unsupported graph file version " + std::to_string(version), 4);
    const auto flags = r.get<std::uint32_t>();
    const auto n = r.get<std::uint64_t>();
    const auto m = r.get<std::uint64_t>();
    const auto start = r.get<std::uint32_t>();
    if (n == 0 || m > std::numeric_limits<EdgeId>::max() || n >= std::numeric_limits<VertexId>::max())
        throw FormatError("graph header has invalid sizes", 12);
    const auto offsets64 = r.get_array<std::uint64_t>(n + 1);
    std::vector<EdgeId> offsets(offsets64.begin(), offsets64.end());
    auto neighbors = r.get_array<VertexId>(m);
    if (offsets64.back() != m) throw FormatError("graph offsets inconsistent with edge count");
    Graph g(std::move(offsets), std::move(neighbors), start);
    if (flags & kHasEdgeState) {
        EdgeState st;
        st.prob = r.get_array<float>(m);
        st.frozen = r.get_array<std::uint8_t>(m);
        g.set_edge_state(std::move(st));
    }
    if (!r.done()) throw FormatError("trailing bytes after graph payload", 4 + r.pos());
    g.validate();
    return g;
}

void save_graph(const std::filesystem::path& path, const Graph& g) {
    const auto bytes = serialize(g);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing " + path.string());
}

Graph load_graph(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

void write_histogram_csv(std::ostream& out, const std::map<std::size_t, std::size_t>& hist) {
    out << "outdegree,count\n";
    for (const auto& [deg, count] : hist) out << deg << ',' << count << '\n';
}

void write_vertex_stats_csv(std::ostream& out, const Graph& g, const GraphStats& stats) {
    out << "vertex,outdegree,visits,nn_count\n";
    for (VertexId v = 0; v < g.num_vertices(); ++v) {
        out << v << ',' << g.outdegree(v) << ','
            << (v < stats.visit_counts.size() ? stats.visit_counts[v] : 0) << ','
            << (v < stats.nn_counts.size() ? stats.nn_counts[v] : 0) << '\n';
    }
}

} // namespace simgraph
