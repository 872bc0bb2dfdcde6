// Acceptance suite: one PASS/FAIL line per criterion, detail lines indented below it.
// Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "simgraph/commands.hpp"
#include "simgraph/pruning.hpp"

using namespace simgraph;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool pass = false;
    std::vector<std::string> details;
};

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("simgraph_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

class CoinAgent final : public EdgeAgent {
public:
    explicit CoinAgent(double keep) : keep_(keep) {}
    void decide(const SearchState&, std::span<std::uint8_t> keep, Rng& rng) const override {
        std::bernoulli_distribution coin(keep_);
        for (auto& k : keep) k = coin(rng);
    }

private:
    double keep_;
};

// Base set with a few exact duplicates so that tie-breaking is exercised.
FloatMatrix random_base(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
    FloatMatrix base = oracle::random_matrix(n, dim, rng);
    if (n > 2 && rng() % 2 == 0) {
        const std::size_t a = rng() % n, b = rng() % n;
        std::copy(base.row(a).begin(), base.row(a).end(), base.row(b).begin());
    }
    return base;
}

// ---------------------------------------------------------------------------------------

Outcome toy_reproduction(const fs::path& out) {
    ExperimentConfig cfg = preset("toy");
    cfg.out_dir = out.string();
    Outcome o;
    const auto t0 = Clock::now();
    cmd_prepare(cfg);
    cmd_build(cfg);
    const TrainSummary s = cmd_train(cfg);
    const double elapsed = seconds_since(t0);

    const Dataset ds = load_manifest(cfg.manifest_path());
    const Graph g = load_graph(cfg.refined_path());
    const KeepAllAgent agent;
    const EvalResult test = evaluate(g, ds.base, agent, ds.test.vectors, ds.test.gt, cfg.search);
    std::vector<SearchTrace> traces;
    evaluate(g, ds.base, agent, ds.train.vectors, ds.train.gt, cfg.search, {}, &traces);
    const Graph pruned = prune_unvisited(g, traces);

    o.pass = test.recall_at_1 >= 0.90 && test.mean_dcs <= 35.0 && test.mean_hops <= 5.0 &&
             pruned.mean_outdegree() <= 6.0 && elapsed <= 15 * 60.0;
    o.details.push_back(fmt("best epoch %zu, val reward %.2f -> %.2f", s.best_epoch, s.initial_val_reward,
                            s.best_val_reward));
    o.details.push_back(fmt("test recall %.3f (>= 0.90), mean DCS %.2f (<= 35), mean hops %.2f (<= 5)",
                            test.recall_at_1, test.mean_dcs, test.mean_hops));
    o.details.push_back(fmt("outdegree %.2f after training, %.2f after removing unused edges (<= 6)",
                            g.mean_outdegree(), pruned.mean_outdegree()));
    o.details.push_back(fmt("prepare+build+train %.0f s (<= 900)", elapsed));
    return o;
}

// Recall of the initial graph at a given mean DCS, linear between neighboring sweep points.
// Outside the swept range the nearest endpoint is used.
double interpolate_recall(const std::vector<std::pair<double, double>>& curve, double dcs) {
    if (dcs <= curve.front().first) return curve.front().second;
    if (dcs >= curve.back().first) return curve.back().second;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const auto [x1, y1] = curve[i];
        const auto [x0, y0] = curve[i - 1];
        if (dcs <= x1) return x1 == x0 ? std::max(y0, y1) : y0 + (y1 - y0) * (dcs - x0) / (x1 - x0);
    }
    return curve.back().second;
}

struct DeskSeed {
    double initial_val = 0.0, refined_val = 0.0, pruned_val = 0.0;
    double refined_dcs = 0.0, refined_recall = 0.0, initial_recall_at_dcs = 0.0;
    double seconds = 0.0;
};

DeskSeed desk_run(std::uint64_t seed) {
    ExperimentConfig cfg = preset("desk-nsw");
    cfg.seed = seed;
    cfg.out_dir = scratch("desk_" + std::to_string(seed)).string();
    const auto t0 = Clock::now();
    cmd_prepare(cfg);
    cmd_build(cfg);
    const TrainSummary s = cmd_train(cfg);
    cmd_prune(cfg);

    const Dataset ds = load_manifest(cfg.manifest_path());
    const KeepAllAgent agent;
    const Graph g0 = load_graph(cfg.graph_path());
    const Graph refined = load_graph(cfg.refined_path());
    const Graph pruned = load_graph(cfg.pruned_path());

    DeskSeed r;
    r.initial_val = s.initial_val_reward;
    r.refined_val = s.best_val_reward;
    r.pruned_val = mean_reward(evaluate(pruned, ds.base, agent, ds.val.vectors, ds.val.gt, cfg.search), cfg.reward);

    const EvalResult rt = evaluate(refined, ds.base, agent, ds.test.vectors, ds.test.gt, cfg.search);
    r.refined_dcs = rt.mean_dcs;
    r.refined_recall = rt.recall_at_1;
    std::vector<std::pair<double, double>> curve;
    for (std::size_t ef : {1, 2, 3, 4, 5, 6, 8, 10, 12, 16, 20, 24, 32, 48, 64, 96, 128}) {
        const EvalResult e = evaluate(g0, ds.base, agent, ds.test.vectors, ds.test.gt, {cfg.search.k, ef});
        curve.emplace_back(e.mean_dcs, e.recall_at_1);
    }
    std::sort(curve.begin(), curve.end());
    r.initial_recall_at_dcs = interpolate_recall(curve, r.refined_dcs);
    r.seconds = seconds_since(t0);
    fs::remove_all(cfg.out_dir);
    return r;
}

// ---------------------------------------------------------------------------------------

Outcome search_equivalence() {
    std::mt19937_64 rng(101);
    const KeepAllAgent agent;
    std::size_t mismatches = 0;
    const std::size_t trials = 10000;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        const std::size_t n = 1 + rng() % 60, dim = 1 + rng() % 8;
        const FloatMatrix base = random_base(n, dim, rng);
        Graph g = oracle::random_graph(n, 0.02 + 0.5 * std::uniform_real_distribution<double>()(rng), rng);
        g.set_start_vertex(static_cast<VertexId>(rng() % n));
        FloatMatrix q = oracle::random_matrix(1, dim, rng);
        if (rng() % 4 == 0) {
            const auto row = base.row(rng() % n);
            std::copy(row.begin(), row.end(), q.row(0).begin());
        }
        const std::size_t k = 1 + rng() % 5, ef = k + rng() % 12;

        const SearchTrace t = beam_search(g, base, agent, q.row(0), {k, ef}, trial);
        const auto ref = oracle::beam_search(g, base, q.row(0).data(), k, ef);
        bool same = t.visited == ref.visited && t.dcs == ref.visited.size() && t.hops == ref.hops &&
                    t.topk.size() == ref.topk.size();
        for (std::size_t i = 0; same && i < t.topk.size(); ++i)
            same = t.topk[i].id == ref.topk[i].second && t.topk[i].distance == ref.topk[i].first;
        mismatches += !same;
    }
    return {mismatches == 0, {fmt("%zu instances, %zu mismatches (visited order, TopK ids and distances, DCS, hops)",
                                  trials, mismatches)}};
}

Outcome oracle_suite() {
    std::mt19937_64 rng(202);
    std::size_t gt_mismatch = 0, gt_total = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 1 + rng() % 300, dim = 1 + rng() % 16;
        const FloatMatrix base = random_base(n, dim, rng);
        const FloatMatrix q = oracle::random_matrix(1 + rng() % 100, dim, rng);
        const auto got = brute_force_gt(base, q, 1 + trial % 3);
        const auto want = oracle::nearest(base, q);
        gt_total += q.rows();
        for (std::size_t i = 0; i < q.rows(); ++i) gt_mismatch += got[i] != want[i];
    }

    const std::size_t n = 200, dim = 8;
    const FloatMatrix base = oracle::random_matrix(n, dim, rng);
    const FloatMatrix queries = oracle::random_matrix(1000, dim, rng);
    const auto gt = oracle::nearest(base, queries);
    const EvalResult r = evaluate(build_complete(n, 0), base, KeepAllAgent{}, queries,
                                  std::vector<VertexId>(gt.begin(), gt.end()), {1, n});

    return {gt_mismatch == 0 && r.recall_at_1 == 1.0,
            {fmt("brute force vs double-precision oracle: %zu/%zu mismatches", gt_mismatch, gt_total),
             fmt("complete graph n=%zu, ef=n, 1000 queries: recall %.4f", n, r.recall_at_1)}};
}

Outcome gradient_check() {
    std::mt19937_64 rng(303);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + rng() % 8, h = 1 + rng() % 16, F = 2 * d;
        BasicPolicyParams<double> p(F, h);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        for (auto& v : p.values()) v = u(rng);
        PolicyBatch<double> batch;
        const std::size_t rows = 1 + rng() % 6;
        batch.features = RowMatrix<double>(rows, F);
        for (Eigen::Index i = 0; i < batch.features.size(); ++i) batch.features.data()[i] = 2.0 * u(rng);
        for (std::size_t i = 0; i < rows; ++i) {
            batch.keep.push_back(rng() & 1);
            batch.advantage.push_back(6.0 * u(rng));
        }
        const double ent = trial % 2 ? 0.01 : 0.3;

        const auto g = grad(p, batch, ent);
        const double step = 1e-4;
        for (const auto& r : p.layout()) {
            double diff = 0.0, norm = 0.0;
            for (std::size_t i = r.offset; i < r.offset + r.size; ++i) {
                auto plus = p, minus = p;
                plus.values()[i] += step;
                minus.values()[i] -= step;
                const double fd =
                    (policy_objective(plus, batch, ent) - policy_objective(minus, batch, ent)) / (2 * step);
                diff += (fd - g.values()[i]) * (fd - g.values()[i]);
                norm += fd * fd;
            }
            worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-8));
        }
    }
    return {worst < 1e-4, {fmt("100 instances, d <= 8, h <= 16: worst per-tensor relative error %.2e (< 1e-4)", worst)}};
}

Outcome reward_suite() {
    auto trace = [](VertexId best, std::size_t dcs) {
        SearchTrace t;
        t.topk = {{best, 0.0}};
        t.dcs = dcs;
        return t;
    };
    const RewardConfig r150{150};
    const bool rows = compute_reward(trace(3, 10), 4, r150) == 0.0 && compute_reward(trace(4, 128), 4, r150) == 22.0 &&
                      compute_reward(trace(4, 200), 4, r150) == 1.0;

    // real search traces from a stochastic agent on random graphs
    std::mt19937_64 rng(404);
    std::size_t violations = 0, found = 0;
    const std::size_t total = 100000;
    std::size_t done = 0;
    while (done < total) {
        const std::size_t n = 2 + rng() % 40, dim = 1 + rng() % 4;
        const FloatMatrix base = random_base(n, dim, rng);
        const Graph g = oracle::random_graph(n, 0.05 + 0.4 * std::uniform_real_distribution<double>()(rng), rng);
        const CoinAgent agent(std::uniform_real_distribution<double>(0.2, 1.0)(rng));
        const FloatMatrix q = oracle::random_matrix(100, dim, rng);
        const auto gt = oracle::nearest(base, q);
        for (std::size_t i = 0; i < q.rows() && done < total; ++i, ++done) {
            const RewardConfig cfg{2 + rng() % 80};
            const SearchTrace t = beam_search(g, base, agent, q.row(i), {1, 1 + rng() % 4}, rng());
            const double r = compute_reward(t, gt[i], cfg);
            const bool hit = t.best() == gt[i];
            found += hit;
            const double want = hit ? std::max<double>(static_cast<double>(cfg.dcs_max) - static_cast<double>(t.dcs), 1.0) : 0.0;
            const bool in_range = hit ? (r >= 1.0 && r <= static_cast<double>(cfg.dcs_max) - 1.0) : r == 0.0;
            violations += !(in_range && r == want);
        }
    }
    return {rows && violations == 0,
            {fmt("example rows (0, 22, 1): %s", rows ? "exact" : "MISMATCH"),
             fmt("%zu fuzzed traces (%zu found): %zu outside {0} u [1, dcs_max-1]", total, found, violations)}};
}

Outcome subgraph_invariants() {
    std::mt19937_64 rng(505);
    std::size_t bad_extract = 0, bad_prune = 0, bad_tune = 0;
    const std::size_t graphs = 1000;
    for (std::size_t trial = 0; trial < graphs; ++trial) {
        const std::size_t n = 1 + rng() % 40, dim = 1 + rng() % 4;
        const FloatMatrix base = random_base(n, dim, rng);
        Graph g = oracle::random_graph(n, std::uniform_real_distribution<double>(0.0, 0.6)(rng), rng);
        g.set_start_vertex(static_cast<VertexId>(rng() % n));

        EdgeState st{std::vector<float>(g.num_edges()), std::vector<std::uint8_t>(g.num_edges())};
        for (std::size_t e = 0; e < g.num_edges(); ++e) {
            st.prob[e] = std::uniform_real_distribution<float>(0.0f, 1.0f)(rng);
            st.frozen[e] = rng() % 4 == 0;
        }
        Graph with_state = g;
        with_state.set_edge_state(st);
        bad_extract += !is_subgraph(extract_deterministic(with_state), g);

        const FloatMatrix q = oracle::random_matrix(1 + rng() % 10, dim, rng);
        const CoinAgent agent(0.7);
        std::vector<SearchTrace> traces;
        for (std::size_t i = 0; i < q.rows(); ++i) traces.push_back(beam_search(g, base, agent, q.row(i), {1, 1 + rng() % 3}, i));
        bad_prune += !is_subgraph(prune_unvisited(g, traces), g);

        QuerySet val;
        val.vectors = oracle::random_matrix(1 + rng() % 8, dim, rng);
        const auto gt = oracle::nearest(base, val.vectors);
        val.gt.assign(gt.begin(), gt.end());
        PruneConfig pc;
        pc.reward.dcs_max = 20;
        pc.search = {1, 2};
        pc.quantiles = 8;
        const EdgeUsage usage = collect_usage(g, base, q, pc.search);
        bad_tune += !is_subgraph(tune_threshold_and_prune(g, base, usage, val, pc).graph, g);
    }

    std::vector<std::vector<VertexId>> lists(11);
    for (VertexId t = 1; t <= 10; ++t) lists[0].push_back(t);
    const Graph star = Graph::from_lists(lists, 0);
    EdgeUsage u{std::vector<std::size_t>(10, 0), std::vector<std::size_t>(11, 0)};
    u.vertex_visits[0] = 99;
    u.edge_visits[0] = 9;
    const double w = edge_weights(u, star, 0.1)[0];

    return {bad_extract + bad_prune + bad_tune == 0 && w == 0.091,
            {fmt("%zu fuzzed graphs: violations extract %zu, unused-edge removal %zu, threshold pruning %zu", graphs,
                 bad_extract, bad_prune, bad_tune),
             fmt("weight example n_e=9, n_v=99, outdeg=10, lambda=0.1: %.17g (want 0.091)", w)}};
}

Outcome determinism(const fs::path& first) {
    ExperimentConfig cfg = preset("toy");
    cfg.out_dir = scratch("toy_repeat").string();
    cmd_prepare(cfg);
    cmd_build(cfg);
    cmd_train(cfg);
    Outcome o{true, {}};
    for (const char* name : {"manifest.json", "graph.bin", "training_log.csv", "refined.bin", "refined_probs.bin",
                             "policy.bin"}) {
        const std::string a = read_file(first / name), b = read_file(cfg.out() / name);
        const bool same = !a.empty() && a == b;
        o.pass = o.pass && same;
        o.details.push_back(fmt("%s: %zu bytes, %s", name, a.size(), same ? "identical" : "DIFFERENT"));
    }
    fs::remove_all(cfg.out_dir);
    return o;
}

int failures = 0;
std::ofstream report_file;

void emit(const std::string& line) {
    std::cout << line << '\n' << std::flush;
    if (report_file) report_file << line << '\n' << std::flush;
}

void report(const std::string& name, const std::function<Outcome()>& run) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
        o = run();
    } catch (const std::exception& e) {
        o = {false, {std::string("exception: ") + e.what()}};
    }
    failures += !o.pass;
    emit((o.pass ? "PASS " : "FAIL ") + name + fmt("  [%.1f s]", seconds_since(t0)));
    for (const auto& d : o.details) emit("     " + d);
}

} // namespace

// Optional argument: a file that receives a copy of the report.
int main(int argc, char** argv) {
    if (argc > 1) report_file.open(argv[1], std::ios::trunc);
    report("search equivalence: all-keep agent vs reference search", search_equivalence);
    report("oracle suite: brute-force ground truth and exhaustive complete-graph search", oracle_suite);
    report("gradient correctness: analytic vs central differences", gradient_check);
    report("reward units: example rows and range over fuzzed traces", reward_suite);
    report("subgraph invariants: extraction, unused-edge removal, threshold pruning", subgraph_invariants);

    const fs::path toy_dir = scratch("toy");
    report("toy reproduction: 100-point complete graph, greedy search", [&] { return toy_reproduction(toy_dir); });
    report("determinism: two training runs, byte-identical outputs", [&] { return determinism(toy_dir); });
    fs::remove_all(toy_dir);

    std::vector<DeskSeed> seeds;
    double desk_seconds = 0.0;
    std::string desk_error;
    try {
        for (std::uint64_t s = 1; s <= 5; ++s) {
            seeds.push_back(desk_run(s));
            desk_seconds += seeds.back().seconds;
        }
    } catch (const std::exception& e) {
        desk_error = e.what();
    }
    report("improvement over the initial 2000-point NSW graph", [&] {
        if (!desk_error.empty()) return Outcome{false, {"exception: " + desk_error}};
        Outcome o;
        std::size_t better = 0, recall_ok = 0;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const auto& s = seeds[i];
            better += s.refined_val > s.initial_val;
            recall_ok += s.refined_recall >= s.initial_recall_at_dcs - 0.005;
            o.details.push_back(fmt("seed %zu: val reward %.2f -> %.2f; test recall %.4f at DCS %.1f vs initial %.4f; %.0f s",
                                    i + 1, s.initial_val, s.refined_val, s.refined_recall, s.refined_dcs,
                                    s.initial_recall_at_dcs, s.seconds));
        }
        o.pass = better >= 4 && recall_ok == seeds.size() && desk_seconds <= 3600.0;
        o.details.push_back(fmt("val reward improved in %zu/5 (need 4); recall within 0.5pp at matched DCS in %zu/5 (need 5); %.0f s total (<= 3600)",
                                better, recall_ok, desk_seconds));
        return o;
    });
    report("RL refinement vs magnitude pruning on the same setup", [&] {
        if (!desk_error.empty()) return Outcome{false, {"exception: " + desk_error}};
        Outcome o;
        std::size_t wins = 0;
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            wins += seeds[i].refined_val >= seeds[i].pruned_val;
            o.details.push_back(fmt("seed %zu: val reward refined %.2f, pruned %.2f", i + 1, seeds[i].refined_val,
                                    seeds[i].pruned_val));
        }
        o.pass = wins >= 4;
        o.details.push_back(fmt("refined >= pruned in %zu/5 (need 4)", wins));
        return o;
    });

    emit(failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures));
    return failures == 0 ? 0 : 1;
}
