#include "simgraph/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>

#include "simgraph/pruning.hpp"
#include "simgraph/search.hpp"
#include "simgraph/trainer.hpp"

namespace simgraph {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << std::setprecision(10);
    return out;
}

void require_file(const fs::path& path, const char* what) {
    if (path.empty()) throw DataError(std::string(what) + " path is not configured");
    if (!fs::exists(path)) throw DataError(std::string(what) + " not found: " + path.string());
}

IntMatrix gt_matrix(const std::vector<VertexId>& gt) {
    std::vector<std::int32_t> data(gt.begin(), gt.end());
    return IntMatrix(gt.size(), gt.empty() ? 0 : 1, std::move(data));
}

std::vector<VertexId> gt_from_matrix(const IntMatrix& m, std::size_t n_base) {
    std::vector<VertexId> gt;
    gt.reserve(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const std::int32_t id = m.row(i)[0];
        if (id < 0 || static_cast<std::size_t>(id) >= n_base) throw DataError("ground truth id out of range");
        gt.push_back(static_cast<VertexId>(id));
    }
    return gt;
}

Dataset dataset_from_files(const DatasetConfig& d) {
    require_file(d.base_path, "base vectors");
    require_file(d.learn_path, "learn queries");
    require_file(d.test_path, "test queries");
    Dataset ds;
    ds.base = load_fvecs(d.base_path);
    ds.test.vectors = load_fvecs(d.test_path);
    QuerySet learn;
    learn.vectors = load_fvecs(d.learn_path);
    if (d.dedup_learn_against_test) remove_exact_duplicates(learn, ds.test.vectors);
    if (!d.val_path.empty()) {
        require_file(d.val_path, "validation queries");
        ds.val.vectors = load_fvecs(d.val_path);
        ds.train = std::move(learn);
    } else {
        const std::size_t n_val = std::min(d.val_from_learn, learn.size());
        const std::size_t n_train = learn.size() - n_val;
        ds.train.vectors = FloatMatrix(0, learn.vectors.dim());
        ds.val.vectors = FloatMatrix(0, learn.vectors.dim());
        for (std::size_t i = 0; i < learn.size(); ++i)
            (i < n_train ? ds.train : ds.val).vectors.append_row(learn.vectors.row(i));
    }
    return ds;
}

Graph load_initial_graph(const ExperimentConfig& cfg) {
    require_file(cfg.graph_path(), "initial graph");
    return load_graph(cfg.graph_path());
}

} // namespace

fs::path cmd_prepare(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto& d = cfg.dataset;
    Dataset ds = d.source == "synthetic"
                     ? synth_clusters(d.n_clusters, d.per_cluster, d.dim, d.spread, mix_seed(cfg.seed, 1),
                                      {d.train_queries, d.val_queries, d.test_queries})
                     : dataset_from_files(d);
    compute_ground_truth(ds, cfg.threads);
    ds.validate();

    fs::create_directories(cfg.out());
    json splits = json::object();
    splits["base"] = {{"vectors", "base.fvecs"}, {"size", ds.base.rows()}};
    write_fvecs(cfg.out() / "base.fvecs", ds.base);
    const std::pair<const char*, const QuerySet*> named[] = {
        {"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}};
    for (const auto& [name, split] : named) {
        const std::string vec = std::string(name) + ".fvecs";
        const std::string gt = std::string(name) + "_gt.ivecs";
        write_fvecs(cfg.out() / vec, split->vectors);
        write_ivecs(cfg.out() / gt, gt_matrix(split->gt));
        splits[name] = {{"vectors", vec}, {"gt", gt}, {"size", split->size()}};
    }
    const json manifest{{"format", "simgraph-manifest"}, {"version", 1}, {"dim", ds.dim()},
                        {"seed", cfg.seed},             {"source", d.source}, {"splits", splits}};
    auto out = open_out(cfg.manifest_path());
    out << manifest.dump(2) << '\n';
    return cfg.manifest_path();
}

Dataset load_manifest(const fs::path& manifest) {
    require_file(manifest, "manifest");
    std::ifstream in(manifest);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("manifest " + manifest.string() + " is not valid JSON: " + e.what());
    }
    if (j.value("format", "") != "simgraph-manifest") throw DataError("not a dataset manifest: " + manifest.string());
    const fs::path dir = manifest.parent_path();
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : dir / p; };
    Dataset ds;
    const auto& splits = j.at("splits");
    ds.base = load_fvecs(resolve(splits.at("base").at("vectors").get<std::string>()));
    for (auto [name, split] : {std::pair{"train", &ds.train}, {"val", &ds.val}, {"test", &ds.test}}) {
        if (!splits.contains(name)) continue;
        const auto& s = splits.at(name);
        split->vectors = load_fvecs(resolve(s.at("vectors").get<std::string>()));
        if (s.contains("gt")) split->gt = gt_from_matrix(load_ivecs(resolve(s.at("gt").get<std::string>())), ds.size());
        if (split->vectors.empty()) split->vectors = FloatMatrix(0, ds.dim());
    }
    ds.validate();
    return ds;
}

fs::path cmd_build(const ExperimentConfig& cfg) {
    cfg.validate();
    const Dataset ds = load_manifest(cfg.manifest_path());
    Graph g;
    if (cfg.graph.kind == "complete") {
        g = build_complete(ds.size(), cfg.graph.start == "first" ? 0 : medoid(ds.base));
    } else if (cfg.graph.kind == "nsw") {
        g = build_nsw(ds.base, {cfg.graph.M, cfg.graph.ef_construction, mix_seed(cfg.seed, 2)});
        if (cfg.graph.start == "medoid") g.set_start_vertex(medoid(ds.base));
    } else {
        require_file(cfg.graph.input_path, "input graph");
        g = load_graph(cfg.graph.input_path);
        if (g.num_vertices() != ds.size()) throw DataError("input graph does not match the base set");
        if (cfg.graph.start == "medoid") g.set_start_vertex(medoid(ds.base));
    }
    g.validate();
    fs::create_directories(cfg.out());
    save_graph(cfg.graph_path(), g);
    auto hist = open_out(cfg.out() / "graph_degree.csv");
    write_histogram_csv(hist, degree_histogram(g));
    return cfg.graph_path();
}

TrainSummary cmd_train(const ExperimentConfig& cfg, std::ostream* progress) {
    cfg.validate();
    const Dataset ds = load_manifest(cfg.manifest_path());
    const Graph g0 = load_initial_graph(cfg);
    const TrainerConfig tcfg = cfg.trainer_config();
    const TrainResult r = train(g0, ds, tcfg, [&](const EpochLog& row) {
        if (!progress) return;
        *progress << "epoch " << row.epoch << " train_reward " << row.train_mean_reward << " val_reward "
                  << row.val_mean_reward << " recall " << row.val_recall << " dcs " << row.val_mean_dcs
                  << " frozen " << row.frozen_fraction << '\n';
    });

    save_graph(cfg.refined_path(), r.graph);
    auto hist = open_out(cfg.out() / "refined_degree.csv");
    write_histogram_csv(hist, degree_histogram(r.graph));
    Graph probabilistic = g0;
    probabilistic.set_edge_state(r.best_edges);
    save_graph(cfg.out() / "refined_probs.bin", probabilistic);
    save_policy(cfg.out() / "policy.bin", r.params);
    auto log = open_out(cfg.out() / "training_log.csv");
    write_training_log(log, r.log);

    return {r.initial_val_reward, r.best_val_reward, r.best_epoch, g0.num_edges(), r.graph.num_edges()};
}

fs::path cmd_prune(const ExperimentConfig& cfg, const fs::path& input) {
    cfg.validate();
    const Dataset ds = load_manifest(cfg.manifest_path());
    const fs::path src = input.empty() ? cfg.graph_path() : input;
    require_file(src, "graph to prune");
    const Graph g = load_graph(src);
    if (g.num_vertices() != ds.size()) throw DataError("graph does not match the base set");

    const PruneConfig pcfg = cfg.prune_config();
    const EdgeUsage usage = collect_usage(g, ds.base, ds.train.vectors, pcfg.search, pcfg.threads);
    const PruneResult r = tune_threshold_and_prune(g, ds.base, usage, ds.val, pcfg);
    save_graph(cfg.pruned_path(), r.graph);

    auto weights = open_out(cfg.out() / "weights.csv");
    write_weights_csv(weights, g, edge_weights(usage, g, pcfg.lambda));
    auto sweep = open_out(cfg.out() / "prune_sweep.csv");
    sweep << "threshold,edges,val_reward,recall,mean_dcs,selected\n";
    for (const auto& c : r.sweep)
        sweep << c.threshold << ',' << c.edges << ',' << c.val_mean_reward << ',' << c.val_recall << ','
              << c.val_mean_dcs << ',' << (c.threshold == r.threshold ? 1 : 0) << '\n';
    return cfg.pruned_path();
}

std::vector<LabeledGraph> default_sweep_graphs(const ExperimentConfig& cfg) {
    std::vector<LabeledGraph> out;
    for (const auto& [label, path] : {LabeledGraph{"initial", cfg.graph_path()},
                                      LabeledGraph{"refined", cfg.refined_path()},
                                      LabeledGraph{"pruned", cfg.pruned_path()}})
        if (fs::exists(path)) out.emplace_back(label, path);
    return out;
}

fs::path cmd_sweep(const ExperimentConfig& cfg, const std::vector<std::size_t>& ef_list,
                   const std::vector<LabeledGraph>& graphs) {
    cfg.validate();
    if (ef_list.empty()) throw ConfigError("sweep needs at least one ef value");
    if (graphs.empty()) throw DataError("sweep: no graphs to evaluate");
    const Dataset ds = load_manifest(cfg.manifest_path());
    const KeepAllAgent agent;
    const EvalOptions opts{cfg.seed, cfg.threads, false};

    struct Row {
        std::size_t ef;
        EvalResult r;
    };
    auto out = open_out(cfg.out() / "sweep.csv");
    out << "graph,ef,mean_dcs,recall,mean_hops\n";
    for (const auto& [label, path] : graphs) {
        require_file(path, "graph");
        const Graph g = load_graph(path);
        if (g.num_vertices() != ds.size()) throw DataError("graph " + label + " does not match the base set");
        std::vector<Row> rows;
        for (std::size_t ef : ef_list) {
            if (ef < cfg.search.k) throw ConfigError("sweep ef must be >= k");
            rows.push_back({ef, evaluate(g, ds.base, agent, ds.test.vectors, ds.test.gt, {cfg.search.k, ef}, opts)});
        }
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
            return a.r.mean_dcs < b.r.mean_dcs || (a.r.mean_dcs == b.r.mean_dcs && a.ef < b.ef);
        });
        for (const auto& row : rows)
            out << label << ',' << row.ef << ',' << row.r.mean_dcs << ',' << row.r.recall_at_1 << ','
                << row.r.mean_hops << '\n';
    }
    return cfg.out() / "sweep.csv";
}

fs::path cmd_hubs(const ExperimentConfig& cfg, std::size_t top_n, const fs::path& graph) {
    cfg.validate();
    if (top_n == 0) throw ConfigError("hubs: top_n must be positive");
    const Dataset ds = load_manifest(cfg.manifest_path());
    require_file(graph, "graph");
    const Graph g = load_graph(graph);
    if (g.num_vertices() != ds.size()) throw DataError("graph does not match the base set");
    const KeepAllAgent agent;
    const EvalResult r = evaluate(g, ds.base, agent, ds.train.vectors, ds.train.gt, cfg.search,
                                  {cfg.seed, cfg.threads, false});

    std::vector<VertexId> order;
    for (VertexId v = 0; v < g.num_vertices(); ++v)
        if (v != g.start_vertex()) order.push_back(v);
    std::stable_sort(order.begin(), order.end(), [&](VertexId a, VertexId b) {
        return r.stats.visit_counts[a] > r.stats.visit_counts[b];
    });
    order.insert(order.begin(), g.start_vertex());
    order.resize(std::min(order.size(), top_n));

    auto out = open_out(cfg.out() / "hubs.csv");
    out << "rank,vertex,visits,outdegree,nn_count,is_start\n";
    for (std::size_t i = 0; i < order.size(); ++i) {
        const VertexId v = order[i];
        out << i << ',' << v << ',' << r.stats.visit_counts[v] << ',' << g.outdegree(v) << ','
            << r.stats.nn_counts[v] << ',' << (v == g.start_vertex() ? 1 : 0) << '\n';
    }
    return cfg.out() / "hubs.csv";
}

void cmd_validate(const ExperimentConfig& cfg, const std::vector<fs::path>& graphs, std::ostream& out) {
    cfg.validate();
    out << "config ok (preset '" << cfg.preset << "')\n";
    for (const auto& path : graphs) {
        require_file(path, "graph");
        const Graph g = load_graph(path);  // validates
        out << path.string() << ": ok, " << g.num_vertices() << " vertices, " << g.num_edges()
            << " edges, start " << g.start_vertex() << ", mean outdegree " << g.mean_outdegree()
            << (g.has_edge_state() ? ", with edge state" : "") << '\n';
    }
}

} // namespace simgraph
