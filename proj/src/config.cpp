#include "simgraph/config.hpp"

#include <fstream>
#include <map>

namespace simgraph {

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& field) {
    if (!j.contains(key)) return;
    try {
        j.at(key).get_to(field);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field '") + key + "': " + e.what());
    }
}

ExperimentConfig nsw_preset(std::size_t M, std::size_t efc, std::size_t ef, std::size_t dcs_max,
                            double entropy) {
    ExperimentConfig c;
    c.dataset.source = "files";
    c.dataset.val_from_learn = 20000;
    c.graph.kind = "nsw";
    c.graph.M = M;
    c.graph.ef_construction = efc;
    c.search = {1, ef};
    c.reward.dcs_max = dcs_max;
    c.trainer.entropy_coef = entropy;
    return c;
}

ExperimentConfig nsg_preset(std::size_t ef, std::size_t dcs_max, double entropy) {
    ExperimentConfig c = nsw_preset(0, 0, ef, dcs_max, entropy);
    c.graph.kind = "file";
    c.graph.start = "medoid";
    c.graph.nsg_R = 24;
    c.graph.nsg_K = 200;
    return c;
}

const std::map<std::string, ExperimentConfig>& presets() {
    static const auto table = [] {
        std::map<std::string, ExperimentConfig> t;
        t["sift100k-nsw"] = nsw_preset(12, 300, 10, 1200, 0.01);
        t["sift100k-nsg"] = nsg_preset(10, 1500, 0.001);
        t["sift1m-nsw"] = nsw_preset(14, 500, 12, 1500, 0.01);
        t["deep100k-nsw"] = nsw_preset(12, 300, 10, 1000, 0.01);
        t["deep100k-nsg"] = nsg_preset(10, 1500, 0.001);
        t["deep1m-nsw"] = nsw_preset(14, 500, 12, 1500, 0.01);
        t["glove1m-nsw"] = nsw_preset(20, 2000, 5, 1000, 0.01);

        ExperimentConfig toy;
        toy.dataset = DatasetConfig{};
        toy.graph.kind = "complete";
        toy.graph.start = "medoid";
        toy.search = {1, 1};
        toy.reward.dcs_max = 150;
        toy.trainer.hidden = 64;
        toy.trainer.normalize_inputs = true;
        toy.trainer.learning_rate = 3e-3;
        toy.trainer.batch_size = 500;
        toy.trainer.epochs = 400;
        toy.trainer.entropy_coef = 0.1;
        toy.trainer.baseline_decay = 0.5;
        // freezing locks in early near-saturated keeps on this graph
        toy.trainer.freeze_enabled = false;
        toy.sweep_ef = {1};
        t["toy"] = toy;

        ExperimentConfig desk;
        desk.dataset.n_clusters = 40;
        desk.dataset.per_cluster = 50;
        desk.dataset.dim = 16;
        desk.dataset.spread = 0.2f;
        desk.dataset.train_queries = 5000;
        desk.dataset.val_queries = 1000;
        desk.dataset.test_queries = 1000;
        desk.graph.kind = "nsw";
        desk.graph.M = 8;
        desk.graph.ef_construction = 64;
        desk.search = {1, 10};
        desk.reward.dcs_max = 300;
        desk.trainer.hidden = 64;
        desk.trainer.normalize_inputs = true;
        desk.trainer.learning_rate = 3e-3;
        desk.trainer.batch_size = 250;
        desk.trainer.epochs = 40;
        desk.trainer.entropy_coef = 0.03;
        desk.trainer.baseline_decay = 0.5;
        desk.trainer.freeze_enabled = false;
        desk.sweep_ef = {1, 2, 4, 6, 8, 10, 12, 16, 24, 32};
        t["desk-nsw"] = desk;

        for (auto& [name, cfg] : t) cfg.preset = name;
        return t;
    }();
    return table;
}

} // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, cfg] : presets()) names.push_back(name);
    return names;
}

ExperimentConfig preset(const std::string& name) {
    const auto& t = presets();
    auto it = t.find(name);
    if (it == t.end()) throw ConfigError("unknown preset '" + name + "'");
    return it->second;
}

void ExperimentConfig::validate() const {
    if (dataset.source != "synthetic" && dataset.source != "files")
        throw ConfigError("dataset.source must be 'synthetic' or 'files'");
    if (dataset.source == "synthetic" &&
        (dataset.n_clusters == 0 || dataset.per_cluster == 0 || dataset.dim == 0))
        throw ConfigError("synthetic dataset counts must be positive");
    if (graph.kind != "complete" && graph.kind != "nsw" && graph.kind != "file")
        throw ConfigError("graph.kind must be 'complete', 'nsw' or 'file'");
    if (graph.start != "default" && graph.start != "medoid" && graph.start != "first")
        throw ConfigError("graph.start must be 'default', 'medoid' or 'first'");
    if (graph.kind == "nsw") {
        if (graph.M < 1) throw ConfigError("graph.M must be >= 1");
        if (graph.ef_construction < graph.M) throw ConfigError("graph.ef_construction must be >= graph.M");
    }
    if (search.k < 1) throw ConfigError("search.k must be >= 1");
    if (search.ef < search.k) throw ConfigError("search.ef_search must be >= search.k");
    if (reward.dcs_max < 1) throw ConfigError("reward.dcs_max must be >= 1");
    if (trainer.batch_size < 1) throw ConfigError("trainer.batch_size must be >= 1");
    if (trainer.hidden < 1) throw ConfigError("trainer.hidden must be >= 1");
    if (!(trainer.learning_rate > 0.0)) throw ConfigError("trainer.lr must be positive");
    if (trainer.optimizer != "adam" && trainer.optimizer != "sgd")
        throw ConfigError("trainer.optimizer must be 'adam' or 'sgd'");
    if (!(trainer.baseline_decay >= 0.0 && trainer.baseline_decay < 1.0))
        throw ConfigError("trainer.baseline_decay must lie in [0, 1)");
    if (!(trainer.freeze.lo < trainer.freeze.hi)) throw ConfigError("trainer.freeze_lo must be < freeze_hi");
    if (!(prune_lambda > 0.0)) throw ConfigError("prune.lambda must be positive");
    for (auto ef : sweep_ef)
        if (ef < search.k) throw ConfigError("sweep ef values must be >= search.k");
}

TrainerConfig ExperimentConfig::trainer_config() const {
    TrainerConfig t = trainer;
    t.search = search;
    t.reward = reward;
    t.seed = mix_seed(seed, 3);
    t.threads = threads;
    return t;
}

PruneConfig ExperimentConfig::prune_config() const {
    PruneConfig p;
    p.lambda = prune_lambda;
    p.quantiles = prune_quantiles;
    p.reward = reward;
    p.search = search;
    p.seed = seed;
    p.threads = threads;
    return p;
}

void to_json(json& j, const ExperimentConfig& c) {
    const auto& d = c.dataset;
    const auto& g = c.graph;
    const auto& t = c.trainer;
    j = json{
        {"preset", c.preset},
        {"seed", c.seed},
        {"threads", c.threads},
        {"out_dir", c.out_dir},
        {"dataset",
         {{"source", d.source}, {"n_clusters", d.n_clusters}, {"per_cluster", d.per_cluster},
          {"dim", d.dim}, {"spread", d.spread}, {"train_queries", d.train_queries},
          {"val_queries", d.val_queries}, {"test_queries", d.test_queries},
          {"base_path", d.base_path}, {"learn_path", d.learn_path}, {"val_path", d.val_path},
          {"test_path", d.test_path}, {"val_from_learn", d.val_from_learn},
          {"dedup_learn_against_test", d.dedup_learn_against_test}}},
        {"graph",
         {{"kind", g.kind}, {"start", g.start}, {"M", g.M}, {"ef_construction", g.ef_construction},
          {"input_path", g.input_path}, {"nsg_R", g.nsg_R}, {"nsg_K", g.nsg_K}}},
        {"search", {{"k", c.search.k}, {"ef_search", c.search.ef}}},
        {"reward", {{"dcs_max", c.reward.dcs_max}}},
        {"trainer",
         {{"epochs", t.epochs}, {"batch_size", t.batch_size}, {"lr", t.learning_rate},
          {"optimizer", t.optimizer}, {"entropy_coef", t.entropy_coef},
          {"baseline_decay", t.baseline_decay}, {"center_advantages", t.center_advantages},
          {"skip_inert_decisions", t.skip_inert_decisions},
          {"freeze_enabled", t.freeze_enabled}, {"freeze_lo", t.freeze.lo}, {"freeze_hi", t.freeze.hi},
          {"freeze_patience", t.freeze.patience}, {"hidden", t.hidden},
          {"init_final_bias", t.init_final_bias}, {"normalize_inputs", t.normalize_inputs}}},
        {"prune", {{"lambda", c.prune_lambda}, {"quantiles", c.prune_quantiles}}},
        {"sweep", {{"ef", c.sweep_ef}}},
        {"hubs", {{"top_n", c.hubs_top_n}}},
    };
}

void from_json(const json& j, ExperimentConfig& c) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("preset") && j.at("preset").is_string() && !j.at("preset").get<std::string>().empty())
        c = preset(j.at("preset").get<std::string>());
    read_field(j, "seed", c.seed);
    read_field(j, "threads", c.threads);
    read_field(j, "out_dir", c.out_dir);
    if (j.contains("dataset")) {
        const auto& s = j.at("dataset");
        auto& d = c.dataset;
        read_field(s, "source", d.source);
        read_field(s, "n_clusters", d.n_clusters);
        read_field(s, "per_cluster", d.per_cluster);
        read_field(s, "dim", d.dim);
        read_field(s, "spread", d.spread);
        read_field(s, "train_queries", d.train_queries);
        read_field(s, "val_queries", d.val_queries);
        read_field(s, "test_queries", d.test_queries);
        read_field(s, "base_path", d.base_path);
        read_field(s, "learn_path", d.learn_path);
        read_field(s, "val_path", d.val_path);
        read_field(s, "test_path", d.test_path);
        read_field(s, "val_from_learn", d.val_from_learn);
        read_field(s, "dedup_learn_against_test", d.dedup_learn_against_test);
    }
    if (j.contains("graph")) {
        const auto& s = j.at("graph");
        read_field(s, "kind", c.graph.kind);
        read_field(s, "start", c.graph.start);
        read_field(s, "M", c.graph.M);
        read_field(s, "ef_construction", c.graph.ef_construction);
        read_field(s, "input_path", c.graph.input_path);
        read_field(s, "nsg_R", c.graph.nsg_R);
        read_field(s, "nsg_K", c.graph.nsg_K);
    }
    if (j.contains("search")) {
        read_field(j.at("search"), "k", c.search.k);
        read_field(j.at("search"), "ef_search", c.search.ef);
    }
    if (j.contains("reward")) read_field(j.at("reward"), "dcs_max", c.reward.dcs_max);
    if (j.contains("trainer")) {
        const auto& s = j.at("trainer");
        auto& t = c.trainer;
        read_field(s, "epochs", t.epochs);
        read_field(s, "batch_size", t.batch_size);
        read_field(s, "lr", t.learning_rate);
        read_field(s, "optimizer", t.optimizer);
        read_field(s, "entropy_coef", t.entropy_coef);
        read_field(s, "baseline_decay", t.baseline_decay);
        read_field(s, "center_advantages", t.center_advantages);
        read_field(s, "skip_inert_decisions", t.skip_inert_decisions);
        read_field(s, "freeze_enabled", t.freeze_enabled);
        read_field(s, "freeze_lo", t.freeze.lo);
        read_field(s, "freeze_hi", t.freeze.hi);
        read_field(s, "freeze_patience", t.freeze.patience);
        read_field(s, "hidden", t.hidden);
        read_field(s, "init_final_bias", t.init_final_bias);
        read_field(s, "normalize_inputs", t.normalize_inputs);
    }
    if (j.contains("prune")) {
        read_field(j.at("prune"), "lambda", c.prune_lambda);
        read_field(j.at("prune"), "quantiles", c.prune_quantiles);
    }
    if (j.contains("sweep")) read_field(j.at("sweep"), "ef", c.sweep_ef);
    if (j.contains("hubs")) read_field(j.at("hubs"), "top_n", c.hubs_top_n);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    ExperimentConfig c;
    from_json(j, c);
    c.validate();
    return c;
}

void save_config(const std::filesystem::path& path, const ExperimentConfig& c) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << json(c).dump(2) << '\n';
}

} // namespace simgraph
