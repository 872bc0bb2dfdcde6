#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "simgraph/pruning.hpp"
#include "simgraph/trainer.hpp"

namespace simgraph {

/// Invalid or inconsistent configuration; maps to the usage exit code.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct DatasetConfig {
    std::string source = "synthetic";  // synthetic | files
    // synthetic
    std::size_t n_clusters = 10;
    std::size_t per_cluster = 10;
    std::size_t dim = 64;
    float spread = 0.15f;
    std::size_t train_queries = 2000;
    std::size_t val_queries = 500;
    std::size_t test_queries = 1000;
    // files
    std::string base_path;
    std::string learn_path;  // training (and, if val_path is empty, validation) queries
    std::string val_path;
    std::string test_path;
    std::size_t val_from_learn = 0;  // trailing learn rows moved to validation
    bool dedup_learn_against_test = false;
};

struct GraphConfig {
    std::string kind = "nsw";      // complete | nsw | file
    std::string start = "default";  // default | medoid | first
    std::size_t M = 12;
    std::size_t ef_construction = 500;
    std::string input_path;  // kind == file: an externally built graph
    // Recorded for externally built NSG graphs; not used for construction.
    std::size_t nsg_R = 0;
    std::size_t nsg_K = 0;
};

struct ExperimentConfig {
    std::string preset;
    DatasetConfig dataset;
    GraphConfig graph;
    SearchParams search{1, 10};
    RewardConfig reward{1500};
    TrainerConfig trainer;  // trainer.search/reward/seed/threads are filled from the fields above
    double prune_lambda = 0.1;
    std::size_t prune_quantiles = 64;
    std::vector<std::size_t> sweep_ef{1, 2, 4, 8, 16, 32, 64};
    std::size_t hubs_top_n = 40;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string out_dir = "out";

    /// Throws ConfigError on cross-field violations (ef_construction < M, ef < k, dcs_max < 1, ...).
    void validate() const;

    /// Trainer settings with the shared search/reward/seed/threads applied.
    TrainerConfig trainer_config() const;
    PruneConfig prune_config() const;

    std::filesystem::path out() const { return out_dir; }
    std::filesystem::path manifest_path() const { return out() / "manifest.json"; }
    std::filesystem::path graph_path() const { return out() / "graph.bin"; }
    std::filesystem::path refined_path() const { return out() / "refined.bin"; }
    std::filesystem::path pruned_path() const { return out() / "pruned.bin"; }
};

/// Names accepted by preset(): toy, desk-nsw, sift100k-nsw, sift100k-nsg, sift1m-nsw,
/// deep100k-nsw, deep100k-nsg, deep1m-nsw, glove1m-nsw.
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Fields missing from `j` keep the values of its "preset" (or the defaults).
void from_json(const nlohmann::json& j, ExperimentConfig& c);

ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const ExperimentConfig& c);

} // namespace simgraph
