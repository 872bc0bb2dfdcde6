#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "simgraph/dataset.hpp"
#include "simgraph/graph.hpp"
#include "simgraph/policy.hpp"
#include "simgraph/search.hpp"

namespace simgraph {

struct RewardConfig {
    std::size_t dcs_max = 1500;
};

/// 0 if the top result is not gt_id, otherwise max(dcs_max - DCS, 1).
double compute_reward(const SearchTrace& trace, VertexId gt_id, const RewardConfig& cfg);

/// Mean reward over the per-query outcomes of an evaluation.
double mean_reward(const EvalResult& result, const RewardConfig& cfg);

struct Session {
    std::size_t query = 0;  // index into the query set
    SearchTrace trace;
    double reward = 0.0;
    std::vector<EdgeDecision> decisions;  // stochastic decisions only
};

/// One session per entry of `query_ids`, sampled from `edges`. Session i is seeded with
/// mix_seed(seed, query_ids[i]), so results do not depend on the thread count.
/// With `skip_inert`, decisions on edges whose target was already visited are left out of
/// Session::decisions: the search ignores such edges either way, so they carry no signal.
std::vector<Session> rollout_batch(const Graph& g, const FloatMatrix& base, const EdgeState& edges,
                                   const QuerySet& queries, std::span<const std::size_t> query_ids,
                                   const RewardConfig& reward, const SearchParams& search,
                                   std::uint64_t seed, std::size_t threads = 1, bool skip_inert = false);

/// Moving-average reward per training query.
class BaselineTable {
public:
    BaselineTable(std::size_t queries, double decay) : values_(queries, 0.0), decay_(decay) {}

    double operator[](std::size_t q) const { return values_[q]; }
    void observe(std::size_t q, double reward) { values_[q] = decay_ * values_[q] + (1.0 - decay_) * reward; }
    double decay() const noexcept { return decay_; }
    const std::vector<double>& values() const noexcept { return values_; }

private:
    std::vector<double> values_;
    double decay_;
};

/// Applies an ascent step along a gradient.
class PolicyOptimizer {
public:
    virtual ~PolicyOptimizer() = default;
    virtual void step(PolicyParams& params, const PolicyGradient& gradient) = 0;
};

class SgdOptimizer final : public PolicyOptimizer {
public:
    explicit SgdOptimizer(double lr) : lr_(lr) {}
    void step(PolicyParams& params, const PolicyGradient& gradient) override;

private:
    double lr_;
};

class AdamOptimizer final : public PolicyOptimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    void step(PolicyParams& params, const PolicyGradient& gradient) override;

private:
    double lr_, beta1_, beta2_, eps_;
    std::vector<double> m_, v_;
    std::size_t t_ = 0;
};

std::unique_ptr<PolicyOptimizer> make_optimizer(const std::string& name, double lr);

/// Everything needed to turn edge ids into network inputs.
struct EdgeFeatureSource {
    const Graph& graph;
    const FloatMatrix& base;
    const FeatureScaler& scaler;
    std::vector<VertexId> sources;

    EdgeFeatureSource(const Graph& g, const FloatMatrix& b, const FeatureScaler& s)
        : graph(g), base(b), scaler(s), sources(g.edge_sources()) {}

    RowMatrix<float> features(std::span<const EdgeId> edges) const {
        return build_edge_features(graph, sources, base, scaler, edges);
    }
};

/// Writes the network's keep-probability into every non-frozen entry of `edges`.
void refresh_probabilities(EdgeState& edges, const PolicyParams& params,
                           const EdgeFeatureSource& source, std::size_t threads = 1);

/// Fresh edge state (nothing frozen) with the policy's probabilities.
EdgeState policy_edge_state(const PolicyParams& params, const EdgeFeatureSource& source,
                            std::size_t threads = 1);

struct UpdateConfig {
    double entropy_coef = 0.01;
    bool center_advantages = true;  // subtract the batch mean advantage
    std::size_t threads = 1;
};

struct UpdateStats {
    double mean_reward = 0.0;
    double mean_abs_advantage = 0.0;
    std::size_t decisions = 0;
    std::size_t distinct_edges = 0;
};

/// Gradient of (1/|sessions|) sum_sessions sum_decisions [A log pi(b|x) + c H(pi(.|x))]
/// with A = reward - baseline[query]. Baselines are not modified.
PolicyGradient session_gradient(const PolicyParams& params, std::span<const Session> sessions,
                                const BaselineTable& baselines, const EdgeFeatureSource& source,
                                const UpdateConfig& cfg, UpdateStats* stats = nullptr);

/// One ascent step on the session gradient, then baseline <- decay*baseline + (1-decay)*reward.
UpdateStats update(PolicyParams& params, PolicyOptimizer& optimizer, std::span<const Session> sessions,
                   BaselineTable& baselines, const EdgeFeatureSource& source, const UpdateConfig& cfg);

struct FreezeRule {
    float lo = 0.01f;
    float hi = 0.99f;
    std::size_t patience = 5;
};

/// `streaks` holds, per edge, the signed number of consecutive calls with prob > hi (positive)
/// or prob < lo (negative). Edges reaching `patience` are frozen at keep (prob 1) or drop
/// (prob 0). Returns the number of newly frozen edges.
std::size_t freeze_overconfident(EdgeState& edges, std::span<const float> probs,
                                 const FreezeRule& rule, std::vector<std::int32_t>& streaks);

double frozen_fraction(const EdgeState& edges);

struct TrainerConfig {
    RewardConfig reward;
    SearchParams search{1, 1};
    std::size_t epochs = 10;
    std::size_t batch_size = 256;
    double learning_rate = 1e-3;
    std::string optimizer = "adam";
    double entropy_coef = 0.01;
    double baseline_decay = 0.9;
    bool center_advantages = true;
    bool skip_inert_decisions = true;
    bool freeze_enabled = true;
    FreezeRule freeze;
    std::size_t hidden = 256;
    float init_final_bias = 2.0f;
    bool normalize_inputs = false;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
};

struct EpochLog {
    std::size_t epoch = 0;
    double train_mean_reward = 0.0;
    double val_mean_reward = 0.0;
    double val_recall = 0.0;
    double val_mean_dcs = 0.0;
    double val_mean_hops = 0.0;
    double frozen_fraction = 0.0;
    double mean_outdegree = 0.0;  // of the deterministic extraction
};

struct TrainResult {
    Graph graph;  // deterministic extraction of the best validation checkpoint
    PolicyParams params;  // final parameters
    EdgeState best_edges;
    std::vector<EpochLog> log;
    double initial_val_reward = 0.0;
    double best_val_reward = 0.0;
    std::size_t best_epoch = 0;  // 0 = the initial graph
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Policy-gradient refinement of g0 over ds.train, selecting the checkpoint with the highest
/// validation mean reward (the unmodified g0 is the epoch-0 candidate). The returned graph is
/// always a subgraph of g0. Throws DivergenceError on non-finite rewards or parameters.
TrainResult train(const Graph& g0, const Dataset& ds, const TrainerConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// epoch,mean_reward,val_reward,recall,mean_dcs,mean_hops,frozen_fraction,mean_outdegree
void write_training_log(std::ostream& out, std::span<const EpochLog> log);

} // namespace simgraph
