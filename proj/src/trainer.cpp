#include "simgraph/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>

#include "simgraph/parallel.hpp"

namespace simgraph {

namespace {

constexpr std::size_t kEdgeChunk = 4096;

} // namespace

double compute_reward(const SearchTrace& trace, VertexId gt_id, const RewardConfig& cfg) {
    if (trace.topk.empty() || trace.best() != gt_id) return 0.0;
    const auto budget = static_cast<double>(cfg.dcs_max);
    return std::max(budget - static_cast<double>(trace.dcs), 1.0);
}

double mean_reward(const EvalResult& result, const RewardConfig& cfg) {
    if (result.per_query.empty()) return 0.0;
    double total = 0.0;
    for (const auto& q : result.per_query)
        if (q.found) total += std::max(static_cast<double>(cfg.dcs_max) - static_cast<double>(q.dcs), 1.0);
    return total / static_cast<double>(result.per_query.size());
}

std::vector<Session> rollout_batch(const Graph& g, const FloatMatrix& base, const EdgeState& edges,
                                   const QuerySet& queries, std::span<const std::size_t> query_ids,
                                   const RewardConfig& reward, const SearchParams& search,
                                   std::uint64_t seed, std::size_t threads, bool skip_inert) {
    if (queries.gt.size() != queries.size()) throw DataError("rollout_batch: queries lack ground truth");
    const StochasticPolicyAgent agent(edges);
    std::vector<Session> sessions(query_ids.size());
    parallel_for(query_ids.size(), threads, [&](std::size_t i) {
        const std::size_t q = query_ids[i];
        Session& s = sessions[i];
        s.query = q;
        s.trace = beam_search(g, base, agent, queries.vectors.row(q), search, mix_seed(seed, q));
        s.reward = compute_reward(s.trace, queries.gt[q], reward);
        std::vector<std::uint8_t> seen;
        if (skip_inert) {
            seen.assign(g.num_vertices(), 0);
            seen[s.trace.visited.front()] = 1;
        }
        auto add = [&](EdgeId e, bool keep) {
            if (edges.frozen[e] || (skip_inert && seen[g.edge_target(e)])) return;
            s.decisions.push_back({e, edges.prob[e], keep, false, log_prob(edges.prob[e], keep)});
        };
        for (const auto& step : s.trace.steps) {
            for (EdgeId e : s.trace.kept(step)) add(e, true);
            for (EdgeId e : s.trace.dropped(step)) add(e, false);
            if (skip_inert)
                for (EdgeId e : s.trace.kept(step)) seen[g.edge_target(e)] = 1;
        }
    });
    return sessions;
}

void SgdOptimizer::step(PolicyParams& params, const PolicyGradient& gradient) {
    auto& v = params.values();
    const auto& g = gradient.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] += static_cast<float>(lr_ * g[i]);
}

void AdamOptimizer::step(PolicyParams& params, const PolicyGradient& gradient) {
    auto& v = params.values();
    const auto& g = gradient.values();
    if (m_.size() != v.size()) {
        m_.assign(v.size(), 0.0);
        v_.assign(v.size(), 0.0);
        t_ = 0;
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double gi = g[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * gi;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * gi * gi;
        v[i] += static_cast<float>(lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_));
    }
}

std::unique_ptr<PolicyOptimizer> make_optimizer(const std::string& name, double lr) {
    if (name == "adam") return std::make_unique<AdamOptimizer>(lr);
    if (name == "sgd") return std::make_unique<SgdOptimizer>(lr);
    throw DataError("unknown optimizer '" + name + "'");
}

void refresh_probabilities(EdgeState& edges, const PolicyParams& params,
                           const EdgeFeatureSource& source, std::size_t threads) {
    const std::size_t m = source.graph.num_edges();
    const std::size_t chunks = (m + kEdgeChunk - 1) / kEdgeChunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
        std::vector<EdgeId> ids;
        for (std::size_t e = c * kEdgeChunk; e < std::min(m, (c + 1) * kEdgeChunk); ++e)
            if (!edges.frozen[e]) ids.push_back(static_cast<EdgeId>(e));
        if (ids.empty()) return;
        const Vector<float> z = forward_logits(params, source.features(ids));
        for (std::size_t i = 0; i < ids.size(); ++i) edges.prob[ids[i]] = sigmoid(z(static_cast<Eigen::Index>(i)));
    });
}

EdgeState policy_edge_state(const PolicyParams& params, const EdgeFeatureSource& source,
                            std::size_t threads) {
    EdgeState st;
    st.prob.assign(source.graph.num_edges(), 0.0f);
    st.frozen.assign(source.graph.num_edges(), 0);
    refresh_probabilities(st, params, source, threads);
    return st;
}

PolicyGradient session_gradient(const PolicyParams& params, std::span<const Session> sessions,
                                const BaselineTable& baselines, const EdgeFeatureSource& source,
                                const UpdateConfig& cfg, UpdateStats* stats) {
    PolicyGradient total(params.feature_dim(), params.hidden());
    UpdateStats st;
    if (sessions.empty()) {
        if (stats) *stats = st;
        return total;
    }

    std::vector<double> adv(sessions.size());
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        if (!std::isfinite(sessions[i].reward)) throw DivergenceError("non-finite session reward");
        adv[i] = sessions[i].reward - baselines[sessions[i].query];
        st.mean_reward += sessions[i].reward;
    }
    st.mean_reward /= static_cast<double>(sessions.size());
    if (cfg.center_advantages && sessions.size() > 1) {
        const double mu = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(adv.size());
        for (double& a : adv) a -= mu;
    }
    for (double a : adv) st.mean_abs_advantage += std::abs(a);
    st.mean_abs_advantage /= static_cast<double>(adv.size());

    // Per distinct edge: sum of A*b, sum of A and the number of decisions. The per-decision
    // logit coefficient A(b - p) - c z p (1 - p) then sums to S_Ab - S_A p - n c z p (1 - p).
    std::vector<std::int32_t> slot(source.graph.num_edges(), -1);
    std::vector<EdgeId> distinct;
    std::vector<double> sum_ab, sum_a, count;
    for (std::size_t i = 0; i < sessions.size(); ++i) {
        for (const auto& d : sessions[i].decisions) {
            if (d.frozen) continue;
            auto& s = slot[d.edge];
            if (s < 0) {
                s = static_cast<std::int32_t>(distinct.size());
                distinct.push_back(d.edge);
                sum_ab.push_back(0.0);
                sum_a.push_back(0.0);
                count.push_back(0.0);
            }
            sum_ab[s] += d.keep ? adv[i] : 0.0;
            sum_a[s] += adv[i];
            count[s] += 1.0;
            ++st.decisions;
        }
    }
    st.distinct_edges = distinct.size();

    const double scale = 1.0 / static_cast<double>(sessions.size());
    const std::size_t chunks = (distinct.size() + kEdgeChunk - 1) / kEdgeChunk;
    std::vector<PolicyGradient> partial(chunks);
    parallel_for(chunks, cfg.threads, [&](std::size_t c) {
        const std::size_t lo = c * kEdgeChunk, hi = std::min(distinct.size(), lo + kEdgeChunk);
        const std::span<const EdgeId> ids(distinct.data() + lo, hi - lo);
        const RowMatrix<float> x = source.features(ids);
        const Vector<float> z = forward_logits(params, x);
        Vector<float> coef(z.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const double zi = z(static_cast<Eigen::Index>(i));
            const double p = sigmoid(zi);
            const std::size_t k = lo + i;
            const double c_logit = sum_ab[k] - sum_a[k] * p - count[k] * cfg.entropy_coef * zi * p * (1.0 - p);
            coef(static_cast<Eigen::Index>(i)) = static_cast<float>(scale * c_logit);
        }
        partial[c] = backward_logits(params, x, coef);
    });
    for (const auto& g : partial)
        for (std::size_t i = 0; i < g.values().size(); ++i) total.values()[i] += g.values()[i];
    if (stats) *stats = st;
    return total;
}

UpdateStats update(PolicyParams& params, PolicyOptimizer& optimizer, std::span<const Session> sessions,
                   BaselineTable& baselines, const EdgeFeatureSource& source, const UpdateConfig& cfg) {
    UpdateStats st;
    const PolicyGradient g = session_gradient(params, sessions, baselines, source, cfg, &st);
    if (!g.all_finite()) throw DivergenceError("non-finite policy gradient");
    optimizer.step(params, g);
    if (!params.all_finite()) throw DivergenceError("non-finite policy parameters");
    for (const auto& s : sessions) baselines.observe(s.query, s.reward);
    return st;
}

std::size_t freeze_overconfident(EdgeState& edges, std::span<const float> probs,
                                 const FreezeRule& rule, std::vector<std::int32_t>& streaks) {
    const std::size_t m = edges.prob.size();
    if (probs.size() != m) throw DataError("freeze_overconfident: probability count mismatch");
    streaks.resize(m, 0);
    std::size_t newly = 0;
    const auto patience = static_cast<std::int32_t>(rule.patience);
    for (std::size_t e = 0; e < m; ++e) {
        if (edges.frozen[e]) continue;
        auto& s = streaks[e];
        if (probs[e] > rule.hi) s = s > 0 ? s + 1 : 1;
        else if (probs[e] < rule.lo) s = s < 0 ? s - 1 : -1;
        else s = 0;
        if (s >= patience || -s >= patience) {
            edges.frozen[e] = 1;
            edges.prob[e] = s > 0 ? 1.0f : 0.0f;
            ++newly;
        }
    }
    return newly;
}

double frozen_fraction(const EdgeState& edges) {
    if (edges.frozen.empty()) return 0.0;
    const auto n = std::count(edges.frozen.begin(), edges.frozen.end(), std::uint8_t{1});
    return static_cast<double>(n) / static_cast<double>(edges.frozen.size());
}

TrainResult train(const Graph& g0, const Dataset& ds, const TrainerConfig& cfg,
                  const EpochCallback& on_epoch) {
    ds.validate();
    g0.validate();
    if (g0.num_vertices() != ds.size()) throw DataError("train: graph and base sizes differ");
    if (cfg.reward.dcs_max < 1) throw DataError("train: dcs_max must be >= 1");
    if (cfg.batch_size < 1) throw DataError("train: batch_size must be >= 1");
    if (ds.train.gt.size() != ds.train.size() || ds.val.gt.size() != ds.val.size())
        throw DataError("train: train/val splits need ground truth");
    if (ds.val.size() == 0) throw DataError("train: empty validation split");

    Graph topology = g0;
    topology.clear_edge_state();
    const FeatureScaler scaler =
        cfg.normalize_inputs ? FeatureScaler::fit(ds.base) : FeatureScaler::identity(ds.dim());
    const EdgeFeatureSource source(topology, ds.base, scaler);

    TrainResult result;
    result.params = init_policy(2 * ds.dim(), cfg.hidden, mix_seed(cfg.seed, 0x9011c7), cfg.init_final_bias);
    auto optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate);
    BaselineTable baselines(ds.train.size(), cfg.baseline_decay);
    const UpdateConfig ucfg{cfg.entropy_coef, cfg.center_advantages, cfg.threads};
    const KeepAllAgent keep_all;
    const EvalOptions eval_opts{cfg.seed, cfg.threads, false};

    EdgeState edges;
    edges.prob.assign(topology.num_edges(), 0.0f);
    edges.frozen.assign(topology.num_edges(), 0);
    if (g0.has_edge_state()) {
        for (std::size_t e = 0; e < edges.frozen.size(); ++e) {
            if (!g0.edge_state().frozen[e]) continue;
            edges.frozen[e] = 1;
            edges.prob[e] = g0.edge_state().prob[e];
        }
    }

    // Epoch-0 candidate: g0 as given.
    Graph initial = g0.has_edge_state() ? extract_deterministic(g0) : topology;
    result.best_edges = g0.has_edge_state() ? g0.edge_state()
                                            : EdgeState{std::vector<float>(topology.num_edges(), 1.0f),
                                                        std::vector<std::uint8_t>(topology.num_edges(), 0)};
    result.initial_val_reward =
        mean_reward(evaluate(initial, ds.base, keep_all, ds.val.vectors, ds.val.gt, cfg.search, eval_opts),
                    cfg.reward);
    result.best_val_reward = result.initial_val_reward;
    result.graph = initial;
    if (cfg.epochs == 0) return result;

    refresh_probabilities(edges, result.params, source, cfg.threads);
    std::vector<std::int32_t> streaks;
    std::vector<std::size_t> order(ds.train.size());

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(mix_seed(cfg.seed, epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double reward_sum = 0.0;
        for (std::size_t lo = 0, batch = 0; lo < order.size(); lo += cfg.batch_size, ++batch) {
            const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
            const std::span<const std::size_t> ids(order.data() + lo, hi - lo);
            const auto sessions = rollout_batch(topology, ds.base, edges, ds.train, ids, cfg.reward,
                                                cfg.search, mix_seed(cfg.seed, epoch * 1000003ULL + batch),
                                                cfg.threads, cfg.skip_inert_decisions);
            const auto st = update(result.params, *optimizer, sessions, baselines, source, ucfg);
            reward_sum += st.mean_reward * static_cast<double>(sessions.size());
            refresh_probabilities(edges, result.params, source, cfg.threads);
        }

        EpochLog row;
        row.epoch = epoch;
        row.train_mean_reward = order.empty() ? 0.0 : reward_sum / static_cast<double>(order.size());
        if (!std::isfinite(row.train_mean_reward)) throw DivergenceError("mean training reward is NaN");

        Graph candidate = topology;
        candidate.set_edge_state(edges);
        candidate = extract_deterministic(candidate);
        const EvalResult val =
            evaluate(candidate, ds.base, keep_all, ds.val.vectors, ds.val.gt, cfg.search, eval_opts);
        row.val_mean_reward = mean_reward(val, cfg.reward);
        row.val_recall = val.recall_at_1;
        row.val_mean_dcs = val.mean_dcs;
        row.val_mean_hops = val.mean_hops;
        row.mean_outdegree = candidate.mean_outdegree();
        if (row.val_mean_reward > result.best_val_reward) {
            result.best_val_reward = row.val_mean_reward;
            result.best_epoch = epoch;
            result.best_edges = edges;
            result.graph = std::move(candidate);
        }

        if (cfg.freeze_enabled) freeze_overconfident(edges, edges.prob, cfg.freeze, streaks);
        row.frozen_fraction = frozen_fraction(edges);
        result.log.push_back(row);
        if (on_epoch) on_epoch(row);
    }
    return result;
}

void write_training_log(std::ostream& out, std::span<const EpochLog> log) {
    out << "epoch,mean_reward,val_reward,recall,mean_dcs,mean_hops,frozen_fraction,mean_outdegree\n";
    out << std::setprecision(10);
    for (const auto& r : log) {
        out << r.epoch << ',' << r.train_mean_reward << ',' << r.val_mean_reward << ',' << r.val_recall
            << ',' << r.val_mean_dcs << ',' << r.val_mean_hops << ',' << r.frozen_fraction << ','
            << r.mean_outdegree << '\n';
    }
}

} // namespace simgraph
