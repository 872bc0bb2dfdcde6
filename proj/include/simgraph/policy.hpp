#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "simgraph/common.hpp"
#include "simgraph/graph.hpp"
#include "simgraph/search.hpp"

namespace simgraph {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Weights of the edge-scoring network
///   p = sigmoid(w3 . elu(W2 elu(W1 x + b1) + b2) + b3),   x = [source; target].
/// All tensors live in one flat buffer (W1 | b1 | W2 | b2 | w3 | b3, row-major) so that
/// optimizers and gradient checks can treat the parameters as a single vector.
template <typename T>
class BasicPolicyParams {
public:
    static constexpr std::size_t kTensors = 6;
    struct Range {
        std::size_t offset;
        std::size_t size;
    };

    BasicPolicyParams() = default;
    BasicPolicyParams(std::size_t feature_dim, std::size_t hidden);

    std::size_t feature_dim() const noexcept { return feature_dim_; }
    std::size_t hidden() const noexcept { return hidden_; }
    std::array<Range, kTensors> layout() const;

    std::vector<T>& values() noexcept { return values_; }
    const std::vector<T>& values() const noexcept { return values_; }

    Eigen::Map<RowMatrix<T>> w1() { return {ptr(0), rows(0), cols(0)}; }
    Eigen::Map<Vector<T>> b1() { return {ptr(1), rows(1)}; }
    Eigen::Map<RowMatrix<T>> w2() { return {ptr(2), rows(2), cols(2)}; }
    Eigen::Map<Vector<T>> b2() { return {ptr(3), rows(3)}; }
    Eigen::Map<RowMatrix<T>> w3() { return {ptr(4), 1, cols(4)}; }
    T& b3() { return values_[layout()[5].offset]; }

    Eigen::Map<const RowMatrix<T>> w1() const { return {ptr(0), rows(0), cols(0)}; }
    Eigen::Map<const Vector<T>> b1() const { return {ptr(1), rows(1)}; }
    Eigen::Map<const RowMatrix<T>> w2() const { return {ptr(2), rows(2), cols(2)}; }
    Eigen::Map<const Vector<T>> b2() const { return {ptr(3), rows(3)}; }
    Eigen::Map<const RowMatrix<T>> w3() const { return {ptr(4), 1, cols(4)}; }
    T b3() const { return values_[layout()[5].offset]; }

    bool all_finite() const;

    template <typename U>
    BasicPolicyParams<U> cast() const {
        BasicPolicyParams<U> out(feature_dim_, hidden_);
        for (std::size_t i = 0; i < values_.size(); ++i) out.values()[i] = static_cast<U>(values_[i]);
        return out;
    }

    bool operator==(const BasicPolicyParams&) const = default;

private:
    Eigen::Index rows(std::size_t t) const;
    Eigen::Index cols(std::size_t t) const;
    T* ptr(std::size_t t) { return values_.data() + layout()[t].offset; }
    const T* ptr(std::size_t t) const { return values_.data() + layout()[t].offset; }

    std::size_t feature_dim_ = 0;
    std::size_t hidden_ = 0;
    std::vector<T> values_;
};

using PolicyParams = BasicPolicyParams<float>;
using PolicyGradient = BasicPolicyParams<float>;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero hidden biases, output bias `final_bias`.
PolicyParams init_policy(std::size_t feature_dim, std::size_t hidden, std::uint64_t seed,
                         float final_bias = 2.0f);

/// [source; target]
template <typename T>
std::vector<T> edge_features(std::span<const float> source, std::span<const float> target);

template <typename T>
T elu(T z) noexcept;
template <typename T>
T sigmoid(T z) noexcept;

/// Keep-probability of a single edge.
template <typename T>
T forward(const BasicPolicyParams<T>& params, std::span<const T> features);

/// Output logits for every row of `features`.
template <typename T>
Vector<T> forward_logits(const BasicPolicyParams<T>& params, const RowMatrix<T>& features);

/// Gradient of sum_i coef_i * logit_i with respect to every parameter.
template <typename T>
BasicPolicyParams<T> backward_logits(const BasicPolicyParams<T>& params,
                                     const RowMatrix<T>& features, const Vector<T>& coef);

/// Edge decisions with the advantage of the session they came from.
template <typename T>
struct PolicyBatch {
    RowMatrix<T> features;
    std::vector<std::uint8_t> keep;
    std::vector<T> advantage;
};

/// sum_i [A_i log pi(b_i | x_i) + entropy_coef * H(pi(. | x_i))]
template <typename T>
T policy_objective(const BasicPolicyParams<T>& params, const PolicyBatch<T>& batch, T entropy_coef);

/// Exact gradient of policy_objective. Throws DataError on non-finite inputs.
template <typename T>
BasicPolicyParams<T> grad(const BasicPolicyParams<T>& params, const PolicyBatch<T>& batch,
                          T entropy_coef);

/// Bernoulli entropy in nats, with 0 ln 0 = 0.
double entropy(double p) noexcept;
/// b ln p + (1 - b) ln(1 - p), p clamped to [1e-6, 1 - 1e-6].
double log_prob(double p, bool keep) noexcept;
inline constexpr double kProbClamp = 1e-6;

struct EdgeDecision {
    EdgeId edge = 0;
    float prob = 0.0f;
    bool keep = false;
    bool frozen = false;
    double log_prob = 0.0;  // 0 for frozen edges
};

/// One Bernoulli draw per out-edge of the expanded vertex (in edge order). Frozen edges keep
/// their deterministic value without consuming randomness.
std::vector<EdgeDecision> sample_mask(const EdgeState& edges, const SearchState& state, Rng& rng);

/// Edge agent that samples the current edge probabilities.
class StochasticPolicyAgent final : public EdgeAgent {
public:
    explicit StochasticPolicyAgent(const EdgeState& edges) : edges_(edges) {}
    void decide(const SearchState& state, std::span<std::uint8_t> keep, Rng& rng) const override;

private:
    const EdgeState& edges_;
};

/// Per-dimension standardization of base vectors before they enter the network.
struct FeatureScaler {
    std::vector<float> mean;
    std::vector<float> inv_std;

    static FeatureScaler identity(std::size_t dim);
    static FeatureScaler fit(const FloatMatrix& base);
    void apply(std::span<const float> in, std::span<float> out) const;
};

/// Feature rows [scaled(source); scaled(target)] for the given edges.
RowMatrix<float> build_edge_features(const Graph& g, std::span<const VertexId> edge_sources,
                                     const FloatMatrix& base, const FeatureScaler& scaler,
                                     std::span<const EdgeId> edges);

void save_policy(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_policy(const std::filesystem::path& path);

} // namespace simgraph
