#include "simgraph/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace simgraph {

namespace {

constexpr char kPolicyMagic[4] = {'S', 'G', 'P', 'N'};
constexpr std::uint32_t kPolicyVersion = 1;

inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline bool draw_keep(float prob, bool frozen, Rng& rng) {
    if (frozen) return prob >= 0.5f;
    return uniform01(rng) < static_cast<double>(prob);
}

template <typename T>
RowMatrix<T> elu_matrix(const RowMatrix<T>& z) {
    return z.unaryExpr([](T v) { return elu(v); });
}

template <typename T>
RowMatrix<T> elu_grad(const RowMatrix<T>& z) {
    return z.unaryExpr([](T v) { return v >= T(0) ? T(1) : std::exp(v); });
}

template <typename T>
struct Activations {
    RowMatrix<T> z1, a1, z2, a2;
    Vector<T> logits;
};

template <typename T>
Activations<T> run_forward(const BasicPolicyParams<T>& p, const RowMatrix<T>& x) {
    if (static_cast<std::size_t>(x.cols()) != p.feature_dim())
        throw DataError("policy: feature width " + std::to_string(x.cols()) + " != " +
                        std::to_string(p.feature_dim()));
    Activations<T> act;
    act.z1 = x * p.w1().transpose();
    act.z1.rowwise() += p.b1().transpose();
    act.a1 = elu_matrix(act.z1);
    act.z2 = act.a1 * p.w2().transpose();
    act.z2.rowwise() += p.b2().transpose();
    act.a2 = elu_matrix(act.z2);
    act.logits = act.a2 * p.w3().transpose();
    act.logits.array() += p.b3();
    return act;
}

template <typename T>
bool finite_batch(const PolicyBatch<T>& batch) {
    if (!batch.features.allFinite()) return false;
    return std::all_of(batch.advantage.begin(), batch.advantage.end(),
                       [](T a) { return std::isfinite(a); });
}

} // namespace

template <typename T>
BasicPolicyParams<T>::BasicPolicyParams(std::size_t feature_dim, std::size_t hidden)
    : feature_dim_(feature_dim), hidden_(hidden) {
    if (feature_dim == 0 || hidden == 0) throw DataError("policy shapes must be positive");
    const auto l = layout();
    values_.assign(l.back().offset + l.back().size, T(0));
}

template <typename T>
auto BasicPolicyParams<T>::layout() const -> std::array<Range, kTensors> {
    const std::size_t h = hidden_, f = feature_dim_;
    const std::array<std::size_t, kTensors> sizes{h * f, h, h * h, h, h, 1};
    std::array<Range, kTensors> out{};
    std::size_t off = 0;
    for (std::size_t i = 0; i < kTensors; ++i) {
        out[i] = {off, sizes[i]};
        off += sizes[i];
    }
    return out;
}

template <typename T>
Eigen::Index BasicPolicyParams<T>::rows(std::size_t t) const {
    return t == 4 || t == 5 ? 1 : static_cast<Eigen::Index>(hidden_);
}

template <typename T>
Eigen::Index BasicPolicyParams<T>::cols(std::size_t t) const {
    switch (t) {
        case 0: return static_cast<Eigen::Index>(feature_dim_);
        case 2:
        case 4: return static_cast<Eigen::Index>(hidden_);
        default: return 1;
    }
}

template <typename T>
bool BasicPolicyParams<T>::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](T v) { return std::isfinite(v); });
}

template class BasicPolicyParams<float>;
template class BasicPolicyParams<double>;

PolicyParams init_policy(std::size_t feature_dim, std::size_t hidden, std::uint64_t seed,
                         float final_bias) {
    PolicyParams p(feature_dim, hidden);
    Rng rng(seed);
    auto fill = [&](auto&& m, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (Eigen::Index i = 0; i < m.size(); ++i)
            m.data()[i] = static_cast<float>((2.0 * uniform01(rng) - 1.0) * bound);
    };
    fill(p.w1(), feature_dim);
    fill(p.w2(), hidden);
    fill(p.w3(), hidden);
    p.b3() = final_bias;
    return p;
}

template <typename T>
std::vector<T> edge_features(std::span<const float> source, std::span<const float> target) {
    std::vector<T> x;
    x.reserve(source.size() + target.size());
    for (float v : source) x.push_back(static_cast<T>(v));
    for (float v : target) x.push_back(static_cast<T>(v));
    return x;
}

template <typename T>
T elu(T z) noexcept {
    return z >= T(0) ? z : std::expm1(z);
}

template <typename T>
T sigmoid(T z) noexcept {
    if (z >= T(0)) return T(1) / (T(1) + std::exp(-z));
    const T e = std::exp(z);
    return e / (T(1) + e);
}

template <typename T>
T forward(const BasicPolicyParams<T>& params, std::span<const T> features) {
    RowMatrix<T> x(1, static_cast<Eigen::Index>(features.size()));
    std::copy(features.begin(), features.end(), x.data());
    return sigmoid(run_forward(params, x).logits(0));
}

template <typename T>
Vector<T> forward_logits(const BasicPolicyParams<T>& params, const RowMatrix<T>& features) {
    return run_forward(params, features).logits;
}

template <typename T>
BasicPolicyParams<T> backward_logits(const BasicPolicyParams<T>& params,
                                     const RowMatrix<T>& features, const Vector<T>& coef) {
    const auto act = run_forward(params, features);
    BasicPolicyParams<T> g(params.feature_dim(), params.hidden());
    g.w3() = coef.transpose() * act.a2;
    g.b3() = coef.sum();
    RowMatrix<T> dz2 = (coef * params.w3()).cwiseProduct(elu_grad(act.z2));
    g.w2() = dz2.transpose() * act.a1;
    g.b2() = dz2.colwise().sum().transpose();
    RowMatrix<T> dz1 = (dz2 * params.w2()).cwiseProduct(elu_grad(act.z1));
    g.w1() = dz1.transpose() * features;
    g.b1() = dz1.colwise().sum().transpose();
    return g;
}

template <typename T>
T policy_objective(const BasicPolicyParams<T>& params, const PolicyBatch<T>& batch, T entropy_coef) {
    const Vector<T> z = forward_logits(params, batch.features);
    T total = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double p = static_cast<double>(sigmoid(z(i)));
        total += batch.advantage[i] * static_cast<T>(log_prob(p, batch.keep[i] != 0)) +
                 entropy_coef * static_cast<T>(entropy(p));
    }
    return total;
}

template <typename T>
BasicPolicyParams<T> grad(const BasicPolicyParams<T>& params, const PolicyBatch<T>& batch,
                          T entropy_coef) {
    const auto n = static_cast<std::size_t>(batch.features.rows());
    if (batch.keep.size() != n || batch.advantage.size() != n)
        throw DataError("policy batch arrays disagree in length");
    if (!std::isfinite(entropy_coef) || !finite_batch(batch) || !params.all_finite())
        throw DataError("policy gradient: non-finite input");
    const Vector<T> z = forward_logits(params, batch.features);
    Vector<T> coef(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const T p = sigmoid(z(i));
        const T b = batch.keep[i] ? T(1) : T(0);
        // d log pi / dz = b - p;  dH / dz = -z p (1 - p)
        coef(i) = batch.advantage[i] * (b - p) - entropy_coef * z(i) * p * (T(1) - p);
    }
    return backward_logits(params, batch.features, coef);
}

#define SIMGRAPH_INSTANTIATE(T)                                                                  \
    template std::vector<T> edge_features<T>(std::span<const float>, std::span<const float>);   \
    template T elu<T>(T) noexcept;                                                               \
    template T sigmoid<T>(T) noexcept;                                                           \
    template T forward<T>(const BasicPolicyParams<T>&, std::span<const T>);                      \
    template Vector<T> forward_logits<T>(const BasicPolicyParams<T>&, const RowMatrix<T>&);      \
    template BasicPolicyParams<T> backward_logits<T>(const BasicPolicyParams<T>&,                \
                                                     const RowMatrix<T>&, const Vector<T>&);     \
    template T policy_objective<T>(const BasicPolicyParams<T>&, const PolicyBatch<T>&, T);       \
    template BasicPolicyParams<T> grad<T>(const BasicPolicyParams<T>&, const PolicyBatch<T>&, T);

SIMGRAPH_INSTANTIATE(float)
SIMGRAPH_INSTANTIATE(double)
#undef SIMGRAPH_INSTANTIATE

double entropy(double p) noexcept {
    double h = 0.0;
    if (p > 0.0) h -= p * std::log(p);
    if (p < 1.0) h -= (1.0 - p) * std::log1p(-p);
    return h;
}

double log_prob(double p, bool keep) noexcept {
    p = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
    return keep ? std::log(p) : std::log1p(-p);
}

std::vector<EdgeDecision> sample_mask(const EdgeState& edges, const SearchState& state, Rng& rng) {
    std::vector<EdgeDecision> out(state.neighbors.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const EdgeId e = state.first_edge + static_cast<EdgeId>(i);
        auto& d = out[i];
        d.edge = e;
        d.prob = edges.prob[e];
        d.frozen = edges.frozen[e] != 0;
        d.keep = draw_keep(d.prob, d.frozen, rng);
        d.log_prob = d.frozen ? 0.0 : log_prob(d.prob, d.keep);
    }
    return out;
}

void StochasticPolicyAgent::decide(const SearchState& state, std::span<std::uint8_t> keep,
                                   Rng& rng) const {
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const EdgeId e = state.first_edge + static_cast<EdgeId>(i);
        keep[i] = draw_keep(edges_.prob[e], edges_.frozen[e] != 0, rng) ? 1 : 0;
    }
}

FeatureScaler FeatureScaler::identity(std::size_t dim) {
    return {std::vector<float>(dim, 0.0f), std::vector<float>(dim, 1.0f)};
}

FeatureScaler FeatureScaler::fit(const FloatMatrix& base) {
    const std::size_t d = base.dim();
    std::vector<double> mean(d, 0.0), sq(d, 0.0);
    for (std::size_t i = 0; i < base.rows(); ++i) {
        auto r = base.row(i);
        for (std::size_t j = 0; j < d; ++j) mean[j] += r[j];
    }
    const auto n = static_cast<double>(std::max<std::size_t>(1, base.rows()));
    for (auto& m : mean) m /= n;
    for (std::size_t i = 0; i < base.rows(); ++i) {
        auto r = base.row(i);
        for (std::size_t j = 0; j < d; ++j) sq[j] += (r[j] - mean[j]) * (r[j] - mean[j]);
    }
    FeatureScaler s;
    for (std::size_t j = 0; j < d; ++j) {
        const double sd = std::sqrt(sq[j] / n);
        s.mean.push_back(static_cast<float>(mean[j]));
        s.inv_std.push_back(sd > 1e-12 ? static_cast<float>(1.0 / sd) : 1.0f);
    }
    return s;
}

void FeatureScaler::apply(std::span<const float> in, std::span<float> out) const {
    for (std::size_t j = 0; j < in.size(); ++j) out[j] = (in[j] - mean[j]) * inv_std[j];
}

RowMatrix<float> build_edge_features(const Graph& g, std::span<const VertexId> edge_sources,
                                     const FloatMatrix& base, const FeatureScaler& scaler,
                                     std::span<const EdgeId> edges) {
    const std::size_t d = base.dim();
    RowMatrix<float> x(static_cast<Eigen::Index>(edges.size()), static_cast<Eigen::Index>(2 * d));
    for (std::size_t i = 0; i < edges.size(); ++i) {
        float* row = x.data() + i * 2 * d;
        scaler.apply(base.row(edge_sources[edges[i]]), {row, d});
        scaler.apply(base.row(g.edge_target(edges[i])), {row + d, d});
    }
    return x;
}

void save_policy(const std::filesystem::path& path, const PolicyParams& params) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    const std::uint32_t header[3] = {kPolicyVersion, static_cast<std::uint32_t>(params.feature_dim()),
                                     static_cast<std::uint32_t>(params.hidden())};
    out.write(kPolicyMagic, 4);
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(params.values().data()),
              static_cast<std::streamsize>(params.values().size() * sizeof(float)));
    if (!out) throw DataError("failed writing " + path.string());
}

PolicyParams load_policy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < 16 || std::memcmp(bytes.data(), kPolicyMagic, 4) != 0)
        throw FormatError("not a policy checkpoint (bad magic)", 0);
    std::uint32_t header[3];
    std::memcpy(header, bytes.data() + 4, sizeof(header));
    if (header[0] != kPolicyVersion)
        throw FormatError("unsupported policy checkpoint version " + std::to_string(header[0]), 4);
    PolicyParams p(header[1], header[2]);
    const std::size_t payload = p.values().size() * sizeof(float);
    if (bytes.size() != 16 + payload) throw FormatError("policy checkpoint size mismatch", 16);
    std::memcpy(p.values().data(), bytes.data() + 16, payload);
    return p;
}

} // namespace simgraph
