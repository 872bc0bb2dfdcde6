#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "simgraph/policy.hpp"

using namespace simgraph;

namespace {

BasicPolicyParams<double> random_params(std::size_t F, std::size_t h, std::mt19937_64& rng, double scale = 0.5) {
    BasicPolicyParams<double> p(F, h);
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& v : p.values()) v = u(rng);
    return p;
}

PolicyBatch<double> random_batch(std::size_t n, std::size_t F, std::mt19937_64& rng) {
    PolicyBatch<double> b;
    b.features = RowMatrix<double>(n, F);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Eigen::Index i = 0; i < b.features.size(); ++i) b.features.data()[i] = u(rng);
    for (std::size_t i = 0; i < n; ++i) {
        b.keep.push_back(rng() & 1);
        b.advantage.push_back(u(rng) * 3.0);
    }
    return b;
}

// Relative error of the analytic gradient against central differences, per tensor.
double worst_tensor_error(const BasicPolicyParams<double>& p, const PolicyBatch<double>& batch, double ent) {
    const BasicPolicyParams<double> g = grad(p, batch, ent);
    const double h = 1e-4;
    double worst = 0.0;
    for (const auto& r : p.layout()) {
        double diff = 0.0, norm = 0.0;
        for (std::size_t i = r.offset; i < r.offset + r.size; ++i) {
            BasicPolicyParams<double> plus = p, minus = p;
            plus.values()[i] += h;
            minus.values()[i] -= h;
            const double fd = (policy_objective(plus, batch, ent) - policy_objective(minus, batch, ent)) / (2 * h);
            diff += (fd - g.values()[i]) * (fd - g.values()[i]);
            norm += fd * fd;
        }
        worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-8));
    }
    return worst;
}

} // namespace

TEST_CASE("edge_features") {
    const float a[] = {1, 2}, b[] = {3, 4};
    CHECK(edge_features<float>(a, b) == std::vector<float>{1, 2, 3, 4});
    const float z[] = {0, 0};
    CHECK(edge_features<float>(z, z) == std::vector<float>(4, 0.0f));
    CHECK(edge_features<float>(a, b) != edge_features<float>(b, a));
}

TEST_CASE("forward: examples") {
    const BasicPolicyParams<float> zero(4, 3);
    const std::vector<float> x{1, 2, 3, 4};
    CHECK(forward<float>(zero, x) == 0.5f);

    BasicPolicyParams<double> sat(4, 3);
    sat.b3() = 20.0;
    const std::vector<double> xd{1, 2, 3, 4};
    const double p = forward<double>(sat, xd);
    CHECK(p > 1.0 - 1e-8);
    CHECK(p < 1.0);
}

TEST_CASE("forward matches the double-precision oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t F = 2 + rng() % 12, h = 1 + rng() % 16;
        const PolicyParams p = init_policy(F, h, rng(), 0.3f);
        std::vector<float> x(F);
        std::uniform_real_distribution<float> u(-2, 2);
        for (auto& v : x) v = u(rng);
        std::vector<double> theta(p.values().begin(), p.values().end());
        const double want = oracle::forward(theta, F, h, std::vector<double>(x.begin(), x.end()));
        const float got = forward<float>(p, x);
        CHECK(std::abs(got - want) <= 1e-6 * want);
        CHECK(got > 0.0f);
        CHECK(got < 1.0f);

        // batched logits agree with the single-edge path
        RowMatrix<float> X(1, F);
        for (std::size_t j = 0; j < F; ++j) X(0, j) = x[j];
        CHECK(sigmoid(forward_logits(p, X)(0)) == doctest::Approx(got).epsilon(1e-6));
    }
}

TEST_CASE("init_policy: shapes, bias and determinism") {
    const PolicyParams p = init_policy(8, 5, 11);
    CHECK(p.values().size() == 5 * 8 + 5 + 25 + 5 + 5 + 1);
    CHECK(p.b3() == 2.0f);
    CHECK(p == init_policy(8, 5, 11));
    CHECK_FALSE(p == init_policy(8, 5, 12));
    const float bound = 1.0f / std::sqrt(8.0f);
    CHECK(p.w1().cwiseAbs().maxCoeff() <= bound);
    CHECK(std::abs(sigmoid(2.0) - 0.8808) < 1e-4);
}

TEST_CASE("entropy and log_prob") {
    CHECK(entropy(0.5) == doctest::Approx(std::log(2.0)));
    CHECK(entropy(0.0) == 0.0);
    CHECK(entropy(1.0) == 0.0);
    CHECK(entropy(0.1) == doctest::Approx(0.3251).epsilon(1e-4));
    CHECK(log_prob(0.25, true) == doctest::Approx(std::log(0.25)));
    CHECK(log_prob(0.25, false) == doctest::Approx(std::log(0.75)));
    CHECK(std::isfinite(log_prob(0.0, true)));
    CHECK(log_prob(0.0, true) == doctest::Approx(std::log(1e-6)));
}

TEST_CASE("sample_mask") {
    const std::vector<VertexId> nbrs{1, 2, 3, 4};
    const SearchState state{{}, 0, nbrs, 0, {}, {}};

    SUBCASE("frozen keep on every edge") {
        const EdgeState s{std::vector<float>(4, 1.0f), std::vector<std::uint8_t>(4, 1)};
        Rng rng(1);
        const auto before = rng;
        const auto d = sample_mask(s, state, rng);
        double total = 0.0;
        for (const auto& x : d) {
            CHECK(x.keep);
            total += x.log_prob;
        }
        CHECK(total == 0.0);
        CHECK(rng == before);
    }
    SUBCASE("seeded draws are reproducible and log_probs consistent") {
        const EdgeState s{std::vector<float>(4, 0.5f), std::vector<std::uint8_t>(4, 0)};
        Rng a(77), b(77);
        const auto da = sample_mask(s, state, a);
        const auto db = sample_mask(s, state, b);
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(da[i].keep == db[i].keep);
            CHECK(da[i].edge == i);
            CHECK(da[i].log_prob == doctest::Approx(std::log(0.5)));
        }
    }
    SUBCASE("keep rate") {
        const std::vector<VertexId> one{1};
        const SearchState s1{{}, 0, one, 0, {}, {}};
        const EdgeState s{{0.3f}, {0}};
        Rng rng(5);
        std::size_t kept = 0;
        const std::size_t n = 100000;
        for (std::size_t i = 0; i < n; ++i) kept += sample_mask(s, s1, rng)[0].keep;
        CHECK(std::abs(static_cast<double>(kept) / n - 0.3) <= 0.01);
    }
    SUBCASE("agent and sampler draw the same mask") {
        const EdgeState s{{0.2f, 0.9f, 0.5f, 0.7f}, {0, 1, 0, 0}};
        Rng a(9), b(9);
        const auto d = sample_mask(s, state, a);
        std::vector<std::uint8_t> keep(4, 0);
        StochasticPolicyAgent(s).decide(state, keep, b);
        for (std::size_t i = 0; i < 4; ++i) CHECK((keep[i] != 0) == d[i].keep);
        CHECK(d[1].keep);
        CHECK(d[1].log_prob == 0.0);
    }
}

TEST_CASE("grad: zero when advantages and entropy vanish") {
    std::mt19937_64 rng(1);
    const auto p = random_params(6, 4, rng);
    auto batch = random_batch(10, 6, rng);
    std::fill(batch.advantage.begin(), batch.advantage.end(), 0.0);
    const auto g = grad(p, batch, 0.0);
    for (double v : g.values()) CHECK(v == 0.0);
}

TEST_CASE("grad matches central finite differences") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t d = 1 + rng() % 4, h = 1 + rng() % 8;
        const auto p = random_params(2 * d, h, rng);
        const auto batch = random_batch(1 + rng() % 5, 2 * d, rng);
        CHECK(worst_tensor_error(p, batch, trial % 2 ? 0.01 : 0.3) < 1e-4);
    }
}

TEST_CASE("grad: ascent step raises p for a kept edge with positive advantage") {
    std::mt19937_64 rng(4);
    auto p = random_params(4, 3, rng);
    PolicyBatch<double> batch = random_batch(1, 4, rng);
    batch.keep = {1};
    batch.advantage = {1.0};
    const std::vector<double> x(batch.features.data(), batch.features.data() + 4);
    const double before = forward<double>(p, x);
    const auto g = grad(p, batch, 0.0);
    for (std::size_t i = 0; i < p.values().size(); ++i) p.values()[i] += 1e-2 * g.values()[i];
    CHECK(forward<double>(p, x) > before);
}

TEST_CASE("grad: non-finite input") {
    std::mt19937_64 rng(6);
    const auto p = random_params(4, 3, rng);
    auto batch = random_batch(2, 4, rng);
    batch.advantage[1] = std::nan("");
    CHECK_THROWS_AS(grad(p, batch, 0.0), DataError);
    batch = random_batch(2, 4, rng);
    batch.features(0, 0) = INFINITY;
    CHECK_THROWS_AS(grad(p, batch, 0.0), DataError);
}

TEST_CASE("backward_logits is linear in the coefficients") {
    std::mt19937_64 rng(8);
    const auto p = random_params(6, 5, rng);
    const auto batch = random_batch(7, 6, rng);
    Vector<double> c1 = Vector<double>::Random(7), c2 = Vector<double>::Random(7);
    const auto g1 = backward_logits(p, batch.features, c1);
    const auto g2 = backward_logits(p, batch.features, c2);
    const auto g12 = backward_logits<double>(p, batch.features, c1 + 2.0 * c2);
    for (std::size_t i = 0; i < g1.values().size(); ++i)
        CHECK(g12.values()[i] == doctest::Approx(g1.values()[i] + 2.0 * g2.values()[i]));
}

TEST_CASE("FeatureScaler") {
    const FloatMatrix base(3, 2, {0, 10, 2, 10, 4, 10});
    const FeatureScaler s = FeatureScaler::fit(base);
    float out[2];
    const float in[] = {2, 10};
    s.apply(in, out);
    CHECK(out[0] == doctest::Approx(0.0));
    CHECK(std::isfinite(out[1]));
    const FeatureScaler id = FeatureScaler::identity(2);
    id.apply(in, out);
    CHECK(out[0] == 2.0f);
    CHECK(out[1] == 10.0f);

    const Graph g = Graph::from_lists({{1, 2}, {0}, {}}, 0);
    const auto sources = g.edge_sources();
    const EdgeId edges[] = {2, 1};
    const RowMatrix<float> X = build_edge_features(g, sources, base, id, edges);
    REQUIRE(X.rows() == 2);
    CHECK(X(0, 0) == 2.0f);  // edge 2 is 1 -> 0
    CHECK(X(0, 2) == 0.0f);
    CHECK(X(1, 2) == 4.0f);  // edge 1 is 0 -> 2
}

TEST_CASE("policy checkpoint round trip") {
    const PolicyParams p = init_policy(6, 4, 3);
    const auto path = std::filesystem::temp_directory_path() / "simgraph_test_policy.bin";
    save_policy(path, p);
    CHECK(load_policy(path) == p);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << "JUNKJUNKJUNK";
    }
    CHECK_THROWS_AS(load_policy(path), FormatError);
    std::filesystem::remove(path);
}
