#include <doctest.h>

#include "helpers.hpp"

using namespace sgtn;
using sgtn::test::fd_check;
using sgtn::test::random_tensor;

namespace {

AdjacencyAttention make_attention(Rng& rng, std::size_t K, std::size_t dk) {
    AdjacencyAttention att;
    att.wq = Var(random_tensor(rng, {K, dk}), true);
    att.wk = Var(random_tensor(rng, {K, dk}), true);
    return att;
}

/// Straight-loop recomputation of the adjacency attention map.
Tensor attention_oracle(const Tensor& a, const Tensor& wq, const Tensor& wk) {
    const std::size_t T = a.extent(0), K = a.extent(1), dk = wq.extent(1);
    Tensor out({T, K, K}, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        std::vector<std::vector<double>> q(K, std::vector<double>(dk, 0.0)), kp = q;
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t d = 0; d < dk; ++d)
                for (std::size_t j = 0; j < K; ++j) {
                    q[i][d] += a.at({t, i, j}) * wq.at({j, d});
                    kp[i][d] += a.at({t, i, j}) * wk.at({j, d});
                }
        for (std::size_t i = 0; i < K; ++i) {
            std::vector<double> scores(K, 0.0);
            double mx = -1e300;
            for (std::size_t j = 0; j < K; ++j) {
                for (std::size_t d = 0; d < dk; ++d) scores[j] += q[i][d] * kp[j][d];
                scores[j] /= std::sqrt(static_cast<double>(dk));
                mx = std::max(mx, scores[j]);
            }
            double z = 0.0;
            for (std::size_t j = 0; j < K; ++j) z += std::exp(scores[j] - mx);
            for (std::size_t j = 0; j < K; ++j) out.at({t, i, j}) = std::exp(scores[j] - mx) / z;
        }
    }
    return out;
}

} // namespace

TEST_CASE("attention weights match the loop oracle within 1e-12") {
    for (int i = 0; i < 20; ++i) {
        Rng rng(4000 + static_cast<std::uint64_t>(i));
        const std::size_t K = 2 + static_cast<std::size_t>(rng.uniform() * 4.0) % 4;
        AdjacencyAttention att = make_attention(rng, K, 8);
        const Tensor a = random_tensor(rng, {3, K, K}, 0.0, 1.0);
        const Tensor got = att.attention_weights(constant(a)).value();
        const Tensor want = attention_oracle(a, att.wq.value(), att.wk.value());
        REQUIRE(got.shape() == want.shape());
        for (std::size_t j = 0; j < got.size(); ++j)
            CHECK(std::abs(got[j] - want[j]) < 1e-12);
    }
}

TEST_CASE("attention rows sum to one; zero adjacency gives uniform rows") {
    Rng rng(4100);
    const std::size_t K = 4;
    AdjacencyAttention att = make_attention(rng, K, 8);
    const Tensor zero({2, K, K}, 0.0);
    const Tensor attn = att.attention_weights(constant(zero)).value();
    for (std::size_t i = 0; i < attn.size(); ++i) CHECK(attn[i] == doctest::Approx(0.25));
    const Tensor a = random_tensor(rng, {2, K, K}, 0.0, 2.0);
    const Tensor attn2 = att.attention_weights(constant(a)).value();
    for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t i = 0; i < K; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < K; ++j) s += attn2.at({t, i, j});
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
}

TEST_CASE("sparse mask keeps strict majorities only") {
    AdjacencyAttention att;
    Tensor attn({1, 2, 2}, {0.6, 0.4, 0.5, 0.5});
    const Tensor m = att.sparse_mask(attn);
    CHECK(m[0] == 1.0); // 0.6 > 0.5
    CHECK(m[1] == 0.0);
    CHECK(m[2] == 0.0); // exactly 0.5 is dropped
    CHECK(m[3] == 0.0);
    Tensor uniform({1, 1, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const Tensor mu = att.sparse_mask(uniform);
    for (std::size_t i = 0; i < 3; ++i) CHECK(mu[i] == 0.0);
}

TEST_CASE("mode semantics: off is identity; dense reweights; sparse supports at most one per row") {
    for (int i = 0; i < 20; ++i) {
        Rng rng(4200 + static_cast<std::uint64_t>(i));
        const std::size_t K = 3;
        AdjacencyAttention att = make_attention(rng, K, 8);
        const Tensor a = random_tensor(rng, {2, K, K}, 0.0, 1.5);
        Var av = constant(a);
        const Tensor off = att.apply(av, AttentionMode::off).value();
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(off[j] == a[j]);

        const Tensor attn = att.attention_weights(av).value();
        const Tensor dense = att.apply(av, AttentionMode::dense).value();
        for (std::size_t j = 0; j < a.size(); ++j)
            CHECK(dense[j] == doctest::Approx(attn[j] * a[j]).epsilon(1e-12));

        const Tensor sparse = att.apply(av, AttentionMode::sparse).value();
        for (std::size_t t = 0; t < 2; ++t)
            for (std::size_t r = 0; r < K; ++r) {
                std::size_t support = 0;
                for (std::size_t c = 0; c < K; ++c) {
                    CHECK(std::abs(sparse.at({t, r, c})) <= std::abs(a.at({t, r, c})) + 1e-15);
                    if (sparse.at({t, r, c}) != 0.0) {
                        ++support;
                        // support must sit on the dense-attention argmax
                        for (std::size_t c2 = 0; c2 < K; ++c2)
                            CHECK(attn.at({t, r, c}) >= attn.at({t, r, c2}));
                    }
                }
                CHECK(support <= 1);
            }
    }
}

TEST_CASE("empty rows and columns stay zero in every mode") {
    Rng rng(4300);
    const std::size_t K = 3;
    AdjacencyAttention att = make_attention(rng, K, 8);
    Tensor a = random_tensor(rng, {2, K, K}, 0.2, 1.0);
    for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t j = 0; j < K; ++j) {
            a.at({t, 2, j}) = 0.0; // slot 2 empty
            a.at({t, j, 2}) = 0.0;
        }
    for (auto mode : {AttentionMode::off, AttentionMode::dense, AttentionMode::sparse}) {
        const Tensor out = att.apply(constant(a), mode).value();
        for (std::size_t t = 0; t < 2; ++t)
            for (std::size_t j = 0; j < K; ++j) {
                CHECK(out.at({t, 2, j}) == 0.0);
                CHECK(out.at({t, j, 2}) == 0.0);
            }
    }
}

TEST_CASE("gradients flow through dense mode to both projections") {
    for (int i = 0; i < 10; ++i) {
        Rng rng(4400 + static_cast<std::uint64_t>(i));
        const std::size_t K = 3;
        const Tensor a = random_tensor(rng, {2, K, K}, 0.0, 1.0);
        std::vector<Var> leaves = {Var(random_tensor(rng, {K, 4}), true),
                                   Var(random_tensor(rng, {K, 4}), true)};
        auto build = [&a](std::vector<Var>& l) {
            AdjacencyAttention att;
            att.wq = l[0];
            att.wk = l[1];
            Var out = att.apply(constant(a), AttentionMode::dense);
            return sum(mul(out, out));
        };
        CHECK(fd_check(build, leaves) < 1e-4);
    }
}

TEST_CASE("sparse indicator is detached: no gradient reaches the projections") {
    Rng rng(4500);
    const std::size_t K = 2; // rows of two: one weight always beats 0.5
    AdjacencyAttention att;
    att.wq = Var(random_tensor(rng, {K, 4}), true);
    att.wk = Var(random_tensor(rng, {K, 4}), true);
    att.wq.grad().fill(0.0);
    att.wk.grad().fill(0.0);
    Var a(random_tensor(rng, {2, K, K}, 0.0, 1.0), true);
    a.grad().fill(0.0);
    Var out = att.apply(a, AttentionMode::sparse);
    backward(sum(mul(out, out)));
    for (std::size_t i = 0; i < att.wq.grad().size(); ++i) {
        CHECK(att.wq.grad()[i] == 0.0);
        CHECK(att.wk.grad()[i] == 0.0);
    }
    // gradient still flows through the retained adjacency entries
    double g = 0.0;
    for (std::size_t i = 0; i < a.grad().size(); ++i) g += std::abs(a.grad()[i]);
    CHECK(g > 0.0);
}

TEST_CASE("raw query/key mode needs no projections") {
    Rng rng(4600);
    AdjacencyAttention att;
    att.raw_qk = true;
    const Tensor a = random_tensor(rng, {2, 3, 3}, 0.0, 1.0);
    const Tensor attn = att.attention_weights(constant(a)).value();
    for (std::size_t t = 0; t < 2; ++t)
        for (std::size_t i = 0; i < 3; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < 3; ++j) s += attn.at({t, i, j});
            CHECK(std::abs(s - 1.0) < 1e-12);
        }
}

TEST_CASE("mode names parse and print round-trip") {
    for (auto m : {AttentionMode::off, AttentionMode::dense, AttentionMode::sparse})
        CHECK(parse_attention_mode(attention_mode_name(m)) == m);
    CHECK_THROWS_AS(parse_attention_mode("bogus"), std::invalid_argument);
}
