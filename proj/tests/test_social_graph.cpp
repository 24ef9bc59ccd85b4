#include <doctest.h>

#include "helpers.hpp"

using namespace sgtn;
using sgtn::test::random_window;
using sgtn::test::symmetric_eigenvalues;

TEST_CASE("inverse-distance kernel") {
    CHECK(kernel_fa(0.0) == 1.0);
    CHECK(kernel_fa(2.0) == 0.5);
    CHECK(kernel_fa(0.1) == doctest::Approx(10.0));
    CHECK(kernel_fa(1e-13) == 1.0); // zero branch within tolerance
    CHECK_THROWS_AS(kernel_fa(-1.0), std::domain_error);
}

namespace {

TrajectoryWindow two_frame_window(std::vector<std::vector<std::array<double, 2>>> obs,
                                  std::vector<std::vector<bool>> present) {
    TrajectoryWindow w;
    const std::size_t T = obs.size(), N = obs[0].size();
    for (std::size_t a = 0; a < N; ++a) {
        w.agent_ids.push_back(static_cast<long>(a + 1));
        w.agent_classes.push_back(AgentClass::pedestrian);
    }
    for (std::size_t t = 0; t < T; ++t) w.obs_frames.push_back(static_cast<long>(t));
    w.fut_frames = {static_cast<long>(T)};
    w.obs_pos = std::move(obs);
    w.obs_present = std::move(present);
    w.fut_pos.assign(1, std::vector<std::array<double, 2>>(N, {0.0, 0.0}));
    w.fut_present.assign(1, std::vector<bool>(N, false));
    w.validate();
    return w;
}

} // namespace

TEST_CASE("velocity nodes: zero first step, deltas after") {
    auto w = two_frame_window({{{0.0, 0.0}}, {{1.0, 2.0}}}, {{true}, {true}});
    const VelocityField f = velocity_nodes(w);
    CHECK(f.vel[0][0] == std::array<double, 2>{0.0, 0.0});
    CHECK(f.vel[1][0] == std::array<double, 2>{1.0, 2.0});
    CHECK(f.valid[0][0]);
    CHECK(f.valid[1][0]);
}

TEST_CASE("velocity nodes: stationary agent is all zeros") {
    auto w = two_frame_window({{{3.0, 4.0}}, {{3.0, 4.0}}, {{3.0, 4.0}}},
                              {{true}, {true}, {true}});
    const VelocityField f = velocity_nodes(w);
    for (std::size_t t = 0; t < 3; ++t) {
        CHECK(f.vel[t][0][0] == 0.0);
        CHECK(f.vel[t][0][1] == 0.0);
    }
}

TEST_CASE("velocity nodes: gap frames are invalid and deltas divide by gap length") {
    auto w = two_frame_window({{{0.0, 0.0}}, {{9.0, 9.0}}, {{4.0, 6.0}}},
                              {{true}, {false}, {true}});
    const VelocityField f = velocity_nodes(w);
    CHECK(f.valid[0][0]);
    CHECK_FALSE(f.valid[1][0]);
    CHECK(f.valid[2][0]);
    CHECK(f.vel[2][0][0] == doctest::Approx(2.0)); // 4 m over 2 frames
    CHECK(f.vel[2][0][1] == doctest::Approx(3.0));
}

TEST_CASE("adjacency values, symmetry and diagonal") {
    CHECK(adjacency({{0.0, 0.0}}, {true}).at({0, 0}) == 1.0);
    Tensor a1 = adjacency({{0.0, 0.0}, {1.0, 0.0}}, {true, true});
    CHECK(a1.at({0, 1}) == 1.0);
    CHECK(a1.at({1, 0}) == 1.0);
    CHECK(a1.at({0, 0}) == 1.0);
    Tensor a4 = adjacency({{0.0, 0.0}, {4.0, 0.0}}, {true, true});
    CHECK(a4.at({0, 1}) == doctest::Approx(0.25));
    Tensor ap = adjacency({{0.0, 0.0}, {1.0, 1.0}}, {true, false});
    CHECK(ap.at({1, 1}) == 0.0);
    CHECK(ap.at({0, 1}) == 0.0);
}

TEST_CASE("normalization: hand-computed two-agent case and identity case") {
    Tensor one({1, 1}, {1.0});
    CHECK(normalize_adjacency(one, {true}).at({0, 0}) == 1.0);
    Tensor a({2, 2}, {1.0, 1.0, 1.0, 1.0});
    Tensor n = normalize_adjacency(a, {true, true});
    for (std::size_t i = 0; i < 4; ++i) CHECK(n[i] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("normalization: eigenvalues within the unit interval on random graphs") {
    for (int i = 0; i < 100; ++i) {
        Rng rng(900 + static_cast<std::uint64_t>(i));
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 3.0);
        std::vector<std::array<double, 2>> pos(n);
        for (auto& p : pos) p = {rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)};
        const Tensor norm = normalize_adjacency(adjacency(pos, std::vector<bool>(n, true)),
                                                std::vector<bool>(n, true));
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c)
                CHECK(norm.at({r, c}) == doctest::Approx(norm.at({c, r})).epsilon(1e-12));
        for (double ev : symmetric_eigenvalues(norm)) {
            CHECK(ev <= 1.0 + 1e-12);
            CHECK(ev >= -1.0 - 1e-12);
        }
    }
}

TEST_CASE("literal normalization form is available and differs off the uniform case") {
    Tensor a({2, 2}, {1.0, 0.5, 0.5, 1.0});
    const Tensor sym = normalize_adjacency(a, {true, true}, false);
    const Tensor lit = normalize_adjacency(a, {true, true}, true);
    CHECK(sym.at({0, 1}) == doctest::Approx(sym.at({1, 0})));
    CHECK(lit.at({0, 0}) == doctest::Approx(1.0)); // similarity transform keeps the diagonal scale
    CHECK(lit.at({0, 1}) != sym.at({0, 1}));
}

TEST_CASE("pseudo-image padding, packing and interception") {
    Rng rng(42);
    SUBCASE("N=1, K=3: single image, zero outside slot 0") {
        auto w = random_window(rng, 1, 2, 1);
        const auto images = pseudo_images(build_graph(w), 3);
        REQUIRE(images.size() == 1);
        const auto& im = images[0];
        CHECK(im.v_block.shape() == std::vector<std::size_t>{2, 3, 2});
        CHECK(im.a_block.shape() == std::vector<std::size_t>{2, 3, 3});
        CHECK(im.slot_agent[0] == 0);
        CHECK(im.slot_agent[1] == kEmptySlot);
        for (std::size_t t = 0; t < 2; ++t)
            for (std::size_t s = 0; s < 3; ++s)
                for (std::size_t s2 = 0; s2 < 3; ++s2)
                    if (s != 0 || s2 != 0) CHECK(im.a_block.at({t, s, s2}) == 0.0);
    }
    SUBCASE("N=5, K=3: two images with packing order {0,1,2},{3,4,EMPTY}") {
        auto w = random_window(rng, 5, 3, 1);
        const auto images = pseudo_images(build_graph(w), 3);
        REQUIRE(images.size() == 2);
        CHECK(images[0].slot_agent == std::vector<long>{0, 1, 2});
        CHECK(images[1].slot_agent == std::vector<long>{3, 4, kEmptySlot});
    }
    SUBCASE("N=K: adjacency block equals the normalized adjacency per frame") {
        auto w = random_window(rng, 3, 4, 1);
        const auto g = build_graph(w);
        const auto images = pseudo_images(g, 3);
        REQUIRE(images.size() == 1);
        for (std::size_t t = 0; t < 4; ++t)
            for (std::size_t s = 0; s < 3; ++s)
                for (std::size_t s2 = 0; s2 < 3; ++s2)
                    CHECK(images[0].a_block.at({t, s, s2}) == g.adj_norm[t].at({s, s2}));
    }
}

TEST_CASE("pseudo-image invariants over 1000 random windows") {
    std::size_t checked = 0;
    for (int i = 0; i < 1000; ++i) {
        Rng rng(2000 + static_cast<std::uint64_t>(i));
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 10.0) % 10;
        const std::size_t k = 1 + static_cast<std::size_t>(rng.uniform() * 8.0) % 8;
        const std::size_t t_obs = 2 + static_cast<std::size_t>(rng.uniform() * 7.0) % 7;
        auto w = random_window(rng, n, t_obs, 1, 0.3);
        const auto images = pseudo_images(build_graph(w), k);
        CHECK(images.size() == (n + k - 1) / k);
        for (const auto& im : images) {
            REQUIRE(im.v_block.shape() == std::vector<std::size_t>{t_obs, k, 2});
            REQUIRE(im.a_block.shape() == std::vector<std::size_t>{t_obs, k, k});
            for (std::size_t t = 0; t < t_obs; ++t)
                for (std::size_t s = 0; s < k; ++s) {
                    if (im.valid[t][s]) continue;
                    CHECK(im.v_block.at({t, s, 0}) == 0.0);
                    CHECK(im.v_block.at({t, s, 1}) == 0.0);
                    for (std::size_t s2 = 0; s2 < k; ++s2) {
                        CHECK(im.a_block.at({t, s, s2}) == 0.0);
                        CHECK(im.a_block.at({t, s2, s}) == 0.0);
                    }
                }
            ++checked;
        }
    }
    CHECK(checked >= 1000);
}

TEST_CASE("agent relabeling permutes pseudo-image slots equivariantly") {
    for (int i = 0; i < 25; ++i) {
        Rng rng(3000 + static_cast<std::uint64_t>(i));
        const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 3.0) % 3;
        auto w = random_window(rng, n, 4, 1, 0.2);
        // reverse agent order: new index j holds old agent n-1-j
        TrajectoryWindow r = w;
        for (std::size_t a = 0; a < n; ++a) {
            const std::size_t src = n - 1 - a;
            r.agent_ids[a] = static_cast<long>(a + 1);
            r.agent_classes[a] = w.agent_classes[src];
            for (std::size_t t = 0; t < w.t_obs(); ++t) {
                r.obs_pos[t][a] = w.obs_pos[t][src];
                r.obs_present[t][a] = w.obs_present[t][src];
            }
            for (std::size_t t = 0; t < w.t_pred(); ++t) {
                r.fut_pos[t][a] = w.fut_pos[t][src];
                r.fut_present[t][a] = w.fut_present[t][src];
            }
        }
        const auto orig = pseudo_images(build_graph(w), n)[0];
        const auto perm = pseudo_images(build_graph(r), n)[0];
        for (std::size_t t = 0; t < w.t_obs(); ++t)
            for (std::size_t s = 0; s < n; ++s) {
                const std::size_t ps = n - 1 - s;
                CHECK(perm.v_block.at({t, ps, 0}) == orig.v_block.at({t, s, 0}));
                CHECK(perm.v_block.at({t, ps, 1}) == orig.v_block.at({t, s, 1}));
                // degree sums run in a different index order, so allow 1-ulp drift
                for (std::size_t s2 = 0; s2 < n; ++s2)
                    CHECK(std::abs(perm.a_block.at({t, ps, n - 1 - s2}) -
                                   orig.a_block.at({t, s, s2})) < 1e-12);
            }
    }
}

TEST_CASE("window validation rejects under-observed agents and unsorted ids") {
    auto w = two_frame_window({{{0.0, 0.0}}, {{1.0, 0.0}}}, {{true}, {true}});
    TrajectoryWindow bad = w;
    bad.obs_present[0][0] = false;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    TrajectoryWindow unsorted = w;
    unsorted.agent_ids = {5};
    unsorted.validate(); // single agent fine with any id
    Rng rng(7);
    auto w2 = random_window(rng, 2, 3, 1);
    std::swap(w2.agent_ids[0], w2.agent_ids[1]);
    CHECK_THROWS_AS(w2.validate(), std::invalid_argument);
}

TEST_CASE("pseudo-image debug dump is frame-major and names empty slots") {
    Rng rng(11);
    auto w = random_window(rng, 1, 2, 1);
    const auto im = pseudo_images(build_graph(w), 2)[0];
    const std::string d = dump_pseudo_image(im);
    CHECK(d.find("pseudo-image T=2 K=2") != std::string::npos);
    CHECK(d.find("EMPTY") != std::string::npos);
    CHECK(d.find("frame 0") != std::string::npos);
    CHECK(d.find("frame 1") != std::string::npos);
}
