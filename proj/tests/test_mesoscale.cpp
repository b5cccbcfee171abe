#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "vnet/mesoscale.hpp"
#include "vnet/synth.hpp"

using namespace vnet;

namespace {

using EdgeList = std::vector<std::pair<index_t, index_t>>;

long double choose(std::uint64_t n, std::uint64_t k) {
    if (k > n) return 0.0L;
    long double r = 1.0L;
    for (std::uint64_t i = 1; i <= k; ++i) r = r * static_cast<long double>(n - k + i) / static_cast<long double>(i);
    return r;
}

double hypergeometric_tail(std::uint64_t pop, std::uint64_t succ, std::uint64_t draws, std::uint64_t obs) {
    long double t = 0.0L;
    for (std::uint64_t x = obs; x <= draws; ++x) t += choose(succ, x) * choose(pop - succ, draws - x);
    return static_cast<double>(t / choose(pop, draws));
}

}  // namespace

TEST(KCore, CliqueHasUniformCoreness) {
    EdgeList e;
    for (index_t u = 0; u < 4; ++u)
        for (index_t v = u + 1; v < 4; ++v) e.emplace_back(u, v);
    const auto dec = k_core_decompose(Graph::from_edges(4, e));
    EXPECT_EQ(dec.coreness, (std::vector<std::size_t>{3, 3, 3, 3}));
    EXPECT_EQ(dec.max_coreness(), 3u);
    EXPECT_EQ(dec.innermost_shell().size(), 4u);
}

TEST(KCore, TreeAndIsolatedNodes) {
    const auto dec = k_core_decompose(Graph::from_edges(5, {{0, 1}, {1, 2}, {1, 3}}));
    EXPECT_EQ(dec.coreness, (std::vector<std::size_t>{1, 1, 1, 1, 0}));
    EXPECT_EQ(dec.shells[0], (std::vector<index_t>{4}));
}

TEST(KCore, MatchesIterativeDeletion) {
    Rng rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 2 + uniform_index(rng, 99);
        const auto g = oracle::random_graph(n, 0.02 + 0.25 * uniform01(rng), rng);
        const auto dec = k_core_decompose(g);
        EXPECT_EQ(dec.coreness, oracle::coreness(g));
        std::size_t total = 0;
        for (std::size_t c = 0; c < dec.shells.size(); ++c) {
            total += dec.shells[c].size();
            for (index_t v : dec.shells[c]) EXPECT_EQ(dec.coreness[v], c);
        }
        EXPECT_EQ(total, n);
    }
}

TEST(QuantileTiers, MaxShellIsInnermostTier) {
    Rng rng(32);
    const auto g = oracle::random_graph(80, 0.08, rng);
    const auto dec = k_core_decompose(g);
    const auto tiers = quantile_tiers(dec);
    for (index_t v = 0; v < g.n(); ++v) {
        EXPECT_GE(tiers[v], 0);
        EXPECT_LE(tiers[v], 4);
        EXPECT_EQ(tiers[v] == 4, dec.coreness[v] == dec.max_coreness());
        for (index_t u = 0; u < g.n(); ++u)
            if (dec.coreness[u] < dec.coreness[v]) {
                EXPECT_LE(tiers[u], tiers[v]);
            }
    }
}

TEST(QuantileTiers, HandCase) {
    KCoreDecomposition dec;
    dec.coreness = {1, 1, 2, 2, 3, 3, 4, 5};
    dec.shells.resize(6);
    for (index_t v = 0; v < dec.coreness.size(); ++v) dec.shells[dec.coreness[v]].push_back(v);
    // nearest-rank quartiles of 8 values: ranks 2, 4, 6 -> 1, 2, 3
    EXPECT_EQ(quantile_tiers(dec), (std::vector<int>{0, 0, 1, 1, 2, 2, 3, 4}));
}

TEST(Hypergeometric, MatchesDirectSum) {
    for (std::uint64_t pop : {10u, 30u, 45u})
        for (std::uint64_t succ : {3u, 10u})
            for (std::uint64_t draws : {4u, 12u}) {
                if (draws > pop) continue;
                for (std::uint64_t obs = 0; obs <= std::min(succ, draws) + 1; ++obs) {
                    const double ref = hypergeometric_tail(pop, succ, draws, obs);
                    const double got = log_hypergeometric_tail(pop, succ, draws, obs);
                    if (ref == 0.0)
                        EXPECT_TRUE(std::isinf(got));
                    else
                        EXPECT_NEAR(got, std::log(ref), 1e-9 * std::max(1.0, std::abs(std::log(ref))));
                }
            }
}

TEST(Surprise, PlantedCoreBeatsBaselines) {
    const auto pc = generate_core_periphery(20, 60, 0.7, 2, 3);
    const auto split = core_periphery(pc.graph, {10, 1, 200});
    const auto dec = k_core_decompose(pc.graph);
    std::vector<bool> shell(pc.graph.n(), false);
    for (index_t v : dec.innermost_shell()) shell[v] = true;
    EXPECT_LT(split.surprise, 0.0);
    EXPECT_LE(split.surprise, split_surprise(pc.graph, std::vector<bool>(pc.graph.n(), true)));
    EXPECT_LE(split.surprise, split_surprise(pc.graph, shell));
    EXPECT_NEAR(split.surprise, split_surprise(pc.graph, split.in_core), 1e-9);
    EXPECT_GT(core_shell_jaccard(split, dec), 0.6);
    EXPECT_EQ(split.core.size() + split.periphery.size(), pc.graph.n());
}

TEST(Surprise, HomogeneousGraphHasNoInformativeSplit) {
    EdgeList e;
    for (index_t u = 0; u < 10; ++u)
        for (index_t v = u + 1; v < 10; ++v) e.emplace_back(u, v);
    const auto split = core_periphery(Graph::from_edges(10, e), {5, 0, 100});
    EXPECT_EQ(split.core.size(), 10u);
    EXPECT_EQ(split.surprise, 0.0);
}

TEST(Jaccard, HandCaseAndErrors) {
    KCoreDecomposition dec;
    dec.coreness = {2, 2, 1, 0};
    dec.shells = {{3}, {2}, {0, 1}};
    CorePeripherySplit s;
    s.in_core = {true, false, true, false};
    EXPECT_DOUBLE_EQ(core_shell_jaccard(s, dec), 1.0 / 3.0);
    s.in_core = {true};
    EXPECT_THROW(core_shell_jaccard(s, dec), std::invalid_argument);
}

TEST(ShellCommunities, TwoCliquesWithBridge) {
    // two 6-cliques joined through node 12, which links two nodes of each
    EdgeList e;
    for (index_t base : {0u, 6u})
        for (index_t u = base; u < base + 6; ++u)
            for (index_t v = u + 1; v < base + 6; ++v) e.emplace_back(u, v);
    for (index_t u : {0u, 1u, 6u, 7u}) e.emplace_back(12, u);
    const auto g = Graph::from_edges(13, e);
    const auto dec = k_core_decompose(g);
    ASSERT_EQ(dec.max_coreness(), 5u);
    const auto sub = innermost_subcommunities(g, dec, {10, 0});
    EXPECT_EQ(sub.nodes.size(), 12u);
    EXPECT_EQ(sub.n_communities, 2u);
    EXPECT_TRUE(sub.bridges.empty());
    EXPECT_NEAR(sub.modularity, oracle::modularity(g.induced_subgraph(sub.nodes), sub.labels), 1e-12);
}

TEST(ShellCommunities, BridgeNodeDetected) {
    // 4-cliques A = {0..3}, B = {4..7}; node 8 links one node of each
    EdgeList e;
    for (index_t base : {0u, 4u})
        for (index_t u = base; u < base + 4; ++u)
            for (index_t v = u + 1; v < base + 4; ++v) e.emplace_back(u, v);
    e.insert(e.end(), {{8, 0}, {8, 4}});
    const auto g = Graph::from_edges(9, e);
    const auto dec = k_core_decompose(g);
    ASSERT_EQ(dec.max_coreness(), 3u);
    const auto sub = innermost_subcommunities(g, dec, {10, 0});
    ASSERT_EQ(sub.n_communities, 2u);
    EXPECT_EQ(sub.nodes.size(), 8u);
    EXPECT_TRUE(sub.bridges.empty());

    // promote node 8 into the shell by linking it to all of both cliques
    e.insert(e.end(), {{8, 1}, {8, 2}, {8, 3}, {8, 5}, {8, 6}, {8, 7}});
    const auto g2 = Graph::from_edges(9, e);
    const auto dec2 = k_core_decompose(g2);
    const auto sub2 = innermost_subcommunities(g2, dec2, {10, 0});
    ASSERT_EQ(sub2.n_communities, 2u);
    EXPECT_EQ(sub2.bridges, (std::vector<index_t>{8}));
}
