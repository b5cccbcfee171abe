#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "vnet/community.hpp"

using namespace vnet;

namespace {

using EdgeList = std::vector<std::pair<index_t, index_t>>;

void add_clique(EdgeList& e, index_t first, index_t size) {
    for (index_t u = first; u < first + size; ++u)
        for (index_t v = u + 1; v < first + size; ++v) e.emplace_back(u, v);
}

Graph two_cliques(index_t size, bool bridged) {
    EdgeList e;
    add_clique(e, 0, size);
    add_clique(e, size, size);
    if (bridged) e.emplace_back(size - 1, size);
    return Graph::from_edges(2 * size, e);
}

}  // namespace

TEST(Modularity, TwoDisconnectedCliques) {
    const auto g = two_cliques(4, false);
    const std::vector<Label> labels = {0, 0, 0, 0, 1, 1, 1, 1};
    EXPECT_NEAR(modularity(g, labels), 0.5, 1e-12);
}

TEST(Modularity, SingleCommunityIsZero) {
    Rng rng(1);
    const auto g = oracle::random_graph(30, 0.2, rng);
    const std::vector<Label> labels(g.n(), 0);
    EXPECT_NEAR(modularity(g, labels), 0.0, 1e-12);
}

TEST(Modularity, MatchesDoubleLoop) {
    Rng rng(2);
    for (int rep = 0; rep < 20; ++rep) {
        const auto g = oracle::random_graph(40, 0.1, rng);
        if (g.n_edges() == 0) continue;
        std::vector<Label> labels(g.n());
        for (auto& l : labels) l = static_cast<Label>(uniform_index(rng, 5));
        EXPECT_NEAR(modularity(g, labels), oracle::modularity(g, labels), 1e-12);
    }
}

TEST(Modularity, WeightedMatchesDoubleLoop) {
    GraphBuilder b;
    Rng rng(3);
    for (int k = 0; k < 200; ++k)
        b.add_edge(std::to_string(uniform_index(rng, 25)), std::to_string(uniform_index(rng, 25)), 1.0);
    const auto g = std::move(b).build(true);
    std::vector<Label> labels(g.n());
    for (auto& l : labels) l = static_cast<Label>(uniform_index(rng, 3));
    EXPECT_NEAR(modularity(g, labels), oracle::modularity(g, labels), 1e-12);
}

TEST(Modularity, BoundedAndRejectsEdgeless) {
    Rng rng(4);
    const auto g = oracle::random_graph(30, 0.2, rng);
    std::vector<Label> labels(g.n());
    for (index_t u = 0; u < g.n(); ++u) labels[u] = static_cast<Label>(u);
    const double q = modularity(g, labels);
    EXPECT_GE(q, -0.5);
    EXPECT_LE(q, 1.0);
    const auto empty = Graph::from_edges(3, {});
    EXPECT_THROW(modularity(empty, std::vector<Label>(3, 0)), std::domain_error);
    EXPECT_THROW(modularity(g, std::vector<Label>(2, 0)), std::invalid_argument);
}

TEST(Louvain, RingOfCliques) {
    EdgeList e;
    const index_t k = 10, m = 30;
    for (index_t c = 0; c < m; ++c) {
        add_clique(e, c * k, k);
        e.emplace_back(c * k, ((c + 1) % m) * k + 1);
    }
    const auto g = Graph::from_edges(k * m, e);
    LouvainOptions opt;
    opt.runs = 20;
    const auto res = louvain(g, opt);
    EXPECT_GT(res.modularity, 0.8);
    EXPECT_EQ(community_count(res.labels), m);
    for (index_t c = 0; c < m; ++c)
        for (index_t u = c * k; u < (c + 1) * k; ++u) EXPECT_EQ(res.labels[u], res.labels[c * k]);
    EXPECT_NEAR(res.modularity, oracle::modularity(g, res.labels), 1e-12);
}

TEST(Louvain, CompleteGraphIsOneCommunity) {
    EdgeList e;
    add_clique(e, 0, 12);
    const auto res = louvain(Graph::from_edges(12, e), {5, 0});
    EXPECT_EQ(community_count(res.labels), 1u);
    EXPECT_NEAR(res.modularity, 0.0, 1e-12);
}

TEST(Louvain, BestRunDominatesAndIsReproducible) {
    Rng rng(6);
    const auto g = oracle::random_graph(80, 0.06, rng);
    LouvainOptions opt;
    opt.runs = 25;
    opt.seed = 9;
    const auto a = louvain(g, opt), b = louvain(g, opt);
    ASSERT_EQ(a.run_modularity.size(), 25u);
    for (double q : a.run_modularity) EXPECT_GE(a.modularity, q);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.modularity, b.modularity);
}

TEST(Louvain, LabelsAreCanonical) {
    const auto res = louvain(two_cliques(5, true), {3, 1});
    // largest community first; ties broken by smallest member
    EXPECT_EQ(res.labels.front(), 0);
    EXPECT_EQ(community_count(res.labels), 2u);
}

TEST(Polarization, ThreeToOne) {
    // node 0 retweets three seeds of community 0 and one of community 1
    const auto g = Graph::from_edges(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}});
    const std::vector<Label> seeds = {kUnlabeled, 0, 0, 0, 1, kUnlabeled};
    const auto s = polarization(g, seeds);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].user, 0u);
    EXPECT_DOUBLE_EQ(s[0].rho, 0.75);
    EXPECT_EQ(s[0].target_community, 0);
    EXPECT_EQ(assign_polarized(s, 6, 0.9)[0], kUnlabeled);
    EXPECT_EQ(assign_polarized(s, 6, 0.75)[0], 0);
}

TEST(Polarization, ThresholdIsInclusive) {
    std::vector<PolarizationScore> s = {{0, 0.9, 2}, {1, std::nextafter(0.9, 0.0), 2}};
    const auto l = assign_polarized(s, 2, 0.9);
    EXPECT_EQ(l[0], 2);
    EXPECT_EQ(l[1], kUnlabeled);
}

TEST(Polarization, NineOfTenCrossesThreshold) {
    EdgeList e;
    for (index_t k = 1; k <= 10; ++k) e.emplace_back(0, k);
    const auto g = Graph::from_edges(11, e);
    std::vector<Label> seeds(11, 0);
    seeds[0] = kUnlabeled;
    seeds[10] = 1;
    const auto s = polarization(g, seeds);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(assign_polarized(s, 11, 0.9)[0], 0);
}

TEST(Polarization, MatchesCounting) {
    Rng rng(8);
    const auto g = oracle::random_graph(60, 0.1, rng);
    std::vector<Label> seeds(g.n(), kUnlabeled);
    for (index_t u = 0; u < 15; ++u) seeds[u] = static_cast<Label>(u % 3);
    const auto s = polarization(g, seeds);
    const auto ref = oracle::polarization(g, seeds);
    ASSERT_EQ(s.size(), ref.size());
    for (const auto& p : s) {
        const auto& [rho, target] = ref.at(p.user);
        EXPECT_DOUBLE_EQ(p.rho, rho);
        EXPECT_EQ(p.target_community, target);
        EXPECT_GT(p.rho, 0.0);
        EXPECT_LE(p.rho, 1.0);
    }
}

TEST(LabelPropagation, TwoCliquesFromOneSeedEach) {
    const auto g = two_cliques(6, true);
    std::vector<bool> fixed(g.n(), false);
    std::vector<Label> init(g.n(), kUnlabeled);
    fixed[0] = fixed[11] = true;
    init[0] = 0;
    init[11] = 1;
    PropagationOptions opt;
    opt.runs = 50;
    const auto a = label_propagation(g, fixed, init, opt);
    for (index_t u = 0; u < 5; ++u) EXPECT_EQ(a.labels[u], 0);
    for (index_t u = 7; u < 12; ++u) EXPECT_EQ(a.labels[u], 1);
    EXPECT_EQ(a.provenance[0], Provenance::seed);
    EXPECT_EQ(a.provenance[3], Provenance::propagated);
}

TEST(LabelPropagation, FixedNodesNeverChange) {
    Rng rng(10);
    const auto g = oracle::random_graph(50, 0.1, rng);
    std::vector<bool> fixed(g.n(), false);
    std::vector<Label> init(g.n(), kUnlabeled);
    for (index_t u = 0; u < 10; ++u) {
        fixed[u] = true;
        init[u] = static_cast<Label>(u % 2);
    }
    for (bool unique : {false, true}) {
        PropagationOptions opt;
        opt.runs = 20;
        opt.unique_seed_labels = unique;
        const auto a = label_propagation(g, fixed, init, opt);
        for (index_t u = 0; u < 10; ++u) EXPECT_EQ(a.labels[u], init[u]);
        for (index_t u = 10; u < g.n(); ++u)
            EXPECT_TRUE(a.labels[u] == kUnlabeled || a.labels[u] == 0 || a.labels[u] == 1);
    }
}

TEST(LabelPropagation, UnreachableNodeStaysUnassigned) {
    const auto g = Graph::from_edges(5, {{0, 1}, {1, 2}, {3, 4}});
    std::vector<bool> fixed = {true, false, false, false, false};
    std::vector<Label> init = {0, kUnlabeled, kUnlabeled, kUnlabeled, kUnlabeled};
    const auto a = label_propagation(g, fixed, init, {10, 0, true, 100, false});
    EXPECT_EQ(a.labels[2], 0);
    EXPECT_EQ(a.labels[3], kUnlabeled);
    EXPECT_EQ(a.provenance[4], Provenance::unassigned);
    EXPECT_EQ(a.agreement[4], 0.0);
}

TEST(LabelPropagation, WeightsDecideVotes) {
    // node 0 links seed 1 (community 0) with weight 3 and seeds 2, 3 (community 1) with weight 1 each
    Graph g(NodeRegistry::numbered(4), {{0, 1, 3.0}, {0, 2, 1.0}, {0, 3, 1.0}}, true);
    std::vector<bool> fixed = {false, true, true, true};
    std::vector<Label> init = {kUnlabeled, 0, 1, 1};
    PropagationOptions opt;
    opt.runs = 5;
    EXPECT_EQ(label_propagation(g, fixed, init, opt).labels[0], 0);
    opt.weighted = false;
    EXPECT_EQ(label_propagation(g, fixed, init, opt).labels[0], 1);
}

TEST(LabelPropagation, RejectsFixedWithoutLabel) {
    const auto g = Graph::from_edges(2, {{0, 1}});
    EXPECT_THROW(label_propagation(g, {true, false}, std::vector<Label>{kUnlabeled, kUnlabeled}),
                 std::invalid_argument);
}
