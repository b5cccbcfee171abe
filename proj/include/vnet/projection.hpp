#pragma once

// Statistically validated monopartite projection. Each pair of same-layer
// nodes is tested for an excess of common neighbours against the BiCM, whose
// co-occurrence count is Poisson-Binomial distributed; the p-values are then
// filtered with the Benjamini-Hochberg false discovery rate procedure.

#include <algorithm>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vnet/bigraph.hpp"
#include "vnet/nullmodel.hpp"

namespace vnet {

/// P(V >= v_star) for V a sum of independent Bernoulli(probs[j]).
///
/// The PMF is convolved one trial at a time over the states 0..v_star-1 only;
/// mass that reaches v_star moves into an absorbing bucket, which at the end
/// holds the upper tail. Cost O(len * v_star).
inline double poisson_binomial_tail(std::span<const double> probs, std::size_t v_star) {
    if (v_star > probs.size()) throw std::domain_error("poisson_binomial_tail: v_star exceeds number of trials");
    if (v_star == 0) return 1.0;
    std::vector<double> pmf(v_star, 0.0);
    pmf[0] = 1.0;
    CompensatedSum tail;
    std::size_t reach = 0;  // highest state with nonzero mass
    for (double p : probs) {
        if (p < 0.0 || p > 1.0) throw std::domain_error("poisson_binomial_tail: probability outside [0,1]");
        if (p == 0.0) continue;
        const double q = 1.0 - p;
        if (reach + 1 >= v_star) tail.add(p * pmf[v_star - 1]);
        const std::size_t top = std::min(reach + 1, v_star - 1);
        for (std::size_t k = top; k >= 1; --k) pmf[k] = pmf[k] * q + pmf[k - 1] * p;
        pmf[0] *= q;
        reach = top;
    }
    return std::min(1.0, tail.value());
}

/// Observed co-occurrence and its p-value for one unordered node pair.
struct PairSignificance {
    index_t alpha = 0;
    index_t beta = 0;
    std::size_t v_observed = 0;
    double p_value = 1.0;
};

/// p-values for every pair of `layer` nodes with at least one common
/// neighbour, sorted by (alpha, beta). Pairs with V* = 0 have p-value 1 and are
/// left implicit.
inline std::vector<PairSignificance> pair_pvalues(const BipartiteGraph& g, const BicmSolution& sol,
                                                  Layer layer = Layer::bottom) {
    if (g.n_top() != sol.n_top() || g.n_bottom() != sol.n_bottom())
        throw std::domain_error("pair_pvalues: graph and solution dimensions differ");
    const auto pairs = cooccurrences(g, layer);
    const std::size_t n_other = g.size(opposite(layer));
    auto prob = [&](index_t node, index_t other) {
        return layer == Layer::bottom ? sol.probability(other, node) : sol.probability(node, other);
    };
    std::vector<PairSignificance> out(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t k) {
        const auto [a, b, v] = pairs[k];
        std::vector<double> probs;
        probs.reserve(n_other);
        for (index_t j = 0; j < n_other; ++j) {
            const double p = prob(a, j) * prob(b, j);
            if (p > 0.0) probs.push_back(p);
        }
        out[k] = {a, b, v, poisson_binomial_tail(probs, v)};
    });
    return out;
}

/// Pairs surviving the false discovery rate filter.
struct ValidatedProjection {
    std::vector<PairSignificance> edges;
    /// Largest retained p-value (0 when nothing is retained).
    double threshold_pvalue = 0.0;
    std::size_t n_hypotheses = 0;
    double significance_level = 0.01;

    Graph to_graph(const NodeRegistry& nodes) const {
        std::vector<WeightedEdge> e;
        e.reserve(edges.size());
        for (const auto& p : edges) e.push_back({p.alpha, p.beta, 1.0});
        return Graph(nodes, std::move(e), false);
    }
};

/// Benjamini-Hochberg step-up rule over `n_hypotheses` tests, of which only
/// `pairs` are listed (the rest have p-value 1). Sorts p-values ascending,
/// finds the largest rank i with p_(i) <= i t / n and keeps every pair with
/// p <= p_(i).
inline ValidatedProjection fdr_validate(std::span<const PairSignificance> pairs, std::size_t n_hypotheses,
                                        double t = 0.01) {
    if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("fdr_validate: t must lie in (0,1)");
    if (n_hypotheses < pairs.size()) throw std::invalid_argument("fdr_validate: fewer hypotheses than pairs");
    ValidatedProjection vp;
    vp.n_hypotheses = n_hypotheses;
    vp.significance_level = t;
    if (pairs.empty()) return vp;

    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (pairs[x].p_value != pairs[y].p_value) return pairs[x].p_value < pairs[y].p_value;
        if (pairs[x].v_observed != pairs[y].v_observed) return pairs[x].v_observed > pairs[y].v_observed;
        return x < y;
    });
    const double n = static_cast<double>(n_hypotheses);
    std::size_t cut = 0;  // number of ranks retained
    for (std::size_t r = order.size(); r >= 1; --r) {
        if (pairs[order[r - 1]].p_value <= static_cast<double>(r) * t / n) {
            cut = r;
            break;
        }
    }
    if (cut == 0) return vp;
    vp.threshold_pvalue = pairs[order[cut - 1]].p_value;
    for (const auto& p : pairs)
        if (p.p_value <= vp.threshold_pvalue) vp.edges.push_back(p);
    return vp;
}

/// Convenience form treating `pairs` as the complete hypothesis list.
inline ValidatedProjection fdr_validate(std::span<const PairSignificance> pairs, double t = 0.01) {
    return fdr_validate(pairs, pairs.size(), t);
}

inline std::size_t pair_count(std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; }

/// Full validation of `g` projected on `layer` with a fitted solution.
inline ValidatedProjection validated_projection(const BipartiteGraph& g, const BicmSolution& sol, Layer layer,
                                                double t = 0.01) {
    const auto pairs = pair_pvalues(g, sol, layer);
    return fdr_validate(pairs, pair_count(g.size(layer)), t);
}

inline void write_validated(const ValidatedProjection& vp, const NodeRegistry& nodes, const std::string& edges_path,
                            const std::string& summary_path) {
    std::ofstream out(edges_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + edges_path);
    csv::write_row(out, {"alpha", "beta", "v_observed", "p_value"});
    for (const auto& e : vp.edges)
        csv::write_row(out,
                       {nodes.id(e.alpha), nodes.id(e.beta), std::to_string(e.v_observed), csv::format_double(e.p_value)});
    nlohmann::ordered_json j;
    j["n_hypotheses"] = vp.n_hypotheses;
    j["t"] = vp.significance_level;
    j["threshold_pvalue"] = vp.threshold_pvalue;
    j["n_validated"] = vp.edges.size();
    std::ofstream s(summary_path, std::ios::binary);
    if (!s) throw std::runtime_error("cannot write " + summary_path);
    s << j.dump(2) << '\n';
}

/// Validated projection over `nodes` from an edge list written by write_validated.
inline Graph read_validated_graph(const std::string& edges_path, const NodeRegistry& nodes) {
    const auto t = csv::read_file(edges_path);
    const auto ca = t.column("alpha"), cb = t.column("beta");
    std::vector<WeightedEdge> e;
    for (const auto& row : t.rows) {
        const auto a = nodes.find(row[ca]), b = nodes.find(row[cb]);
        if (!a || !b) throw std::runtime_error(edges_path + ": unknown node in validated edge");
        e.push_back({*a, *b, 1.0});
    }
    return Graph(nodes, std::move(e), false);
}

}  // namespace vnet
