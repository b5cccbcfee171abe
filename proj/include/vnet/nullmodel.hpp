#pragma once

// Bipartite Configuration Model (BiCM): the maximum-entropy ensemble of
// bipartite graphs whose expected degrees equal the observed ones. Links are
// independent, with p_ia = x_i y_a / (1 + x_i y_a).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vnet/bigraph.hpp"

namespace vnet {

struct SolverConfig {
    /// Target on the maximum absolute degree residual.
    double tolerance = 1e-8;
    std::size_t max_iterations = 10000;
    /// Solve one unknown per distinct degree value instead of one per node.
    bool reduce_degree_classes = true;
};

/// How a node's links were resolved. Nodes whose degree equals the size of
/// the opposite layer have every link forced to 1 (`full`); nodes left with
/// no degree once forced links are accounted for have every remaining link
/// forced to 0 (`empty`). All other nodes are `free`.
enum class NodeState : std::uint8_t { free, full, empty };

class BicmSolution {
public:
    /// Multipliers x_i (top) and y_a (bottom). Full nodes carry +inf, empty nodes 0.
    std::vector<double> x, y;
    std::vector<NodeState> top_state, bottom_state;
    /// Order in which pinned nodes were removed; free nodes carry `kFree`.
    std::vector<std::uint32_t> top_epoch, bottom_epoch;
    double residual = 0.0;
    std::size_t iterations = 0;

    static constexpr std::uint32_t kFree = std::numeric_limits<std::uint32_t>::max();

    std::size_t n_top() const noexcept { return x.size(); }
    std::size_t n_bottom() const noexcept { return y.size(); }

    double probability(index_t i, index_t a) const {
        const auto ei = top_epoch[i], ea = bottom_epoch[a];
        if (ei != kFree || ea != kFree) {
            const NodeState s = ei < ea ? top_state[i] : bottom_state[a];
            return s == NodeState::full ? 1.0 : 0.0;
        }
        const double xy = x[i] * y[a];
        return xy / (1.0 + xy);
    }

    /// Expected degree of node `i` of layer `l`.
    double expected_degree(Layer l, index_t i) const {
        CompensatedSum s;
        if (l == Layer::top)
            for (index_t a = 0; a < n_bottom(); ++a) s.add(probability(i, a));
        else
            for (index_t t = 0; t < n_top(); ++t) s.add(probability(t, i));
        return s.value();
    }

    /// Same ensemble with the two layers swapped.
    BicmSolution transposed() const {
        BicmSolution t;
        t.x = y;
        t.y = x;
        t.top_state = bottom_state;
        t.bottom_state = top_state;
        t.top_epoch = bottom_epoch;
        t.bottom_epoch = top_epoch;
        t.residual = residual;
        t.iterations = iterations;
        return t;
    }
};

inline double link_probability(const BicmSolution& sol, index_t i, index_t a) { return sol.probability(i, a); }

namespace detail {

/// Groups node indices by target value (ascending value).
struct DegreeClasses {
    std::vector<double> value;
    std::vector<double> multiplicity;
    std::vector<std::size_t> class_of;  // per member, into value/multiplicity
    std::vector<index_t> members;
};

inline DegreeClasses make_classes(const std::vector<index_t>& members, const std::vector<std::size_t>& target,
                                  bool reduce) {
    DegreeClasses c;
    c.members = members;
    c.class_of.resize(members.size());
    if (!reduce) {
        for (std::size_t m = 0; m < members.size(); ++m) {
            c.value.push_back(static_cast<double>(target[members[m]]));
            c.multiplicity.push_back(1.0);
            c.class_of[m] = m;
        }
        return c;
    }
    std::map<std::size_t, std::size_t> index;
    for (index_t v : members) index.emplace(target[v], 0);
    for (auto& [deg, idx] : index) {
        idx = c.value.size();
        c.value.push_back(static_cast<double>(deg));
        c.multiplicity.push_back(0.0);
    }
    for (std::size_t m = 0; m < members.size(); ++m) {
        const auto k = index.at(target[members[m]]);
        c.class_of[m] = k;
        c.multiplicity[k] += 1.0;
    }
    return c;
}

/// Largest absolute violation of the reduced degree equations.
inline double class_residual(const DegreeClasses& top, const DegreeClasses& bot, const std::vector<double>& x,
                             const std::vector<double>& y) {
    double worst = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
        double s = 0.0;
        for (std::size_t d = 0; d < y.size(); ++d) s += bot.multiplicity[d] * x[c] * y[d] / (1.0 + x[c] * y[d]);
        worst = std::max(worst, std::abs(top.value[c] - s));
    }
    for (std::size_t d = 0; d < y.size(); ++d) {
        double s = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) s += top.multiplicity[c] * x[c] * y[d] / (1.0 + x[c] * y[d]);
        worst = std::max(worst, std::abs(bot.value[d] - s));
    }
    return worst;
}

}  // namespace detail

namespace detail {

/// Pins nodes whose links are forced, one at a time, until every remaining
/// node is interior. Fills states, epochs and infinite/zero multipliers of
/// `sol`; returns the residual degrees left for the free nodes.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> peel_forced(const DegreeSequence& d,
                                                                                 BicmSolution& sol) {
    const std::size_t nt = d.top.size(), nb = d.bottom.size();
    sol.x.assign(nt, 0.0);
    sol.y.assign(nb, 0.0);
    sol.top_state.assign(nt, NodeState::free);
    sol.bottom_state.assign(nb, NodeState::free);
    sol.top_epoch.assign(nt, BicmSolution::kFree);
    sol.bottom_epoch.assign(nb, BicmSolution::kFree);
    std::vector<std::size_t> kr = d.top, hr = d.bottom;
    std::size_t active_top = nt, active_bottom = nb;
    std::uint32_t epoch = 0;
    for (bool changed = true; changed;) {
        changed = false;
        for (index_t i = 0; i < nt; ++i) {
            if (sol.top_epoch[i] != BicmSolution::kFree) continue;
            if (kr[i] != 0 && kr[i] != active_bottom) continue;
            const bool full = kr[i] != 0;
            sol.top_state[i] = full ? NodeState::full : NodeState::empty;
            sol.top_epoch[i] = epoch++;
            sol.x[i] = full ? std::numeric_limits<double>::infinity() : 0.0;
            if (full)
                for (index_t a = 0; a < nb; ++a)
                    if (sol.bottom_epoch[a] == BicmSolution::kFree) --hr[a];
            --active_top;
            changed = true;
        }
        for (index_t a = 0; a < nb; ++a) {
            if (sol.bottom_epoch[a] != BicmSolution::kFree) continue;
            if (hr[a] != 0 && hr[a] != active_top) continue;
            const bool full = hr[a] != 0;
            sol.bottom_state[a] = full ? NodeState::full : NodeState::empty;
            sol.bottom_epoch[a] = epoch++;
            sol.y[a] = full ? std::numeric_limits<double>::infinity() : 0.0;
            if (full)
                for (index_t i = 0; i < nt; ++i)
                    if (sol.top_epoch[i] == BicmSolution::kFree) --kr[i];
            --active_bottom;
            changed = true;
        }
    }
    return {std::move(kr), std::move(hr)};
}

}  // namespace detail

/// Solves the BiCM degree equations
///   k_i = sum_a x_i y_a / (1 + x_i y_a),   h_a = sum_i x_i y_a / (1 + x_i y_a)
/// by alternating fixed-point iteration over distinct-degree classes. Nodes
/// whose links are forced (full rows/columns) are pinned first.
inline BicmSolution fit_bicm(const DegreeSequence& d, const SolverConfig& cfg = {}) {
    if (!(cfg.tolerance > 0.0)) throw std::invalid_argument("fit_bicm: tolerance must be positive");
    const std::size_t nt = d.top.size(), nb = d.bottom.size();
    if (nt == 0 || nb == 0) throw std::domain_error("fit_bicm: empty degree sequence");
    for (auto k : d.top)
        if (k == 0 || k > nb) throw std::domain_error("fit_bicm: top degree out of range");
    for (auto h : d.bottom)
        if (h == 0 || h > nt) throw std::domain_error("fit_bicm: bottom degree out of range");
    if (d.edge_count() != std::accumulate(d.bottom.begin(), d.bottom.end(), std::size_t{0}))
        throw std::domain_error("fit_bicm: layer degree sums differ");

    BicmSolution sol;
    auto peeled = detail::peel_forced(d, sol);
    const auto& kr = peeled.first;
    const auto& hr = peeled.second;

    std::vector<index_t> free_top, free_bottom;
    for (index_t i = 0; i < nt; ++i)
        if (sol.top_epoch[i] == BicmSolution::kFree) free_top.push_back(i);
    for (index_t a = 0; a < nb; ++a)
        if (sol.bottom_epoch[a] == BicmSolution::kFree) free_bottom.push_back(a);

    if (!free_top.empty()) {
        const auto tc = detail::make_classes(free_top, kr, cfg.reduce_degree_classes);
        const auto bc = detail::make_classes(free_bottom, hr, cfg.reduce_degree_classes);
        double links = 0.0;
        for (auto i : free_top) links += static_cast<double>(kr[i]);
        const double scale = std::sqrt(links);
        std::vector<double> x(tc.value.size()), y(bc.value.size());
        for (std::size_t c = 0; c < x.size(); ++c) x[c] = tc.value[c] / scale;
        for (std::size_t c = 0; c < y.size(); ++c) y[c] = bc.value[c] / scale;

        double res = detail::class_residual(tc, bc, x, y);
        std::size_t it = 0;
        while (res > cfg.tolerance && it < cfg.max_iterations) {
            for (std::size_t c = 0; c < x.size(); ++c) {
                double s = 0.0;
                for (std::size_t e = 0; e < y.size(); ++e) s += bc.multiplicity[e] * y[e] / (1.0 + x[c] * y[e]);
                x[c] = tc.value[c] / s;
            }
            for (std::size_t e = 0; e < y.size(); ++e) {
                double s = 0.0;
                for (std::size_t c = 0; c < x.size(); ++c) s += tc.multiplicity[c] * x[c] / (1.0 + x[c] * y[e]);
                y[e] = bc.value[e] / s;
            }
            ++it;
            res = detail::class_residual(tc, bc, x, y);
        }
        sol.iterations = it;
        for (std::size_t m = 0; m < free_top.size(); ++m) sol.x[free_top[m]] = x[tc.class_of[m]];
        for (std::size_t m = 0; m < free_bottom.size(); ++m) sol.y[free_bottom[m]] = y[bc.class_of[m]];
        if (!(res <= cfg.tolerance)) {
            throw ConvergenceError("fit_bicm: no convergence, residual " + std::to_string(res), res, it);
        }
    }

    // Residual over the original constraints. Free nodes of one degree class
    // share their multiplier and therefore their expected degree.
    double worst = 0.0;
    auto check_layer = [&](Layer l, const std::vector<std::size_t>& target, const std::vector<std::size_t>& reduced,
                           const std::vector<std::uint32_t>& epochs) {
        std::map<std::size_t, double> by_class;
        for (index_t v = 0; v < target.size(); ++v) {
            double e;
            if (epochs[v] == BicmSolution::kFree && cfg.reduce_degree_classes) {
                auto [it, fresh] = by_class.try_emplace(reduced[v], 0.0);
                if (fresh) it->second = sol.expected_degree(l, v);
                e = it->second;
            } else {
                e = sol.expected_degree(l, v);
            }
            worst = std::max(worst, std::abs(static_cast<double>(target[v]) - e));
        }
    };
    check_layer(Layer::top, d.top, kr, sol.top_epoch);
    check_layer(Layer::bottom, d.bottom, hr, sol.bottom_epoch);
    sol.residual = worst;
    if (!(worst <= cfg.tolerance))
        throw ConvergenceError("fit_bicm: residual " + std::to_string(worst) + " above tolerance", worst,
                               sol.iterations);
    return sol;
}

/// Draws one graph from the ensemble: every link is an independent Bernoulli trial.
inline BipartiteGraph sample_graph(const BicmSolution& sol, Rng& rng, const NodeRegistry& top,
                                   const NodeRegistry& bottom) {
    if (top.size() != sol.n_top() || bottom.size() != sol.n_bottom())
        throw std::domain_error("sample_graph: registry size mismatch");
    std::vector<BipartiteEdge> edges;
    for (index_t i = 0; i < sol.n_top(); ++i)
        for (index_t a = 0; a < sol.n_bottom(); ++a)
            if (bernoulli(rng, sol.probability(i, a))) edges.emplace_back(i, a);
    return BipartiteGraph(top, bottom, std::move(edges));
}

inline BipartiteGraph sample_graph(const BicmSolution& sol, Rng& rng) {
    return sample_graph(sol, rng, NodeRegistry::numbered(sol.n_top()), NodeRegistry::numbered(sol.n_bottom()));
}

inline BipartiteGraph sample_graph(const BicmSolution& sol, std::uint64_t seed) {
    Rng rng(seed);
    return sample_graph(sol, rng);
}

// ---------------------------------------------------------------------------
// Export: node_id,multiplier per layer plus a JSON summary.

inline void write_solution(const BicmSolution& sol, const BipartiteGraph& g, const std::string& top_path,
                           const std::string& bottom_path, const std::string& summary_path) {
    auto dump = [](const std::string& path, const NodeRegistry& reg, const std::vector<double>& m) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + path);
        csv::write_row(out, {"node_id", "multiplier"});
        for (index_t i = 0; i < m.size(); ++i) csv::write_row(out, {reg.id(i), csv::format_double(m[i])});
    };
    dump(top_path, g.registry(Layer::top), sol.x);
    dump(bottom_path, g.registry(Layer::bottom), sol.y);
    nlohmann::ordered_json j;
    j["residual"] = sol.residual;
    j["iterations"] = sol.iterations;
    j["L"] = g.n_edges();
    j["N_top"] = g.n_top();
    j["N_bottom"] = g.n_bottom();
    std::ofstream out(summary_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + summary_path);
    out << j.dump(2) << '\n';
}

/// Reads a solution written by write_solution for graph `g`. Pinned nodes are
/// recovered from the degree sequence; their stored multipliers must agree.
inline BicmSolution read_solution(const BipartiteGraph& g, const std::string& top_path, const std::string& bottom_path,
                                  const std::string& summary_path) {
    BicmSolution sol;
    detail::peel_forced(degrees(g), sol);
    auto load = [](const std::string& path, const NodeRegistry& reg, std::vector<double>& m,
                   const std::vector<std::uint32_t>& epochs) {
        const auto t = csv::read_file(path);
        const auto ci = t.column("node_id"), cm = t.column("multiplier");
        if (t.rows.size() != reg.size()) throw std::runtime_error(path + ": node count differs from graph");
        for (const auto& row : t.rows) {
            const auto idx = reg.find(row[ci]);
            if (!idx) throw std::runtime_error(path + ": unknown node " + row[ci]);
            const double v = csv::parse_double(row[cm]);
            if (epochs[*idx] == BicmSolution::kFree)
                m[*idx] = v;
            else if (v != m[*idx])
                throw std::runtime_error(path + ": pinned node " + row[ci] + " has inconsistent multiplier");
        }
    };
    load(top_path, g.registry(Layer::top), sol.x, sol.top_epoch);
    load(bottom_path, g.registry(Layer::bottom), sol.y, sol.bottom_epoch);
    std::ifstream in(summary_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + summary_path);
    const auto j = nlohmann::json::parse(in);
    sol.residual = j.at("residual").get<double>();
    sol.iterations = j.at("iterations").get<std::size_t>();
    return sol;
}

}  // namespace vnet
