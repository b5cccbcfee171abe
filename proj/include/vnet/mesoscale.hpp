#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vnet/bigraph.hpp"
#include "vnet/community.hpp"

namespace vnet {

struct KCoreDecomposition {
    std::vector<std::size_t> coreness;
    /// shells[c] = nodes with coreness exactly c.
    std::vector<std::vector<index_t>> shells;

    std::size_t max_coreness() const { return shells.empty() ? 0 : shells.size() - 1; }
    const std::vector<index_t>& innermost_shell() const {
        static const std::vector<index_t> none;
        return shells.empty() ? none : shells.back();
    }
};

/// Coreness of every node by bucket-sorted peeling (Batagelj-Zaversnik).
/// Edge weights are ignored.
inline KCoreDecomposition k_core_decompose(const Graph& g) {
    const std::size_t n = g.n();
    KCoreDecomposition dec;
    if (n == 0) return dec;
    std::vector<std::size_t> deg(n), pos(n), vert(n);
    std::size_t max_deg = 0;
    for (index_t v = 0; v < n; ++v) {
        deg[v] = g.degree(v);
        max_deg = std::max(max_deg, deg[v]);
    }
    std::vector<std::size_t> bin(max_deg + 2, 0);
    for (auto d : deg) ++bin[d];
    std::size_t start = 0;
    for (std::size_t d = 0; d <= max_deg; ++d) {
        const std::size_t num = bin[d];
        bin[d] = start;
        start += num;
    }
    for (index_t v = 0; v < n; ++v) {
        pos[v] = bin[deg[v]]++;
        vert[pos[v]] = v;
    }
    for (std::size_t d = max_deg; d >= 1; --d) bin[d] = bin[d - 1];
    bin[0] = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const index_t v = static_cast<index_t>(vert[i]);
        for (const auto& nb : g.neighbors(v)) {
            const index_t u = nb.node;
            if (deg[u] > deg[v]) {
                const std::size_t du = deg[u], pu = pos[u], pw = bin[du];
                const index_t w = static_cast<index_t>(vert[pw]);
                if (u != w) {
                    pos[u] = pw;
                    vert[pu] = w;
                    pos[w] = pu;
                    vert[pw] = u;
                }
                ++bin[du];
                --deg[u];
            }
        }
    }
    dec.coreness = deg;
    const std::size_t kmax = *std::max_element(deg.begin(), deg.end());
    dec.shells.resize(kmax + 1);
    for (index_t v = 0; v < n; ++v) dec.shells[deg[v]].push_back(v);
    return dec;
}

/// Visualisation tiers 0 (outermost) .. 4 (innermost). Quartile cut points
/// q1, q2, q3 of the node coreness multiset are taken by nearest rank;
/// nodes of the maximum shell form tier 4, the others fall in tier 0..3 by
/// coreness <= q1, <= q2, <= q3, above q3.
inline std::vector<int> quantile_tiers(const KCoreDecomposition& dec) {
    if (dec.coreness.empty()) throw std::invalid_argument("quantile_tiers: empty decomposition");
    std::vector<std::size_t> sorted = dec.coreness;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    auto nearest_rank = [&](double q) {
        const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
        return sorted[std::clamp<std::size_t>(rank, 1, n) - 1];
    };
    const std::size_t q1 = nearest_rank(0.25), q2 = nearest_rank(0.5), q3 = nearest_rank(0.75);
    const std::size_t kmax = sorted.back();
    std::vector<int> tier(n);
    for (std::size_t v = 0; v < n; ++v) {
        const std::size_t c = dec.coreness[v];
        if (c == kmax)
            tier[v] = 4;
        else if (c <= q1)
            tier[v] = 0;
        else if (c <= q2)
            tier[v] = 1;
        else if (c <= q3)
            tier[v] = 2;
        else
            tier[v] = 3;
    }
    return tier;
}

// ---------------------------------------------------------------------------
// Surprise core-periphery bisection

namespace detail {

inline double log_choose(double n, double k) {
    return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace detail

/// ln P(X >= observed) for X ~ Hypergeometric(population, successes, draws).
inline double log_hypergeometric_tail(std::uint64_t population, std::uint64_t successes, std::uint64_t draws,
                                      std::uint64_t observed) {
    if (successes > population || draws > population)
        throw std::domain_error("log_hypergeometric_tail: inconsistent parameters");
    const std::uint64_t lo = draws > population - successes ? draws - (population - successes) : 0;
    const std::uint64_t hi = std::min(successes, draws);
    if (observed <= lo) return 0.0;
    if (observed > hi) return -std::numeric_limits<double>::infinity();
    const double N = static_cast<double>(population), K = static_cast<double>(successes),
                 n = static_cast<double>(draws);
    const double norm = detail::log_choose(N, n);
    double peak = -std::numeric_limits<double>::infinity();
    double acc = 0.0;  // sum of exp(term - peak)
    double prev = -std::numeric_limits<double>::infinity();
    for (std::uint64_t x = observed; x <= hi; ++x) {
        const double xd = static_cast<double>(x);
        const double term = detail::log_choose(K, xd) + detail::log_choose(N - K, n - xd) - norm;
        if (term > peak) {
            acc = acc * std::exp(peak - term) + 1.0;
            peak = term;
        } else {
            acc += std::exp(term - peak);
        }
        if (term < prev && term < peak - 40.0) break;
        prev = term;
    }
    return std::min(0.0, peak + std::log(acc));
}

struct CorePeripherySplit {
    std::vector<bool> in_core;
    std::vector<index_t> core;
    std::vector<index_t> periphery;
    /// ln P(intra-core edges >= observed) under random edge placement; lower is better.
    double surprise = 0.0;
};

/// Surprise of a given binary split of `g`.
inline double split_surprise(const Graph& g, const std::vector<bool>& in_core) {
    const std::uint64_t n = g.n();
    std::uint64_t n_core = 0, intra = 0;
    for (index_t v = 0; v < n; ++v) {
        if (!in_core[v]) continue;
        ++n_core;
        for (const auto& nb : g.neighbors(v))
            if (in_core[nb.node] && v < nb.node) ++intra;
    }
    return log_hypergeometric_tail(n * (n - 1) / 2, n_core * (n_core - 1) / 2, g.n_edges(), intra);
}

struct CorePeripheryOptions {
    std::size_t restarts = 20;
    std::uint64_t seed = 0;
    std::size_t max_passes = 200;
};

namespace detail {

inline CorePeripherySplit make_split(std::vector<bool> in_core, double surprise) {
    CorePeripherySplit s;
    for (index_t v = 0; v < in_core.size(); ++v) (in_core[v] ? s.core : s.periphery).push_back(v);
    s.in_core = std::move(in_core);
    s.surprise = surprise;
    return s;
}

/// Greedy single-node flips from `in_core` until no flip lowers the surprise.
inline double greedy_surprise(const Graph& g, std::vector<bool>& in_core, Rng& rng, std::size_t max_passes) {
    const std::uint64_t n = g.n();
    const std::uint64_t pairs = n * (n - 1) / 2, edges = g.n_edges();
    std::vector<std::uint64_t> core_nbrs(n, 0);
    std::uint64_t n_core = 0, intra = 0;
    for (index_t v = 0; v < n; ++v) {
        for (const auto& nb : g.neighbors(v)) core_nbrs[v] += in_core[nb.node];
        if (in_core[v]) {
            ++n_core;
            intra += core_nbrs[v];
        }
    }
    intra /= 2;
    auto score = [&](std::uint64_t nc, std::uint64_t lc) {
        return log_hypergeometric_tail(pairs, nc * (nc - 1) / 2, edges, lc);
    };
    double current = score(n_core, intra);
    std::vector<index_t> order(n);
    std::iota(order.begin(), order.end(), index_t{0});
    for (std::size_t pass = 0; pass < max_passes; ++pass) {
        shuffle(order, rng);
        bool improved = false;
        for (index_t v : order) {
            const bool out = in_core[v];
            if (out && n_core == 1) continue;
            const std::uint64_t nc = out ? n_core - 1 : n_core + 1;
            const std::uint64_t lc = out ? intra - core_nbrs[v] : intra + core_nbrs[v];
            const double s = score(nc, lc);
            if (s < current - 1e-9 * std::max(1.0, std::abs(current))) {
                in_core[v] = !out;
                n_core = nc;
                intra = lc;
                current = s;
                for (const auto& nb : g.neighbors(v)) {
                    if (out)
                        --core_nbrs[nb.node];
                    else
                        ++core_nbrs[nb.node];
                }
                improved = true;
            }
        }
        if (!improved) break;
    }
    return current;
}

}  // namespace detail

/// Core/periphery bisection minimising the binary surprise. Greedy flips are
/// run from the maximum k-shell, from the all-core split, and from random
/// splits (`restarts` starts in total); the lowest score wins. When no split
/// beats the all-core score of 0, everything is core.
inline CorePeripherySplit core_periphery(const Graph& g, const CorePeripheryOptions& opt = {}) {
    const std::size_t n = g.n();
    if (g.n_edges() == 0) throw std::domain_error("core_periphery: graph has no edges");
    const auto dec = k_core_decompose(g);
    std::vector<std::vector<bool>> starts;
    {
        std::vector<bool> shell(n, false);
        for (index_t v : dec.innermost_shell()) shell[v] = true;
        starts.push_back(std::move(shell));
        starts.emplace_back(n, true);
    }
    const std::size_t restarts = std::max<std::size_t>(opt.restarts, starts.size());
    std::vector<std::vector<bool>> splits(restarts);
    std::vector<double> scores(restarts);
    parallel_for(restarts, [&](std::size_t r) {
        Rng rng(derive_seed(opt.seed, r));
        std::vector<bool> in_core;
        if (r < starts.size()) {
            in_core = starts[r];
        } else {
            const double frac = 0.05 + 0.9 * uniform01(rng);
            in_core.assign(n, false);
            for (std::size_t v = 0; v < n; ++v) in_core[v] = bernoulli(rng, frac);
            if (std::none_of(in_core.begin(), in_core.end(), [](bool b) { return b; }))
                in_core[uniform_index(rng, n)] = true;
        }
        scores[r] = detail::greedy_surprise(g, in_core, rng, opt.max_passes);
        splits[r] = std::move(in_core);
    });
    const auto best = static_cast<std::size_t>(std::min_element(scores.begin(), scores.end()) - scores.begin());
    if (!(scores[best] < -1e-12)) return detail::make_split(std::vector<bool>(n, true), 0.0);
    return detail::make_split(std::move(splits[best]), scores[best]);
}

/// |core ∩ innermost shell| / |core ∪ innermost shell|.
inline double core_shell_jaccard(const CorePeripherySplit& split, const KCoreDecomposition& dec) {
    if (split.in_core.size() != dec.coreness.size())
        throw std::invalid_argument("core_shell_jaccard: node universes differ");
    std::vector<bool> shell(dec.coreness.size(), false);
    for (index_t v : dec.innermost_shell()) shell[v] = true;
    std::size_t inter = 0, uni = 0;
    for (std::size_t v = 0; v < shell.size(); ++v) {
        inter += split.in_core[v] && shell[v];
        uni += split.in_core[v] || shell[v];
    }
    if (uni == 0) throw std::domain_error("core_shell_jaccard: both sets empty");
    return static_cast<double>(inter) / static_cast<double>(uni);
}

struct ShellCommunities {
    /// Innermost-shell nodes (indices into the full graph).
    std::vector<index_t> nodes;
    /// Sub-community of each entry of `nodes`.
    std::vector<Label> labels;
    /// Shell nodes linked to at least two sub-communities, with at least as
    /// many links outside their own sub-community as inside it.
    std::vector<index_t> bridges;
    double modularity = 0.0;
    std::size_t n_communities = 0;
};

/// Louvain on the subgraph induced by the innermost k-shell.
inline ShellCommunities innermost_subcommunities(const Graph& g, const KCoreDecomposition& dec,
                                                 const LouvainOptions& opt = {}) {
    const auto& shell = dec.innermost_shell();
    if (shell.empty()) throw std::domain_error("innermost_subcommunities: empty shell");
    ShellCommunities out;
    out.nodes = shell;
    const Graph sub = g.induced_subgraph(shell);
    if (sub.n_edges() == 0) {
        out.labels.assign(shell.size(), 0);
        out.n_communities = 1;
        return out;
    }
    auto res = louvain(sub, opt);
    out.labels = std::move(res.labels);
    out.modularity = res.modularity;
    out.n_communities = community_count(out.labels);
    std::vector<Label> seen;
    for (index_t v = 0; v < sub.n(); ++v) {
        seen.clear();
        std::size_t inside = 0, outside = 0;
        for (const auto& nb : sub.neighbors(v)) {
            const Label c = out.labels[nb.node];
            if (std::find(seen.begin(), seen.end(), c) == seen.end()) seen.push_back(c);
            (c == out.labels[v] ? inside : outside) += 1;
        }
        if (seen.size() >= 2 && outside >= inside) out.bridges.push_back(shell[v]);
    }
    return out;
}

/// Per-node mesoscale table `node_id,coreness,tier,in_core,subcommunity`
/// and summary `{jaccard, surprise, shell_sizes}`.
inline void write_mesoscale(const Graph& g, const KCoreDecomposition& dec, std::span<const int> tiers,
                            const CorePeripherySplit& split, const ShellCommunities& sub, double jaccard,
                            const std::string& csv_path, const std::string& summary_path) {
    std::vector<std::optional<Label>> subc(g.n());
    for (std::size_t k = 0; k < sub.nodes.size(); ++k) subc[sub.nodes[k]] = sub.labels[k];
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + csv_path);
    csv::write_row(out, {"node_id", "coreness", "tier", "in_core", "subcommunity"});
    for (index_t v = 0; v < g.n(); ++v)
        csv::write_row(out, {g.registry().id(v), std::to_string(dec.coreness[v]), std::to_string(tiers[v]),
                             split.in_core[v] ? "1" : "0", subc[v] ? std::to_string(*subc[v]) : std::string()});
    std::vector<std::size_t> shell_sizes;
    for (const auto& s : dec.shells) shell_sizes.push_back(s.size());
    std::vector<std::string> bridges;
    for (index_t b : sub.bridges) bridges.push_back(g.registry().id(b));
    nlohmann::ordered_json j;
    j["jaccard"] = jaccard;
    j["surprise"] = split.surprise;
    j["shell_sizes"] = shell_sizes;
    j["n_subcommunities"] = sub.n_communities;
    j["bridges"] = bridges;
    std::ofstream s(summary_path, std::ios::binary);
    if (!s) throw std::runtime_error("cannot write " + summary_path);
    s << j.dump(2) << '\n';
}

}  // namespace vnet
