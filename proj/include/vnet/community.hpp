#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "vnet/bigraph.hpp"

namespace vnet {

/// Community id; `kUnlabeled` marks nodes without a community.
using Label = std::int32_t;
inline constexpr Label kUnlabeled = -1;

/// Q = (1/2L) sum_ij [a_ij - k_i k_j / 2L] delta(c_i, c_j), with edge
/// weights as a_ij and strengths as k_i.
inline double modularity(const Graph& g, std::span<const Label> labels) {
    if (labels.size() != g.n()) throw std::invalid_argument("modularity: one label per node required");
    const double two_m = 2.0 * g.total_weight();
    if (g.n_edges() == 0 || two_m <= 0.0) throw std::domain_error("modularity: graph has no edges");
    std::unordered_map<Label, double> internal, total;
    for (index_t i = 0; i < g.n(); ++i) {
        const Label c = labels[i];
        for (const auto& nb : g.neighbors(i))
            if (labels[nb.node] == c) internal[c] += nb.weight;
        total[c] += g.strength(i);
    }
    // Summed in label order.
    std::map<Label, std::pair<double, double>> ordered;
    for (const auto& [c, t] : total) ordered[c] = {internal[c], t};
    double q = 0.0;
    for (const auto& [c, it] : ordered) q += it.first / two_m - (it.second / two_m) * (it.second / two_m);
    return q;
}

/// Relabels communities 0..K-1 by decreasing size (ties: smallest member first).
/// Unlabeled entries stay unlabeled.
inline std::vector<Label> canonicalize_labels(std::span<const Label> labels) {
    std::map<Label, std::pair<std::size_t, std::size_t>> info;  // label -> (size, first index)
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kUnlabeled) continue;
        auto [it, fresh] = info.try_emplace(labels[i], 0, i);
        ++it->second.first;
    }
    std::vector<std::pair<Label, std::pair<std::size_t, std::size_t>>> order(info.begin(), info.end());
    std::sort(order.begin(), order.end(), [](const auto& x, const auto& y) {
        if (x.second.first != y.second.first) return x.second.first > y.second.first;
        return x.second.second < y.second.second;
    });
    std::unordered_map<Label, Label> remap;
    for (std::size_t k = 0; k < order.size(); ++k) remap[order[k].first] = static_cast<Label>(k);
    std::vector<Label> out(labels.size(), kUnlabeled);
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] != kUnlabeled) out[i] = remap.at(labels[i]);
    return out;
}

inline std::size_t community_count(std::span<const Label> labels) {
    Label hi = kUnlabeled;
    for (Label l : labels) hi = std::max(hi, l);
    return static_cast<std::size_t>(hi + 1);
}

// ---------------------------------------------------------------------------
// Louvain

struct LouvainOptions {
    std::size_t runs = 1000;
    std::uint64_t seed = 0;
};

struct LouvainResult {
    std::vector<Label> labels;
    double modularity = 0.0;
    /// Modularity reached by every run, in run order.
    std::vector<double> run_modularity;
    std::size_t best_run = 0;
};

namespace detail {

/// Weighted graph in adjacency-list form used inside one Louvain run;
/// self-loop weights of aggregated nodes are kept separately.
struct LevelGraph {
    std::vector<std::vector<std::pair<index_t, double>>> adj;
    std::vector<double> self_loop;  // counts each internal edge twice (both endpoints)
    std::vector<double> strength;
    double two_m = 0.0;
};

inline LevelGraph level_from(const Graph& g) {
    LevelGraph lg;
    lg.adj.resize(g.n());
    lg.self_loop.assign(g.n(), 0.0);
    lg.strength.assign(g.n(), 0.0);
    for (index_t i = 0; i < g.n(); ++i)
        for (const auto& nb : g.neighbors(i)) {
            lg.adj[i].emplace_back(nb.node, nb.weight);
            lg.strength[i] += nb.weight;
        }
    lg.two_m = std::accumulate(lg.strength.begin(), lg.strength.end(), 0.0);
    return lg;
}

/// Local moving phase. Returns true if any node changed community.
inline bool louvain_local_moves(const LevelGraph& lg, std::vector<index_t>& comm, Rng& rng) {
    const std::size_t n = lg.adj.size();
    std::vector<double> tot(n, 0.0);
    for (index_t i = 0; i < n; ++i) tot[comm[i]] += lg.strength[i];
    std::vector<index_t> order(n);
    std::iota(order.begin(), order.end(), index_t{0});
    shuffle(order, rng);

    std::vector<double> link(n, 0.0);
    std::vector<char> mark(n, 0);
    std::vector<index_t> seen;
    bool any = false;
    for (bool moved = true; moved;) {
        moved = false;
        for (index_t i : order) {
            const index_t old = comm[i];
            const double ki = lg.strength[i];
            seen.clear();
            mark[old] = 1;
            seen.push_back(old);
            for (auto [j, w] : lg.adj[i]) {
                const index_t c = comm[j];
                if (!mark[c]) {
                    mark[c] = 1;
                    seen.push_back(c);
                }
                link[c] += w;
            }
            tot[old] -= ki;
            // gain of inserting i into c, up to a common factor: link_c - tot_c k_i / 2m
            index_t best = old;
            double best_gain = link[old] - tot[old] * ki / lg.two_m;
            for (index_t c : seen) {
                const double gain = link[c] - tot[c] * ki / lg.two_m;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best = c;
                }
            }
            tot[best] += ki;
            for (index_t c : seen) {
                link[c] = 0.0;
                mark[c] = 0;
            }
            if (best != old) {
                comm[i] = best;
                moved = true;
                any = true;
            }
        }
    }
    return any;
}

inline LevelGraph aggregate(const LevelGraph& lg, const std::vector<index_t>& comm, std::size_t n_comm) {
    LevelGraph out;
    out.adj.resize(n_comm);
    out.self_loop.assign(n_comm, 0.0);
    out.strength.assign(n_comm, 0.0);
    out.two_m = lg.two_m;
    std::vector<std::map<index_t, double>> acc(n_comm);
    for (index_t i = 0; i < lg.adj.size(); ++i) {
        const index_t ci = comm[i];
        out.self_loop[ci] += lg.self_loop[i];
        out.strength[ci] += lg.strength[i];
        for (auto [j, w] : lg.adj[i]) {
            const index_t cj = comm[j];
            if (ci == cj)
                out.self_loop[ci] += w;
            else
                acc[ci][cj] += w;
        }
    }
    for (index_t c = 0; c < n_comm; ++c)
        for (auto [d, w] : acc[c]) out.adj[c].emplace_back(d, w);
    return out;
}

/// One multi-level Louvain run; returns a community per original node.
inline std::vector<Label> louvain_once(const Graph& g, Rng& rng) {
    LevelGraph lg = level_from(g);
    std::vector<index_t> member(g.n());
    std::iota(member.begin(), member.end(), index_t{0});
    while (true) {
        std::vector<index_t> comm(lg.adj.size());
        std::iota(comm.begin(), comm.end(), index_t{0});
        if (!louvain_local_moves(lg, comm, rng)) break;
        // compact community ids
        std::vector<std::int64_t> remap(comm.size(), -1);
        index_t next = 0;
        for (auto& c : comm) {
            if (remap[c] < 0) remap[c] = next++;
            c = static_cast<index_t>(remap[c]);
        }
        for (auto& m : member) m = comm[m];
        if (next == lg.adj.size()) break;
        lg = aggregate(lg, comm, next);
    }
    return {member.begin(), member.end()};
}

}  // namespace detail

/// Louvain modularity maximisation repeated `runs` times with independently
/// shuffled node orders; the partition with the highest Q wins (ties: the
/// earliest run). Labels are canonicalized by decreasing community size.
inline LouvainResult louvain(const Graph& g, const LouvainOptions& opt = {}) {
    if (g.n_edges() == 0) throw std::domain_error("louvain: graph has no edges");
    const std::size_t runs = std::max<std::size_t>(1, opt.runs);
    std::vector<std::vector<Label>> partitions(runs);
    std::vector<double> q(runs);
    parallel_for(runs, [&](std::size_t r) {
        Rng rng(derive_seed(opt.seed, r));
        partitions[r] = canonicalize_labels(detail::louvain_once(g, rng));
        q[r] = modularity(g, partitions[r]);
    });
    LouvainResult res;
    res.best_run = static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
    res.labels = std::move(partitions[res.best_run]);
    res.modularity = q[res.best_run];
    res.run_modularity = std::move(q);
    return res;
}

// ---------------------------------------------------------------------------
// Polarization of non-seed users

struct PolarizationScore {
    index_t user = 0;
    /// max_c I_{user,c}
    double rho = 0.0;
    Label target_community = kUnlabeled;
};

/// For every unlabeled node with at least one labeled neighbour:
/// I_c = |labeled neighbours in c| / |labeled neighbours|, rho = max_c I_c
/// (ties: smallest community id). Neighbour sets ignore edge weights.
inline std::vector<PolarizationScore> polarization(const Graph& g, std::span<const Label> seed_labels) {
    if (seed_labels.size() != g.n()) throw std::invalid_argument("polarization: one label per node required");
    std::vector<PolarizationScore> out;
    std::map<Label, std::size_t> counts;
    for (index_t u = 0; u < g.n(); ++u) {
        if (seed_labels[u] != kUnlabeled) continue;
        counts.clear();
        std::size_t labeled = 0;
        for (const auto& nb : g.neighbors(u)) {
            const Label c = seed_labels[nb.node];
            if (c == kUnlabeled) continue;
            ++counts[c];
            ++labeled;
        }
        if (labeled == 0) continue;
        Label best = kUnlabeled;
        std::size_t best_count = 0;
        for (const auto& [c, k] : counts)
            if (k > best_count) {
                best = c;
                best_count = k;
            }
        out.push_back({u, static_cast<double>(best_count) / static_cast<double>(labeled), best});
    }
    return out;
}

/// Labels users whose polarization is at least `threshold` (inclusive).
inline std::vector<Label> assign_polarized(std::span<const PolarizationScore> scores, std::size_t n_nodes,
                                           double threshold = 0.9) {
    if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("assign_polarized: threshold in (0,1]");
    std::vector<Label> out(n_nodes, kUnlabeled);
    for (const auto& s : scores)
        if (s.rho >= threshold) out.at(s.user) = s.target_community;
    return out;
}

// ---------------------------------------------------------------------------
// Label propagation

enum class Provenance : std::uint8_t { seed, polarized, propagated, unassigned };

constexpr std::string_view to_string(Provenance p) noexcept {
    switch (p) {
        case Provenance::seed: return "seed";
        case Provenance::polarized: return "polarized";
        case Provenance::propagated: return "propagated";
        case Provenance::unassigned: return "unassigned";
    }
    return "unassigned";
}

struct PropagationOptions {
    std::size_t runs = 1000;
    std::uint64_t seed = 0;
    /// Count neighbour votes by edge weight (retweet multiplicity).
    bool weighted = true;
    std::size_t max_sweeps = 100;
    /// Start every seed from its own unique label and map it back to its seed
    /// community before the cross-run vote.
    bool unique_seed_labels = false;
};

struct CommunityAssignment {
    std::vector<Label> labels;
    std::vector<Provenance> provenance;
    std::vector<std::optional<double>> rho;
    double modularity = 0.0;
    std::size_t run_count = 0;
    /// Fraction of runs agreeing with the final label, per node (0 if unassigned).
    std::vector<double> agreement;
};

namespace detail {

/// Majority label among labeled neighbours of `u`. On a tie, a uniformly
/// random incident link is dropped and the vote repeated. Returns
/// kUnlabeled when no labeled neighbour remains.
inline Label majority_label(const Graph& g, index_t u, const std::vector<Label>& cur, bool weighted, Rng& rng,
                            std::vector<std::pair<Label, double>>& votes,
                            std::vector<std::pair<Label, double>>& links) {
    links.clear();
    for (const auto& nb : g.neighbors(u)) {
        const Label c = cur[nb.node];
        if (c != kUnlabeled) links.emplace_back(c, weighted ? nb.weight : 1.0);
    }
    while (!links.empty()) {
        votes.clear();
        for (const auto& [c, w] : links) {
            auto it = std::find_if(votes.begin(), votes.end(), [c = c](const auto& v) { return v.first == c; });
            if (it == votes.end())
                votes.emplace_back(c, w);
            else
                it->second += w;
        }
        Label best = kUnlabeled;
        double best_w = -1.0;
        bool tie = false;
        for (const auto& [c, w] : votes) {
            if (w > best_w) {
                best = c;
                best_w = w;
                tie = false;
            } else if (w == best_w) {
                tie = true;
            }
        }
        if (!tie) return best;
        const auto drop = uniform_index(rng, links.size());
        links[drop] = links.back();
        links.pop_back();
    }
    return kUnlabeled;
}

}  // namespace detail

/// Asynchronous label propagation repeated `runs` times. Nodes flagged in
/// `fixed` never change label. Each run starts from `initial` (kUnlabeled for
/// unknown), updates nodes in a freshly shuffled order per sweep, and stops
/// after a sweep without changes (or `max_sweeps`). The final label of a node
/// is the one it ended with most often across runs (ties: smallest id).
inline CommunityAssignment label_propagation(const Graph& g, const std::vector<bool>& fixed,
                                             std::span<const Label> initial, const PropagationOptions& opt = {}) {
    const std::size_t n = g.n();
    if (fixed.size() != n || initial.size() != n)
        throw std::invalid_argument("label_propagation: per-node inputs must match graph size");
    for (index_t u = 0; u < n; ++u)
        if (fixed[u] && initial[u] == kUnlabeled)
            throw std::invalid_argument("label_propagation: fixed node without label");

    // In unique-seed mode run labels are seed indices, mapped back afterwards.
    std::vector<Label> start(initial.begin(), initial.end());
    std::vector<Label> back;  // run label -> community
    std::size_t n_labels = community_count(initial);
    if (opt.unique_seed_labels) {
        for (index_t u = 0; u < n; ++u) {
            if (fixed[u]) {
                back.push_back(initial[u]);
                start[u] = static_cast<Label>(back.size() - 1);
            } else {
                start[u] = kUnlabeled;
            }
        }
    }

    const std::size_t runs = std::max<std::size_t>(1, opt.runs);
    std::vector<std::vector<Label>> finals(runs);
    parallel_for(runs, [&](std::size_t r) {
        Rng rng(derive_seed(opt.seed, r));
        std::vector<Label> cur = start;
        std::vector<index_t> order;
        for (index_t u = 0; u < n; ++u)
            if (!fixed[u]) order.push_back(u);
        std::vector<std::pair<Label, double>> votes, links;
        for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
            shuffle(order, rng);
            bool changed = false;
            for (index_t u : order) {
                const Label next = detail::majority_label(g, u, cur, opt.weighted, rng, votes, links);
                if (next != kUnlabeled && next != cur[u]) {
                    cur[u] = next;
                    changed = true;
                }
            }
            if (!changed) break;
        }
        if (opt.unique_seed_labels)
            for (auto& l : cur)
                if (l != kUnlabeled) l = back[l];
        finals[r] = std::move(cur);
    });

    CommunityAssignment out;
    out.run_count = runs;
    out.labels.assign(n, kUnlabeled);
    out.provenance.assign(n, Provenance::unassigned);
    out.rho.assign(n, std::nullopt);
    out.agreement.assign(n, 0.0);
    std::vector<std::size_t> tally(n_labels);
    for (index_t u = 0; u < n; ++u) {
        if (fixed[u]) {
            out.labels[u] = initial[u];
            out.provenance[u] = Provenance::seed;
            out.agreement[u] = 1.0;
            continue;
        }
        std::fill(tally.begin(), tally.end(), 0);
        for (const auto& f : finals)
            if (f[u] != kUnlabeled) ++tally[f[u]];
        const auto best = std::max_element(tally.begin(), tally.end());
        if (best == tally.end() || *best == 0) continue;
        out.labels[u] = static_cast<Label>(best - tally.begin());
        out.agreement[u] = static_cast<double>(*best) / static_cast<double>(runs);
        out.provenance[u] = (initial[u] != kUnlabeled && initial[u] == out.labels[u]) ? Provenance::polarized
                                                                                        : Provenance::propagated;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Export

inline void write_assignment(const CommunityAssignment& a, const NodeRegistry& nodes, const std::string& csv_path,
                             const std::string& summary_path) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + csv_path);
    csv::write_row(out, {"node_id", "label", "provenance", "rho"});
    for (index_t u = 0; u < a.labels.size(); ++u)
        csv::write_row(out, {nodes.id(u), std::to_string(a.labels[u]), std::string(to_string(a.provenance[u])),
                             a.rho[u] ? csv::format_double(*a.rho[u]) : std::string()});
    std::vector<std::size_t> sizes(community_count(a.labels), 0);
    for (Label l : a.labels)
        if (l != kUnlabeled) ++sizes[l];
    nlohmann::ordered_json j;
    j["n_communities"] = sizes.size();
    j["sizes"] = sizes;
    j["Q"] = a.modularity;
    j["runs"] = a.run_count;
    std::ofstream s(summary_path, std::ios::binary);
    if (!s) throw std::runtime_error("cannot write " + summary_path);
    s << j.dump(2) << '\n';
}

}  // namespace vnet
