#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "vnet/bigraph.hpp"
#include "vnet/community.hpp"
#include "vnet/corpus.hpp"

namespace vnet {

/// Shortest-path betweenness over unordered node pairs, normalised by
/// (N-1)(N-2)/2. Unweighted; disconnected pairs contribute nothing.
inline std::vector<double> betweenness(const Graph& g) {
    const std::size_t n = g.n();
    std::vector<double> bc(n, 0.0);
    if (n < 3) return bc;
    // Sources in fixed blocks of 64; block sums are added in block order.
    constexpr std::size_t block = 64;
    const std::size_t n_blocks = (n + block - 1) / block;
    std::vector<std::vector<double>> partial(n_blocks, std::vector<double>(n, 0.0));
    parallel_for(n_blocks, [&](std::size_t b) {
        auto& acc = partial[b];
        std::vector<std::int64_t> dist(n);
        std::vector<double> sigma(n), delta(n);
        std::vector<index_t> stack, queue;
        stack.reserve(n);
        queue.reserve(n);
        for (std::size_t s = b * block; s < std::min(n, (b + 1) * block); ++s) {
            std::fill(dist.begin(), dist.end(), -1);
            std::fill(sigma.begin(), sigma.end(), 0.0);
            std::fill(delta.begin(), delta.end(), 0.0);
            stack.clear();
            queue.clear();
            dist[s] = 0;
            sigma[s] = 1.0;
            queue.push_back(static_cast<index_t>(s));
            for (std::size_t head = 0; head < queue.size(); ++head) {
                const index_t v = queue[head];
                stack.push_back(v);
                for (const auto& nb : g.neighbors(v)) {
                    const index_t w = nb.node;
                    if (dist[w] < 0) {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                    if (dist[w] == dist[v] + 1) sigma[w] += sigma[v];
                }
            }
            for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
                const index_t w = *it;
                for (const auto& nb : g.neighbors(w)) {
                    const index_t v = nb.node;
                    if (dist[v] == dist[w] - 1) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
                if (w != s) acc[w] += delta[w];
            }
        }
    });
    for (const auto& part : partial)
        for (std::size_t v = 0; v < n; ++v) bc[v] += part[v];
    // each unordered pair was counted from both endpoints
    const double norm = static_cast<double>(n - 1) * static_cast<double>(n - 2) / 2.0;
    for (auto& v : bc) v = v / 2.0 / norm;
    return bc;
}

/// Largest h such that at least h entries are >= h.
inline std::size_t h_index(std::span<const std::size_t> counts) {
    std::vector<std::size_t> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    std::size_t h = 0;
    while (h < sorted.size() && sorted[h] >= h + 1) ++h;
    return h;
}

// ---------------------------------------------------------------------------
// Community structure statistics

/// Denominator of the self-reference indexes mu_r, mu_m.
enum class SelfReference {
    /// Interactions performed by community members.
    authored,
    /// Interactions with at least one endpoint in the community.
    involving,
};

struct CommunityStats {
    Label community = kUnlabeled;
    std::size_t n_users = 0;
    std::size_t n_edges = 0;
    double mean_degree = 0.0;
    std::optional<double> normalized_mean_degree;
    std::optional<double> mean_polarization;
    std::optional<double> self_ref_retweets;
    std::optional<double> self_ref_mentions;
};

/// Statistics of every community on the undirected interaction graph `full`.
/// `labels` and `rho` are indexed by node of `full`; interaction endpoints
/// absent from `full` count as outside every community.
inline std::vector<CommunityStats> community_stats(const Graph& full, std::span<const Label> labels,
                                                   std::span<const std::optional<double>> rho,
                                                   std::span<const Interaction> retweets,
                                                   std::span<const Interaction> mentions,
                                                   SelfReference mode = SelfReference::authored) {
    if (labels.size() != full.n() || rho.size() != full.n())
        throw std::invalid_argument("community_stats: per-node inputs must match graph size");
    const std::size_t k = community_count(labels);
    std::vector<CommunityStats> out(k);
    std::vector<std::size_t> internal_degree(full.n(), 0);
    std::vector<double> rho_sum(k, 0.0);
    std::vector<std::size_t> rho_n(k, 0);
    for (index_t u = 0; u < full.n(); ++u) {
        const Label c = labels[u];
        if (c == kUnlabeled) continue;
        ++out[c].n_users;
        for (const auto& nb : full.neighbors(u))
            if (labels[nb.node] == c) ++internal_degree[u];
        if (rho[u]) {
            rho_sum[c] += *rho[u];
            ++rho_n[c];
        }
    }
    std::vector<std::size_t> kmin(k, SIZE_MAX), kmax(k, 0), deg_sum(k, 0);
    for (index_t u = 0; u < full.n(); ++u) {
        const Label c = labels[u];
        if (c == kUnlabeled) continue;
        deg_sum[c] += internal_degree[u];
        kmin[c] = std::min(kmin[c], internal_degree[u]);
        kmax[c] = std::max(kmax[c], internal_degree[u]);
    }
    auto label_of = [&](const std::string& id) {
        auto idx = full.registry().find(id);
        return idx ? labels[*idx] : kUnlabeled;
    };
    auto self_ref = [&](std::span<const Interaction> xs) {
        std::vector<std::size_t> inside(k, 0), denom(k, 0);
        for (const auto& x : xs) {
            const Label cs = label_of(x.source), ct = label_of(x.target);
            if (cs != kUnlabeled) {
                denom[cs] += x.count;
                if (cs == ct) inside[cs] += x.count;
            }
            if (mode == SelfReference::involving && ct != kUnlabeled && ct != cs) denom[ct] += x.count;
        }
        std::vector<std::optional<double>> r(k);
        for (std::size_t c = 0; c < k; ++c)
            if (denom[c] > 0) r[c] = static_cast<double>(inside[c]) / static_cast<double>(denom[c]);
        return r;
    };
    const auto mu_r = self_ref(retweets), mu_m = self_ref(mentions);
    for (std::size_t c = 0; c < k; ++c) {
        auto& s = out[c];
        s.community = static_cast<Label>(c);
        s.n_edges = deg_sum[c] / 2;
        if (s.n_users > 0) s.mean_degree = 2.0 * static_cast<double>(s.n_edges) / static_cast<double>(s.n_users);
        if (s.n_users > 1 && kmax[c] > kmin[c])
            s.normalized_mean_degree = (s.mean_degree - static_cast<double>(kmin[c])) /
                                       static_cast<double>(kmax[c] - kmin[c]);
        if (rho_n[c] > 0) s.mean_polarization = rho_sum[c] / static_cast<double>(rho_n[c]);
        s.self_ref_retweets = mu_r[c];
        s.self_ref_mentions = mu_m[c];
    }
    return out;
}

inline void write_community_stats(std::span<const CommunityStats> stats, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    auto opt = [](const std::optional<double>& v) { return v ? csv::format_double(*v) : std::string(); };
    csv::write_row(out, {"community", "N_u", "N_e", "k_mean", "k_mean_normalized", "rho_mean", "mu_r", "mu_m"});
    for (const auto& s : stats)
        csv::write_row(out, {std::to_string(s.community), std::to_string(s.n_users), std::to_string(s.n_edges),
                             csv::format_double(s.mean_degree), opt(s.normalized_mean_degree),
                             opt(s.mean_polarization), opt(s.self_ref_retweets), opt(s.self_ref_mentions)});
}

// ---------------------------------------------------------------------------
// Activity time series

struct ActivityRow {
    std::string window;
    Label community = kUnlabeled;
    std::size_t tweets = 0;
    std::size_t users = 0;
};

/// Records authored by members of each community, and distinct authors, per
/// window. Every (window, community) pair is reported, zeros included.
inline std::vector<ActivityRow> activity_series(std::span<const InteractionRecord> records,
                                                std::span<const TimeWindow> windows,
                                                const std::unordered_map<std::string, Label>& assignment) {
    Label k = kUnlabeled;
    for (const auto& [id, c] : assignment) k = std::max(k, c);
    std::vector<ActivityRow> out;
    for (const auto& w : windows) {
        std::vector<std::size_t> tweets(static_cast<std::size_t>(k + 1), 0);
        std::vector<std::set<std::string>> users(static_cast<std::size_t>(k + 1));
        for (const auto& r : records) {
            if (!w.contains(r.timestamp)) continue;
            auto it = assignment.find(r.author_id);
            if (it == assignment.end() || it->second == kUnlabeled) continue;
            ++tweets[it->second];
            users[it->second].insert(r.author_id);
        }
        for (Label c = 0; c <= k; ++c) out.push_back({w.label, c, tweets[c], users[c].size()});
    }
    return out;
}

inline void write_activity(std::span<const ActivityRow> rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    csv::write_row(out, {"window", "community", "tweets", "users"});
    for (const auto& r : rows)
        csv::write_row(out, {r.window, std::to_string(r.community), std::to_string(r.tweets), std::to_string(r.users)});
}

/// Ranking `node_id,betweenness,top_k` sorted by decreasing centrality (ties: id).
inline void write_betweenness(const Graph& g, std::span<const double> bc, std::size_t top_k, const std::string& path) {
    std::vector<index_t> order(g.n());
    std::iota(order.begin(), order.end(), index_t{0});
    std::sort(order.begin(), order.end(), [&](index_t a, index_t b) {
        if (bc[a] != bc[b]) return bc[a] > bc[b];
        return g.registry().id(a) < g.registry().id(b);
    });
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    csv::write_row(out, {"node_id", "betweenness", "top_k"});
    for (std::size_t r = 0; r < order.size(); ++r)
        csv::write_row(out, {g.registry().id(order[r]), csv::format_double(bc[order[r]]), r < top_k ? "1" : "0"});
}

}  // namespace vnet
