#pragma once

// Seeded generators with planted ground truth: interaction corpora in the
// ingestion record format, bipartite block models and core-periphery graphs.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vnet/bigraph.hpp"
#include "vnet/common.hpp"
#include "vnet/corpus.hpp"

namespace vnet {

struct EventSpike {
    std::size_t window = 0;
    std::size_t community = 0;
    double multiplier = 1.0;
};

struct PlantedConfig {
    std::size_t n_communities = 4;
    std::size_t verified_per_community = 20;
    std::size_t nonverified_per_community = 500;
    /// Retweet link probability between two users of the same community.
    double intra_retweet_prob = 0.05;
    /// Retweet link probability between users of different communities.
    double inter_retweet_prob = 0.001;
    /// Probability that a non-verified user retweets a given verified user
    /// of its own community (cross-community pairs use inter_retweet_prob).
    double verified_retweet_prob = 0.3;
    std::size_t hashtags_per_community = 40;
    double hashtag_crossover_prob = 0.1;
    std::size_t n_windows = 3;
    std::vector<EventSpike> event_spikes;
    std::uint64_t seed = 1;

    /// Original tweets per user and window, before spikes.
    double tweet_rate = 1.0;
    /// Mean number of repeated retweets on an existing retweet link.
    double extra_retweets = 0.5;
    double mention_prob = 0.3;
    /// Probability that a hashtag occurrence carries a one-letter typo.
    double typo_prob = 0.03;
    /// UTC epoch seconds of the first day of the first window.
    std::int64_t start_time = 1546300800;  // 2019-01-01

    double spike(std::size_t window, std::size_t community) const {
        double m = 1.0;
        for (const auto& s : event_spikes)
            if (s.window == window && s.community == community) m *= s.multiplier;
        return m;
    }

    void validate() const {
        auto prob = [](double p, const char* name) {
            if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0,1]");
        };
        prob(intra_retweet_prob, "intra_retweet_prob");
        prob(inter_retweet_prob, "inter_retweet_prob");
        prob(verified_retweet_prob, "verified_retweet_prob");
        prob(hashtag_crossover_prob, "hashtag_crossover_prob");
        prob(mention_prob, "mention_prob");
        prob(typo_prob, "typo_prob");
        if (n_communities == 0 || verified_per_community == 0 || nonverified_per_community == 0)
            throw ConfigError("community sizes must be positive");
        if (hashtags_per_community == 0) throw ConfigError("hashtags_per_community must be positive");
        if (n_windows == 0) throw ConfigError("n_windows must be positive");
        if (!(tweet_rate >= 0.0) || !(extra_retweets >= 0.0)) throw ConfigError("rates must be non-negative");
        for (const auto& s : event_spikes) {
            if (s.window >= n_windows || s.community >= n_communities)
                throw ConfigError("event spike refers to a missing window or community");
            if (!(s.multiplier >= 0.0)) throw ConfigError("event spike multiplier must be non-negative");
        }
    }
};

inline void to_json(nlohmann::json& j, const EventSpike& s) {
    j = {{"window", s.window}, {"community", s.community}, {"multiplier", s.multiplier}};
}

inline void from_json(const nlohmann::json& j, EventSpike& s) {
    j.at("window").get_to(s.window);
    j.at("community").get_to(s.community);
    j.at("multiplier").get_to(s.multiplier);
}

inline void to_json(nlohmann::json& j, const PlantedConfig& c) {
    j = nlohmann::json{{"n_communities", c.n_communities},
                       {"verified_per_community", c.verified_per_community},
                       {"nonverified_per_community", c.nonverified_per_community},
                       {"intra_retweet_prob", c.intra_retweet_prob},
                       {"inter_retweet_prob", c.inter_retweet_prob},
                       {"verified_retweet_prob", c.verified_retweet_prob},
                       {"hashtags_per_community", c.hashtags_per_community},
                       {"hashtag_crossover_prob", c.hashtag_crossover_prob},
                       {"n_windows", c.n_windows},
                       {"event_spikes", c.event_spikes},
                       {"seed", c.seed},
                       {"tweet_rate", c.tweet_rate},
                       {"extra_retweets", c.extra_retweets},
                       {"mention_prob", c.mention_prob},
                       {"typo_prob", c.typo_prob},
                       {"start_time", c.start_time}};
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, PlantedConfig& c) {
    if (!j.is_object()) throw ConfigError("synthetic config must be a JSON object");
    const nlohmann::json known = PlantedConfig{};
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ConfigError("unknown synthetic config key: " + key);
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) j.at(key).get_to(field);
        };
        get("n_communities", c.n_communities);
        get("verified_per_community", c.verified_per_community);
        get("nonverified_per_community", c.nonverified_per_community);
        get("intra_retweet_prob", c.intra_retweet_prob);
        get("inter_retweet_prob", c.inter_retweet_prob);
        get("verified_retweet_prob", c.verified_retweet_prob);
        get("hashtags_per_community", c.hashtags_per_community);
        get("hashtag_crossover_prob", c.hashtag_crossover_prob);
        get("n_windows", c.n_windows);
        get("event_spikes", c.event_spikes);
        get("seed", c.seed);
        get("tweet_rate", c.tweet_rate);
        get("extra_retweets", c.extra_retweets);
        get("mention_prob", c.mention_prob);
        get("typo_prob", c.typo_prob);
        get("start_time", c.start_time);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic config: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Vocabularies

/// `n` random lowercase words of length [min_len, max_len], pairwise more than
/// `min_distance - 1` edits apart.
inline std::vector<std::string> generate_vocabulary(std::size_t n, std::size_t min_distance, Rng& rng,
                                                    std::size_t min_len = 8, std::size_t max_len = 12) {
    std::vector<std::string> words;
    words.reserve(n);
    std::size_t attempts = 0;
    while (words.size() < n) {
        if (++attempts > 100 * n + 1000) throw ConfigError("cannot generate a vocabulary with the requested spacing");
        const std::size_t len = min_len + uniform_index(rng, max_len - min_len + 1);
        std::string w(len, 'a');
        for (auto& ch : w) ch = static_cast<char>('a' + uniform_index(rng, 26));
        bool ok = true;
        for (const auto& other : words) {
            const std::size_t dl = w.size() > other.size() ? w.size() - other.size() : other.size() - w.size();
            if (dl < min_distance && within_edit_distance(w, other, min_distance - 1)) {
                ok = false;
                break;
            }
        }
        if (ok) words.push_back(std::move(w));
    }
    return words;
}

/// `word` with one position replaced by a different letter.
inline std::string with_typo(const std::string& word, Rng& rng) {
    std::string out = word;
    const std::size_t pos = uniform_index(rng, out.size());
    char c;
    do c = static_cast<char>('a' + uniform_index(rng, 26));
    while (c == out[pos]);
    out[pos] = c;
    return out;
}

// ---------------------------------------------------------------------------
// Planted interaction corpus

struct SyntheticCorpus {
    std::vector<InteractionRecord> records;
    /// (user id, planted community) for every user, sorted by id.
    std::vector<std::pair<std::string, std::size_t>> planted;
    std::vector<std::string> verified;
    std::vector<std::vector<std::string>> vocabulary;
    std::vector<TimeWindow> windows;
};

namespace detail {

struct PlantedUser {
    std::string id;
    std::size_t community;
    bool verified;
};

inline std::int64_t window_start(const PlantedConfig& cfg, std::size_t w) {
    using namespace std::chrono;
    const auto first = floor<days>(sys_seconds{seconds{cfg.start_time}});
    year_month ym{year_month_day{first}.year(), year_month_day{first}.month()};
    ym += months{static_cast<int>(w)};
    return duration_cast<seconds>(sys_days{ym / 1}.time_since_epoch()).count();
}

}  // namespace detail

/// Users are split into communities; retweet links are Bernoulli per pair
/// (intra, inter, or verified_retweet_prob for a non-verified user and a
/// verified user of the same community). Each link yields one retweet plus
/// Poisson(extra_retweets) repeats, and every user writes Poisson(tweet_rate)
/// original tweets per window. Counts in window w for community c are scaled
/// by the product of matching spike multipliers; a link's first retweet is
/// placed in a window drawn in proportion to them.
inline SyntheticCorpus generate_corpus(const PlantedConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "synth/corpus"));
    const std::size_t k = cfg.n_communities;
    const std::size_t per = cfg.verified_per_community + cfg.nonverified_per_community;
    const std::size_t n_users = k * per;

    // Ids follow a random permutation of the users.
    std::vector<std::size_t> perm(n_users);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    shuffle(perm, rng);
    const int width = static_cast<int>(std::to_string(n_users).size());
    std::vector<detail::PlantedUser> users(n_users);
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t i = 0; i < per; ++i) {
            const std::size_t u = c * per + i;
            char buf[32];
            std::snprintf(buf, sizeof buf, "user%0*zu", width, perm[u]);
            users[u] = {buf, c, i < cfg.verified_per_community};
        }

    SyntheticCorpus out;
    Rng vocab_rng(derive_seed(cfg.seed, "synth/vocabulary"));
    const auto words = generate_vocabulary(k * cfg.hashtags_per_community, 7, vocab_rng);
    out.vocabulary.resize(k);
    for (std::size_t c = 0; c < k; ++c)
        out.vocabulary[c].assign(words.begin() + static_cast<std::ptrdiff_t>(c * cfg.hashtags_per_community),
                                 words.begin() + static_cast<std::ptrdiff_t>((c + 1) * cfg.hashtags_per_community));
    for (std::size_t w = 0; w < cfg.n_windows; ++w) {
        char label[16];
        const auto s = detail::window_start(cfg, w);
        const auto ymd = std::chrono::year_month_day{std::chrono::floor<std::chrono::days>(
            std::chrono::sys_seconds{std::chrono::seconds{s}})};
        std::snprintf(label, sizeof label, "%04d-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()));
        out.windows.push_back(make_window(s, detail::window_start(cfg, w + 1), label));
    }

    auto pick_hashtags = [&](std::size_t c) {
        std::vector<std::string> tags;
        const std::size_t n_tags = 1 + poisson(rng, 0.5);
        for (std::size_t t = 0; t < n_tags; ++t) {
            std::size_t src = c;
            if (k > 1 && bernoulli(rng, cfg.hashtag_crossover_prob)) {
                src = uniform_index(rng, k - 1);
                if (src >= c) ++src;
            }
            const auto& vocab = out.vocabulary[src];
            // Zipf-like popularity: low indices are reused more often.
            const double u = uniform01(rng);
            std::string tag = vocab[static_cast<std::size_t>(u * u * static_cast<double>(vocab.size()))];
            if (bernoulli(rng, cfg.typo_prob)) tag = with_typo(tag, rng);
            if (bernoulli(rng, 0.1)) tag = "#" + tag;
            tags.push_back(std::move(tag));
        }
        return tags;
    };
    auto pick_mentions = [&](std::size_t c) {
        std::vector<std::string> m;
        if (bernoulli(rng, cfg.mention_prob)) {
            std::size_t src = c;
            if (k > 1 && bernoulli(rng, cfg.inter_retweet_prob / std::max(cfg.intra_retweet_prob, 1e-12))) {
                src = uniform_index(rng, k - 1);
                if (src >= c) ++src;
            }
            m.push_back(users[src * per + uniform_index(rng, per)].id);
        }
        return m;
    };
    auto time_in = [&](std::size_t w) {
        const auto& win = out.windows[w];
        return win.start + static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(win.end - win.start)));
    };
    auto emit = [&](const detail::PlantedUser& author, const detail::PlantedUser* target, std::size_t w) {
        InteractionRecord r;
        r.author_id = author.id;
        r.author_verified = author.verified;
        if (target) {
            r.retweeted_id = target->id;
            r.retweeted_verified = target->verified;
        }
        r.hashtags = pick_hashtags(author.community);
        r.mentioned_ids = pick_mentions(author.community);
        std::erase(r.mentioned_ids, author.id);
        r.timestamp = time_in(w);
        out.records.push_back(std::move(r));
    };
    auto spike_window = [&](std::size_t c) {
        double total = 0.0;
        for (std::size_t w = 0; w < cfg.n_windows; ++w) total += cfg.spike(w, c);
        if (total <= 0.0) return uniform_index(rng, cfg.n_windows);
        double u = uniform01(rng) * total;
        for (std::size_t w = 0; w < cfg.n_windows; ++w) {
            u -= cfg.spike(w, c);
            if (u < 0.0) return w;
        }
        return cfg.n_windows - 1;
    };

    // Retweet links.
    for (std::size_t a = 0; a < n_users; ++a) {
        for (std::size_t b = a + 1; b < n_users; ++b) {
            const auto& ua = users[a];
            const auto& ub = users[b];
            double p;
            if (ua.community != ub.community)
                p = cfg.inter_retweet_prob;
            else if (ua.verified != ub.verified)
                p = cfg.verified_retweet_prob;
            else
                p = cfg.intra_retweet_prob;
            if (!bernoulli(rng, p)) continue;
            // Non-verified users retweet verified ones; otherwise a coin flip.
            const detail::PlantedUser* author = &ua;
            const detail::PlantedUser* target = &ub;
            if (ua.verified != ub.verified) {
                if (ua.verified) std::swap(author, target);
            } else if (bernoulli(rng, 0.5)) {
                std::swap(author, target);
            }
            emit(*author, target, spike_window(author->community));
            for (std::size_t w = 0; w < cfg.n_windows; ++w) {
                const std::size_t extra = poisson(rng, cfg.extra_retweets * cfg.spike(w, author->community) /
                                                           static_cast<double>(cfg.n_windows));
                for (std::size_t e = 0; e < extra; ++e) emit(*author, target, w);
            }
        }
    }
    // Original tweets.
    for (const auto& u : users)
        for (std::size_t w = 0; w < cfg.n_windows; ++w) {
            const std::size_t n = poisson(rng, cfg.tweet_rate * cfg.spike(w, u.community));
            for (std::size_t t = 0; t < n; ++t) emit(u, nullptr, w);
        }

    std::stable_sort(out.records.begin(), out.records.end(),
                     [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
    const int id_width = static_cast<int>(std::to_string(out.records.size()).size());
    for (std::size_t i = 0; i < out.records.size(); ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "tw%0*zu", id_width, i);
        out.records[i].record_id = buf;
    }
    for (const auto& u : users) {
        out.planted.emplace_back(u.id, u.community);
        if (u.verified) out.verified.push_back(u.id);
    }
    std::sort(out.planted.begin(), out.planted.end());
    std::sort(out.verified.begin(), out.verified.end());
    return out;
}

inline void write_ground_truth(const SyntheticCorpus& sc, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    csv::write_row(out, {"node_id", "planted_label"});
    for (const auto& [id, c] : sc.planted) csv::write_row(out, {id, std::to_string(c)});
}

// ---------------------------------------------------------------------------
// Bipartite block model

struct BlockmodelConfig {
    std::size_t n_groups = 4;
    std::size_t top_per_group = 50;
    std::size_t bottom_per_group = 50;
    double p_in = 0.2;
    double p_out = 0.01;
    std::uint64_t seed = 1;
};

struct PlantedBipartite {
    BipartiteGraph graph;
    /// Planted group of every node, indexed like the graph's layers.
    std::vector<std::size_t> top_group;
    std::vector<std::size_t> bottom_group;
};

/// Top and bottom nodes are split into `n_groups` groups; a link appears with
/// probability p_in inside a group and p_out across groups. Isolated nodes are
/// kept.
inline PlantedBipartite generate_bipartite_blockmodel(const BlockmodelConfig& cfg) {
    if (!(cfg.p_in >= 0.0 && cfg.p_in <= 1.0 && cfg.p_out >= 0.0 && cfg.p_out <= 1.0))
        throw ConfigError("block model probabilities must lie in [0,1]");
    Rng rng(derive_seed(cfg.seed, "synth/blockmodel"));
    const std::size_t nt = cfg.n_groups * cfg.top_per_group, nb = cfg.n_groups * cfg.bottom_per_group;
    BipartiteBuilder b;
    for (std::size_t i = 0; i < nt; ++i) b.add_top("t" + std::to_string(i));
    for (std::size_t a = 0; a < nb; ++a) b.add_bottom("b" + std::to_string(a));
    for (std::size_t i = 0; i < nt; ++i)
        for (std::size_t a = 0; a < nb; ++a) {
            const bool same = i / cfg.top_per_group == a / cfg.bottom_per_group;
            if (bernoulli(rng, same ? cfg.p_in : cfg.p_out)) b.add_edge("t" + std::to_string(i), "b" + std::to_string(a));
        }
    PlantedBipartite out{std::move(b).build(), {}, {}};
    for (std::size_t i = 0; i < nt; ++i) out.top_group.push_back(i / cfg.top_per_group);
    for (std::size_t a = 0; a < nb; ++a) out.bottom_group.push_back(a / cfg.bottom_per_group);
    return out;
}

// ---------------------------------------------------------------------------
// Core-periphery graph

struct PlantedCorePeriphery {
    Graph graph;
    std::vector<bool> in_core;
};

/// Dense Erdos-Renyi core of `core_size` nodes plus `n_pendants` periphery
/// nodes, each attached to `links_per_pendant` distinct random core nodes.
inline PlantedCorePeriphery generate_core_periphery(std::size_t core_size, std::size_t n_pendants, double core_density,
                                                    std::size_t links_per_pendant, std::uint64_t seed) {
    if (core_size < 2 || links_per_pendant == 0 || links_per_pendant > core_size)
        throw ConfigError("infeasible core-periphery sizes");
    Rng rng(derive_seed(seed, "synth/core_periphery"));
    const std::size_t n = core_size + n_pendants;
    std::vector<std::pair<index_t, index_t>> edges;
    for (index_t u = 0; u < core_size; ++u)
        for (index_t v = u + 1; v < core_size; ++v)
            if (bernoulli(rng, core_density)) edges.emplace_back(u, v);
    std::vector<index_t> core(core_size);
    std::iota(core.begin(), core.end(), index_t{0});
    for (std::size_t p = 0; p < n_pendants; ++p) {
        shuffle(core, rng);
        for (std::size_t l = 0; l < links_per_pendant; ++l)
            edges.emplace_back(static_cast<index_t>(core_size + p), core[l]);
    }
    PlantedCorePeriphery out{Graph::from_edges(n, edges), std::vector<bool>(n, false)};
    for (std::size_t v = 0; v < core_size; ++v) out.in_core[v] = true;
    return out;
}

}  // namespace vnet
