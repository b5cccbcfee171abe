#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "vnet/bigraph.hpp"

namespace vnet {

/// One ingested event (a tweet or a retweet).
struct InteractionRecord {
    std::string record_id;
    std::string author_id;
    bool author_verified = false;
    std::optional<std::string> retweeted_id;
    std::optional<bool> retweeted_verified;
    std::vector<std::string> mentioned_ids;
    std::vector<std::string> hashtags;
    std::int64_t timestamp = 0;

    bool is_retweet() const noexcept { return retweeted_id.has_value(); }
    bool operator==(const InteractionRecord&) const = default;
};

namespace detail {

inline bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

/// Lower-cases ASCII letters and strips one leading '#'. Returns nullopt for
/// empty tags and tags with whitespace.
inline std::optional<std::string> normalize_hashtag(std::string_view raw) {
    if (!raw.empty() && raw.front() == '#') raw.remove_prefix(1);
    if (raw.empty()) return std::nullopt;
    std::string out;
    out.reserve(raw.size());
    for (char c : raw) {
        if (is_space(c)) return std::nullopt;
        out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    }
    return out;
}

}  // namespace detail

/// Parses one line of the corpus format. Returns nullopt when the line is
/// malformed: bad JSON, missing or mistyped fields, or rt_user/rt_verified
/// not both null or both set.
inline std::optional<InteractionRecord> parse_record(std::string_view line) {
    auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    auto string_field = [&](const char* key) -> const nlohmann::json* {
        auto it = doc.find(key);
        return (it != doc.end() && it->is_string()) ? &*it : nullptr;
    };
    InteractionRecord r;
    const auto* id = string_field("id");
    const auto* user = string_field("user");
    if (!id || !user) return std::nullopt;
    r.record_id = id->get<std::string>();
    r.author_id = user->get<std::string>();
    if (r.record_id.empty() || r.author_id.empty()) return std::nullopt;

    auto verified = doc.find("verified");
    if (verified == doc.end() || !verified->is_boolean()) return std::nullopt;
    r.author_verified = verified->get<bool>();

    auto rt_user = doc.find("rt_user");
    auto rt_verified = doc.find("rt_verified");
    if (rt_user == doc.end() || rt_verified == doc.end()) return std::nullopt;
    if (rt_user->is_null() != rt_verified->is_null()) return std::nullopt;
    if (!rt_user->is_null()) {
        if (!rt_user->is_string() || !rt_verified->is_boolean()) return std::nullopt;
        r.retweeted_id = rt_user->get<std::string>();
        r.retweeted_verified = rt_verified->get<bool>();
        if (r.retweeted_id->empty()) return std::nullopt;
    }

    auto string_list = [&](const char* key, std::vector<std::string>& out) {
        auto it = doc.find(key);
        if (it == doc.end() || !it->is_array()) return false;
        for (const auto& v : *it) {
            if (!v.is_string()) return false;
            out.push_back(v.get<std::string>());
        }
        return true;
    };
    if (!string_list("mentions", r.mentioned_ids)) return std::nullopt;
    std::vector<std::string> raw_tags;
    if (!string_list("hashtags", raw_tags)) return std::nullopt;
    for (const auto& t : raw_tags) {
        auto norm = detail::normalize_hashtag(t);
        if (!norm) return std::nullopt;
        r.hashtags.push_back(std::move(*norm));
    }

    auto ts = doc.find("ts");
    if (ts == doc.end() || !ts->is_number_integer()) return std::nullopt;
    r.timestamp = ts->get<std::int64_t>();
    return r;
}

inline std::string serialize_record(const InteractionRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.record_id;
    j["user"] = r.author_id;
    j["verified"] = r.author_verified;
    j["rt_user"] = r.retweeted_id ? nlohmann::ordered_json(*r.retweeted_id) : nlohmann::ordered_json(nullptr);
    j["rt_verified"] =
        r.retweeted_verified ? nlohmann::ordered_json(*r.retweeted_verified) : nlohmann::ordered_json(nullptr);
    j["mentions"] = r.mentioned_ids;
    j["hashtags"] = r.hashtags;
    j["ts"] = r.timestamp;
    return j.dump();
}

inline void write_corpus(std::ostream& out, std::span<const InteractionRecord> records) {
    for (const auto& r : records) out << serialize_record(r) << '\n';
}

struct ParsedCorpus {
    std::vector<InteractionRecord> records;
    std::size_t rejected = 0;
};

/// Reads line-delimited records. Malformed lines and duplicate record ids are
/// skipped and counted; blank lines are ignored.
inline ParsedCorpus parse_corpus(std::istream& in) {
    ParsedCorpus out;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (std::all_of(line.begin(), line.end(), detail::is_space)) continue;
        auto rec = parse_record(line);
        if (!rec || !seen.insert(rec->record_id).second) {
            ++out.rejected;
            continue;
        }
        out.records.push_back(std::move(*rec));
    }
    if (in.bad()) throw std::runtime_error("parse_corpus: read error");
    return out;
}

inline ParsedCorpus parse_corpus_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open corpus " + path);
    return parse_corpus(in);
}

// ---------------------------------------------------------------------------
// Edit distance and hashtag merging

/// Unit-cost Levenshtein distance.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] != b[j - 1]);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// True when levenshtein(a, b) <= k. Only the diagonal band of width 2k+1 is
/// evaluated and the scan stops as soon as a whole row exceeds k.
inline bool within_edit_distance(std::string_view a, std::string_view b, std::size_t k) {
    if (a.size() < b.size()) std::swap(a, b);
    if (a.size() - b.size() > k) return false;
    const std::size_t inf = k + 1;
    const std::size_t m = b.size();
    std::vector<std::size_t> prev(m + 1, inf), cur(m + 1, inf);
    for (std::size_t j = 0; j <= std::min(m, k); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        const std::size_t lo = i > k ? i - k : 0;
        const std::size_t hi = std::min(m, i + k);
        std::fill(cur.begin(), cur.end(), inf);
        std::size_t row_min = inf;
        if (lo == 0) {
            cur[0] = i <= k ? i : inf;
            row_min = cur[0];
        }
        for (std::size_t j = std::max<std::size_t>(lo, 1); j <= hi; ++j) {
            std::size_t v = prev[j - 1] + (a[i - 1] != b[j - 1]);
            v = std::min({v, prev[j] + 1, cur[j - 1] + 1});
            cur[j] = std::min(v, inf);
            row_min = std::min(row_min, cur[j]);
        }
        if (row_min > k) return false;
        std::swap(prev, cur);
    }
    return prev[m] <= k;
}

/// Raw hashtag -> canonical hashtag, with occurrence counts.
struct HashtagMergeMap {
    std::map<std::string, std::string> canonical;
    /// Occurrences of each canonical class (sum over its raw members).
    std::map<std::string, std::size_t> frequency;
    /// Occurrences of each raw hashtag before merging.
    std::map<std::string, std::size_t> raw_frequency;

    /// Canonical form of `tag`; unknown tags map to themselves.
    const std::string& resolve(const std::string& tag) const {
        auto it = canonical.find(tag);
        return it == canonical.end() ? tag : it->second;
    }
};

namespace detail {

class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }

    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

}  // namespace detail

/// Groups hashtags into classes closed under "edit distance <= max_distance"
/// and maps every member to the most frequent one (ties: lexicographically
/// smallest).
inline HashtagMergeMap build_merge_map(const std::map<std::string, std::size_t>& counts,
                                       std::size_t max_distance = 2) {
    std::vector<std::string> tags;
    tags.reserve(counts.size());
    for (const auto& [t, c] : counts) tags.push_back(t);
    std::stable_sort(tags.begin(), tags.end(),
                     [](const std::string& x, const std::string& y) { return x.size() < y.size(); });

    detail::DisjointSets sets(tags.size());
    for (std::size_t i = 0; i < tags.size(); ++i)
        for (std::size_t j = i + 1; j < tags.size() && tags[j].size() - tags[i].size() <= max_distance; ++j)
            if (within_edit_distance(tags[i], tags[j], max_distance)) sets.unite(i, j);

    std::unordered_map<std::size_t, std::size_t> best;  // root -> member index
    for (std::size_t i = 0; i < tags.size(); ++i) {
        const std::size_t root = sets.find(i);
        auto [it, fresh] = best.try_emplace(root, i);
        if (fresh) continue;
        const auto& cur = tags[it->second];
        const std::size_t cf = counts.at(cur), nf = counts.at(tags[i]);
        if (nf > cf || (nf == cf && tags[i] < cur)) it->second = i;
    }

    HashtagMergeMap m;
    for (std::size_t i = 0; i < tags.size(); ++i) {
        const auto& rep = tags[best.at(sets.find(i))];
        m.canonical[tags[i]] = rep;
        m.frequency[rep] += counts.at(tags[i]);
        m.raw_frequency[tags[i]] = counts.at(tags[i]);
    }
    return m;
}

inline HashtagMergeMap build_merge_map(std::span<const std::string> hashtags, std::size_t max_distance = 2) {
    std::map<std::string, std::size_t> counts;
    for (const auto& h : hashtags) ++counts[h];
    return build_merge_map(counts, max_distance);
}

inline std::map<std::string, std::size_t> hashtag_counts(std::span<const InteractionRecord> records) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : records)
        for (const auto& h : r.hashtags) ++counts[h];
    return counts;
}

inline void write_merge_map(const HashtagMergeMap& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    csv::write_row(out, {"raw", "canonical"});
    for (const auto& [raw, canon] : m.canonical) csv::write_row(out, {raw, canon});
}

inline HashtagMergeMap read_merge_map(const std::string& path) {
    auto t = csv::read_file(path);
    const auto c_raw = t.column("raw"), c_can = t.column("canonical");
    HashtagMergeMap m;
    for (const auto& row : t.rows) m.canonical[row[c_raw]] = row[c_can];
    return m;
}

// ---------------------------------------------------------------------------
// Time windows

/// Half-open interval [start, end) of UTC epoch seconds.
struct TimeWindow {
    std::int64_t start = 0;
    std::int64_t end = 0;
    std::string label;

    bool contains(std::int64_t ts) const noexcept { return ts >= start && ts < end; }
};

inline TimeWindow make_window(std::int64_t start, std::int64_t end, std::string label) {
    if (start >= end) throw std::invalid_argument("time window must satisfy start < end");
    return {start, end, std::move(label)};
}

/// Calendar months (UTC) covering [first_ts, last_ts], labelled "YYYY-MM".
inline std::vector<TimeWindow> monthly_windows(std::int64_t first_ts, std::int64_t last_ts) {
    using namespace std::chrono;
    std::vector<TimeWindow> out;
    if (first_ts > last_ts) return out;
    const auto first_day = floor<days>(sys_seconds{seconds{first_ts}});
    year_month ym{year_month_day{first_day}.year(), year_month_day{first_day}.month()};
    while (true) {
        const sys_days from{ym / 1};
        const sys_days to{(ym + months{1}) / 1};
        const auto s = duration_cast<seconds>(from.time_since_epoch()).count();
        const auto e = duration_cast<seconds>(to.time_since_epoch()).count();
        if (s > last_ts) break;
        char label[16];
        std::snprintf(label, sizeof label, "%04d-%02u", static_cast<int>(ym.year()),
                      static_cast<unsigned>(ym.month()));
        out.push_back(make_window(s, e, label));
        ym += months{1};
    }
    return out;
}

inline std::vector<TimeWindow> monthly_windows(std::span<const InteractionRecord> records) {
    if (records.empty()) return {};
    auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                        [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
    return monthly_windows(lo->timestamp, hi->timestamp);
}

/// Window spanning every record, labelled "all".
inline TimeWindow aggregate_window(std::span<const InteractionRecord> records) {
    if (records.empty()) return make_window(0, 1, "all");
    auto [lo, hi] = std::minmax_element(records.begin(), records.end(),
                                        [](const auto& x, const auto& y) { return x.timestamp < y.timestamp; });
    return make_window(lo->timestamp, hi->timestamp + 1, "all");
}

// ---------------------------------------------------------------------------
// Graph construction

/// Users flagged verified by any record, either as author or as retweeted user.
inline std::unordered_set<std::string> verified_users(std::span<const InteractionRecord> records) {
    std::unordered_set<std::string> out;
    for (const auto& r : records) {
        if (r.author_verified) out.insert(r.author_id);
        if (r.retweeted_id && r.retweeted_verified.value_or(false)) out.insert(*r.retweeted_id);
    }
    return out;
}

/// Verified (top) by non-verified (bottom) users, linked when either has
/// retweeted the other at least once inside `window`.
inline BipartiteGraph build_user_bipartite(std::span<const InteractionRecord> records, const TimeWindow& window) {
    const auto verified = verified_users(records);
    BipartiteBuilder b;
    for (const auto& r : records) {
        if (!r.is_retweet() || !window.contains(r.timestamp)) continue;
        const bool author_v = verified.count(r.author_id) > 0;
        const bool target_v = verified.count(*r.retweeted_id) > 0;
        if (author_v == target_v) continue;
        if (author_v)
            b.add_edge(r.author_id, *r.retweeted_id);
        else
            b.add_edge(*r.retweeted_id, r.author_id);
    }
    return std::move(b).build();
}

/// Users (top) by canonical hashtags (bottom): a user is linked to every
/// hashtag it tweeted or retweeted inside `window`. Users without hashtags
/// are dropped unless `keep_hashtagless_users` is set.
inline BipartiteGraph build_hashtag_bipartite(std::span<const InteractionRecord> records, const HashtagMergeMap& merge,
                                              const TimeWindow& window, bool keep_hashtagless_users = false) {
    BipartiteBuilder b;
    for (const auto& r : records) {
        if (!window.contains(r.timestamp)) continue;
        if (r.hashtags.empty()) {
            if (keep_hashtagless_users) b.add_top(r.author_id);
            continue;
        }
        for (const auto& h : r.hashtags) b.add_edge(r.author_id, merge.resolve(h));
    }
    return std::move(b).build();
}

/// Directed interaction count (retweet or mention) between two users.
struct Interaction {
    std::string source;
    std::string target;
    std::size_t count = 0;
};

/// Retweets and mentions inside a window, aggregated per ordered pair and
/// sorted by (source, target).
struct InteractionCounts {
    std::vector<Interaction> retweets;
    std::vector<Interaction> mentions;
};

inline InteractionCounts count_interactions(std::span<const InteractionRecord> records, const TimeWindow& window) {
    std::map<std::pair<std::string, std::string>, std::size_t> rt, mt;
    for (const auto& r : records) {
        if (!window.contains(r.timestamp)) continue;
        if (r.is_retweet() && *r.retweeted_id != r.author_id) ++rt[{r.author_id, *r.retweeted_id}];
        for (const auto& m : r.mentioned_ids)
            if (m != r.author_id) ++mt[{r.author_id, m}];
    }
    InteractionCounts out;
    for (const auto& [k, c] : rt) out.retweets.push_back({k.first, k.second, c});
    for (const auto& [k, c] : mt) out.mentions.push_back({k.first, k.second, c});
    return out;
}

/// Undirected retweet network; the weight of {u, v} is the number of
/// retweets exchanged in either direction.
inline Graph retweet_network(std::span<const Interaction> retweets, bool weighted = true) {
    GraphBuilder b;
    for (const auto& e : retweets) b.add_edge(e.source, e.target, static_cast<double>(e.count));
    return std::move(b).build(weighted);
}

inline void write_interactions(std::span<const Interaction> xs, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    csv::write_row(out, {"source", "target", "count"});
    for (const auto& x : xs) csv::write_row(out, {x.source, x.target, std::to_string(x.count)});
}

inline std::vector<Interaction> read_interactions(const std::string& path) {
    auto t = csv::read_file(path);
    const auto cs = t.column("source"), ct = t.column("target"), cc = t.column("count");
    std::vector<Interaction> out;
    for (const auto& row : t.rows) out.push_back({row[cs], row[ct], csv::parse_int<std::size_t>(row[cc])});
    return out;
}

}  // namespace vnet
