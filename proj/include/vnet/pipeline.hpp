#pragma once

// Stage orchestration over an output directory:
//
//   <out>/ingest/                     records.jsonl, merge_map.csv, windows.csv, summary.json
//   <out>/windows/<label>/ingest/     bipartite graphs, retweets.csv, mentions.csv
//   <out>/windows/<label>/fit/        BiCM multipliers per layer
//   <out>/windows/<label>/project/    validated verified-user and hashtag projections
//   <out>/windows/<label>/communities/
//   <out>/windows/<label>/mesoscale/
//   <out>/windows/<label>/metrics/
//   <out>/manifest.json               written by run_pipeline
//
// Every stage directory holds a stage.json stamp listing the hashes of the
// files it consumed and produced; downstream stages refuse to run on missing
// or modified upstream artifacts.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "vnet/bigraph.hpp"
#include "vnet/community.hpp"
#include "vnet/corpus.hpp"
#include "vnet/mesoscale.hpp"
#include "vnet/metrics.hpp"
#include "vnet/nullmodel.hpp"
#include "vnet/projection.hpp"

namespace vnet {

inline constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;

/// Lowercase hex SHA-256 of a file's bytes.
inline std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest initialisation failed");
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Configuration

struct PipelineConfig {
    std::string input;
    std::string output = "out";
    /// "monthly", "aggregate", or "explicit" (then `explicit_windows` is used).
    /// The aggregate window "all" is always processed as well.
    std::string windows = "monthly";
    std::vector<TimeWindow> explicit_windows;
    double significance = 0.01;
    double polarization_threshold = 0.9;
    std::size_t louvain_runs = 1000;
    std::size_t propagation_runs = 1000;
    std::size_t levenshtein_distance = 2;
    double solver_tolerance = 1e-8;
    std::size_t solver_max_iterations = 10000;
    std::uint64_t seed = 0;
    bool weighted_propagation = true;
    bool unique_seed_labels = false;
    bool keep_hashtagless_users = false;
    std::size_t propagation_max_sweeps = 100;
    std::size_t core_restarts = 20;
    std::size_t top_k = 20;
    /// "authored" or "involving"; denominator of the self-reference indexes.
    std::string self_reference = "authored";

    void validate() const {
        if (windows != "monthly" && windows != "aggregate" && windows != "explicit")
            throw ConfigError("windows must be monthly, aggregate or explicit");
        if (windows == "explicit" && explicit_windows.empty())
            throw ConfigError("explicit window mode needs at least one window");
        for (const auto& w : explicit_windows) {
            if (w.start >= w.end) throw ConfigError("window " + w.label + " must satisfy start < end");
            if (w.label.empty() || w.label == "all" || w.label.find_first_of("/\\.") != std::string::npos)
                throw ConfigError("invalid window label '" + w.label + "'");
        }
        if (!(significance > 0.0 && significance < 1.0)) throw ConfigError("significance must lie in (0,1)");
        if (!(polarization_threshold > 0.0 && polarization_threshold <= 1.0))
            throw ConfigError("polarization-threshold must lie in (0,1]");
        if (louvain_runs == 0 || propagation_runs == 0) throw ConfigError("run counts must be positive");
        if (!(solver_tolerance > 0.0)) throw ConfigError("solver-tolerance must be positive");
        if (solver_max_iterations == 0) throw ConfigError("solver-max-iterations must be positive");
        if (propagation_max_sweeps == 0) throw ConfigError("propagation-max-sweeps must be positive");
        if (core_restarts == 0) throw ConfigError("core-restarts must be positive");
        if (self_reference != "authored" && self_reference != "involving")
            throw ConfigError("self-reference must be authored or involving");
        if (output.empty()) throw ConfigError("output directory is required");
    }

    SelfReference self_reference_mode() const {
        return self_reference == "involving" ? SelfReference::involving : SelfReference::authored;
    }
};

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
    nlohmann::json wins = nlohmann::json::array();
    for (const auto& w : c.explicit_windows) wins.push_back({{"label", w.label}, {"start", w.start}, {"end", w.end}});
    j = nlohmann::json{{"input", c.input},
                       {"output", c.output},
                       {"windows", c.windows},
                       {"explicit_windows", wins},
                       {"significance", c.significance},
                       {"polarization_threshold", c.polarization_threshold},
                       {"louvain_runs", c.louvain_runs},
                       {"propagation_runs", c.propagation_runs},
                       {"levenshtein_distance", c.levenshtein_distance},
                       {"solver_tolerance", c.solver_tolerance},
                       {"solver_max_iterations", c.solver_max_iterations},
                       {"seed", c.seed},
                       {"weighted_propagation", c.weighted_propagation},
                       {"unique_seed_labels", c.unique_seed_labels},
                       {"keep_hashtagless_users", c.keep_hashtagless_users},
                       {"propagation_max_sweeps", c.propagation_max_sweeps},
                       {"core_restarts", c.core_restarts},
                       {"top_k", c.top_k},
                       {"self_reference", c.self_reference}};
}

/// Missing keys keep their current values; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
    if (!j.is_object()) throw ConfigError("pipeline config must be a JSON object");
    const nlohmann::json known = PipelineConfig{};
    for (const auto& [key, _] : j.items())
        if (!known.contains(key)) throw ConfigError("unknown config key: " + key);
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) j.at(key).get_to(field);
        };
        get("input", c.input);
        get("output", c.output);
        get("windows", c.windows);
        if (j.contains("explicit_windows")) {
            c.explicit_windows.clear();
            for (const auto& w : j.at("explicit_windows"))
                c.explicit_windows.push_back(
                    {w.at("start").get<std::int64_t>(), w.at("end").get<std::int64_t>(), w.at("label").get<std::string>()});
        }
        get("significance", c.significance);
        get("polarization_threshold", c.polarization_threshold);
        get("louvain_runs", c.louvain_runs);
        get("propagation_runs", c.propagation_runs);
        get("levenshtein_distance", c.levenshtein_distance);
        get("solver_tolerance", c.solver_tolerance);
        get("solver_max_iterations", c.solver_max_iterations);
        get("seed", c.seed);
        get("weighted_propagation", c.weighted_propagation);
        get("unique_seed_labels", c.unique_seed_labels);
        get("keep_hashtagless_users", c.keep_hashtagless_users);
        get("propagation_max_sweeps", c.propagation_max_sweeps);
        get("core_restarts", c.core_restarts);
        get("top_k", c.top_k);
        get("self_reference", c.self_reference);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    PipelineConfig c;
    from_json(j, c);
    return c;
}

// ---------------------------------------------------------------------------
// Stage stamps

struct StageStamp {
    std::string stage;
    std::string window;
    /// Relative path (or external input path) -> SHA-256.
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
};

class Workspace {
public:
    explicit Workspace(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const noexcept { return root_; }
    fs::path ingest_dir() const { return root_ / "ingest"; }
    fs::path window_dir(const std::string& label) const { return root_ / "windows" / label; }
    fs::path stage_dir(const std::string& label, const std::string& stage) const { return window_dir(label) / stage; }

    std::string relative(const fs::path& p) const { return p.lexically_relative(root_).generic_string(); }
    fs::path absolute(const std::string& key) const {
        const fs::path p(key);
        return p.is_absolute() ? p : root_ / p;
    }

    /// Recreates an empty stage directory.
    fs::path fresh(const fs::path& dir) const {
        fs::remove_all(dir);
        fs::create_directories(dir);
        return dir;
    }

    void write_stamp(const fs::path& dir, const StageStamp& s) const {
        nlohmann::ordered_json j;
        j["stage"] = s.stage;
        j["window"] = s.window;
        j["inputs"] = s.inputs;
        j["outputs"] = s.outputs;
        std::ofstream out(dir / "stage.json", std::ios::binary);
        if (!out) throw std::runtime_error("cannot write stamp in " + dir.string());
        out << j.dump(2) << '\n';
    }

    /// Hashes of `files` keyed by their path relative to the root.
    std::map<std::string, std::string> hashes(const std::vector<fs::path>& files) const {
        std::map<std::string, std::string> out;
        for (const auto& f : files) out[relative(f)] = sha256_file(f);
        return out;
    }

    /// Loads the stamp of `stage` in `dir` and checks that its outputs are
    /// unchanged and that the inputs it consumed are still current.
    StageStamp require(const fs::path& dir, const std::string& stage, const std::string& window) const {
        const auto stamp_path = dir / "stage.json";
        const std::string where = window.empty() ? std::string() : " for window " + window;
        if (!fs::exists(stamp_path))
            throw DependencyError("missing artifacts of stage '" + stage + "'" + where + "; run `vnet " + stage +
                                  "` first");
        StageStamp s;
        try {
            std::ifstream in(stamp_path, std::ios::binary);
            const auto j = nlohmann::json::parse(in);
            s.stage = j.at("stage").get<std::string>();
            s.window = j.at("window").get<std::string>();
            s.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
            s.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
        } catch (const nlohmann::json::exception&) {
            throw DependencyError("corrupt stamp " + stamp_path.string() + "; re-run `vnet " + stage + "`");
        }
        auto check = [&](const std::map<std::string, std::string>& files, const char* what) {
            for (const auto& [key, hash] : files) {
                const auto p = absolute(key);
                if (!fs::exists(p) || sha256_file(p) != hash)
                    throw DependencyError("stale artifacts of stage '" + stage + "'" + where + ": " + what + " " + key +
                                          " changed; re-run `vnet " + stage + "`");
            }
        };
        check(s.outputs, "output");
        check(s.inputs, "input");
        return s;
    }

private:
    fs::path root_;
};

namespace detail {

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline std::vector<TimeWindow> read_windows(const fs::path& path) {
    const auto t = csv::read_file(path.string());
    const auto cl = t.column("label"), cs = t.column("start"), ce = t.column("end");
    std::vector<TimeWindow> out;
    for (const auto& row : t.rows)
        out.push_back(make_window(csv::parse_int<std::int64_t>(row[cs]), csv::parse_int<std::int64_t>(row[ce]), row[cl]));
    return out;
}

inline std::vector<InteractionRecord> read_records(const fs::path& path) {
    auto parsed = parse_corpus_file(path.string());
    if (parsed.rejected != 0) throw std::runtime_error(path.string() + ": corrupt ingested records");
    return std::move(parsed.records);
}

inline SolverConfig solver_config(const PipelineConfig& cfg) {
    SolverConfig s;
    s.tolerance = cfg.solver_tolerance;
    s.max_iterations = cfg.solver_max_iterations;
    return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages

/// Parses the corpus, builds the hashtag merge map and the window list, and
/// writes every window's graphs. Returns the window labels.
inline std::vector<std::string> run_ingest(const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.input.empty() || !fs::is_regular_file(cfg.input))
        throw ConfigError("input file '" + cfg.input + "' does not exist");
    const Workspace ws(cfg.output);
    auto parsed = parse_corpus_file(cfg.input);
    const auto& records = parsed.records;

    std::vector<TimeWindow> windows;
    if (cfg.windows == "monthly")
        windows = monthly_windows(records);
    else if (cfg.windows == "explicit")
        windows = cfg.explicit_windows;
    windows.push_back(aggregate_window(records));

    fs::remove_all(ws.root() / "windows");
    const auto dir = ws.fresh(ws.ingest_dir());
    const auto merge = build_merge_map(hashtag_counts(records), cfg.levenshtein_distance);
    {
        std::ofstream out(dir / "records.jsonl", std::ios::binary);
        write_corpus(out, records);
    }
    write_merge_map(merge, (dir / "merge_map.csv").string());
    {
        std::ofstream out(dir / "windows.csv", std::ios::binary);
        csv::write_row(out, {"label", "start", "end"});
        for (const auto& w : windows) csv::write_row(out, {w.label, std::to_string(w.start), std::to_string(w.end)});
    }
    nlohmann::ordered_json summary;
    summary["n_records"] = records.size();
    summary["n_rejected"] = parsed.rejected;
    summary["n_hashtags_raw"] = merge.canonical.size();
    summary["n_hashtags_canonical"] = merge.frequency.size();
    summary["n_windows"] = windows.size();
    detail::write_json(dir / "summary.json", summary);

    const std::vector<fs::path> shared = {dir / "records.jsonl", dir / "merge_map.csv", dir / "windows.csv"};
    StageStamp top{"ingest", "", {}, ws.hashes({dir / "records.jsonl", dir / "merge_map.csv", dir / "windows.csv",
                                                dir / "summary.json"})};
    top.inputs[fs::absolute(cfg.input).lexically_normal().generic_string()] = sha256_file(cfg.input);

    std::vector<std::string> labels;
    for (const auto& w : windows) {
        const auto wd = ws.fresh(ws.stage_dir(w.label, "ingest"));
        const auto users = build_user_bipartite(records, w);
        const auto tags = build_hashtag_bipartite(records, merge, w, cfg.keep_hashtagless_users);
        const auto counts = count_interactions(records, w);
        write_bipartite(users, (wd / "users_edges.csv").string(), (wd / "users_nodes.csv").string());
        write_bipartite(tags, (wd / "hashtags_edges.csv").string(), (wd / "hashtags_nodes.csv").string());
        write_interactions(counts.retweets, (wd / "retweets.csv").string());
        write_interactions(counts.mentions, (wd / "mentions.csv").string());
        ws.write_stamp(wd, {"ingest", w.label, ws.hashes(shared),
                            ws.hashes({wd / "users_edges.csv", wd / "users_nodes.csv", wd / "hashtags_edges.csv",
                                       wd / "hashtags_nodes.csv", wd / "retweets.csv", wd / "mentions.csv"})});
        labels.push_back(w.label);
    }
    ws.write_stamp(dir, top);
    return labels;
}

/// Window labels recorded by the ingest stage.
inline std::vector<std::string> ingested_windows(const PipelineConfig& cfg) {
    const Workspace ws(cfg.output);
    ws.require(ws.ingest_dir(), "ingest", "");
    std::vector<std::string> out;
    for (const auto& w : detail::read_windows(ws.ingest_dir() / "windows.csv")) out.push_back(w.label);
    return out;
}

namespace detail {

struct WindowGraphs {
    BipartiteGraph users;
    BipartiteGraph hashtags;
};

inline WindowGraphs load_window_graphs(const Workspace& ws, const std::string& label) {
    const auto d = ws.stage_dir(label, "ingest");
    return {drop_isolated(read_bipartite((d / "users_edges.csv").string(), (d / "users_nodes.csv").string())),
            drop_isolated(read_bipartite((d / "hashtags_edges.csv").string(), (d / "hashtags_nodes.csv").string()))};
}

inline std::vector<fs::path> stage_files(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().filename() != "stage.json") out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<fs::path> stamped_outputs(const Workspace& ws, const StageStamp& s) {
    std::vector<fs::path> out;
    for (const auto& [key, _] : s.outputs) out.push_back(ws.absolute(key));
    return out;
}

}  // namespace detail

/// Fits the BiCM to both bipartite graphs of a window.
inline void run_fit(const PipelineConfig& cfg, const std::string& label) {
    const Workspace ws(cfg.output);
    const auto up = ws.require(ws.stage_dir(label, "ingest"), "ingest", label);
    const auto g = detail::load_window_graphs(ws, label);
    const auto dir = ws.fresh(ws.stage_dir(label, "fit"));
    const auto sc = detail::solver_config(cfg);
    const auto users = fit_bicm(degrees(g.users), sc);
    write_solution(users, g.users, (dir / "users_top.csv").string(), (dir / "users_bottom.csv").string(),
                   (dir / "users_summary.json").string());
    const auto tags = fit_bicm(degrees(g.hashtags), sc);
    write_solution(tags, g.hashtags, (dir / "hashtags_top.csv").string(), (dir / "hashtags_bottom.csv").string(),
                   (dir / "hashtags_summary.json").string());
    ws.write_stamp(dir, {"fit", label, ws.hashes(detail::stamped_outputs(ws, up)),
                         ws.hashes(detail::stage_files(dir))});
}

/// Validated projections: verified users (top layer of the user graph) and
/// hashtags (bottom layer of the hashtag graph).
inline void run_project(const PipelineConfig& cfg, const std::string& label) {
    const Workspace ws(cfg.output);
    const auto up_ingest = ws.require(ws.stage_dir(label, "ingest"), "ingest", label);
    const auto up_fit = ws.require(ws.stage_dir(label, "fit"), "fit", label);
    const auto g = detail::load_window_graphs(ws, label);
    const auto fd = ws.stage_dir(label, "fit");
    const auto users = read_solution(g.users, (fd / "users_top.csv").string(), (fd / "users_bottom.csv").string(),
                                     (fd / "users_summary.json").string());
    const auto tags = read_solution(g.hashtags, (fd / "hashtags_top.csv").string(),
                                    (fd / "hashtags_bottom.csv").string(), (fd / "hashtags_summary.json").string());
    const auto dir = ws.fresh(ws.stage_dir(label, "project"));
    const auto vu = validated_projection(g.users, users, Layer::top, cfg.significance);
    write_validated(vu, g.users.registry(Layer::top), (dir / "verified_edges.csv").string(),
                    (dir / "verified_summary.json").string());
    const auto vh = validated_projection(g.hashtags, tags, Layer::bottom, cfg.significance);
    write_validated(vh, g.hashtags.registry(Layer::bottom), (dir / "hashtags_edges.csv").string(),
                    (dir / "hashtags_summary.json").string());
    auto inputs = detail::stamped_outputs(ws, up_ingest);
    for (const auto& p : detail::stamped_outputs(ws, up_fit)) inputs.push_back(p);
    ws.write_stamp(dir, {"project", label, ws.hashes(inputs), ws.hashes(detail::stage_files(dir))});
}

/// Louvain on the validated verified projection, polarization of the other
/// users, and label propagation on the window's retweet network.
inline void run_communities(const PipelineConfig& cfg, const std::string& label) {
    const Workspace ws(cfg.output);
    const auto up_ingest = ws.require(ws.stage_dir(label, "ingest"), "ingest", label);
    const auto up_project = ws.require(ws.stage_dir(label, "project"), "project", label);
    const auto g = detail::load_window_graphs(ws, label);
    const auto verified = read_validated_graph((ws.stage_dir(label, "project") / "verified_edges.csv").string(),
                                               g.users.registry(Layer::top));
    if (verified.n_edges() == 0)
        throw std::domain_error("window " + label + ": validated verified-user projection has no edges");
    const auto retweets = read_interactions((ws.stage_dir(label, "ingest") / "retweets.csv").string());
    const Graph rg = retweet_network(retweets, true);

    const auto seeds = louvain(verified, {cfg.louvain_runs, derive_seed(cfg.seed, "louvain/" + label)});
    std::vector<Label> seed_labels(rg.n(), kUnlabeled);
    std::vector<bool> fixed(rg.n(), false);
    for (index_t v = 0; v < verified.n(); ++v)
        if (const auto u = rg.registry().find(verified.registry().id(v))) {
            seed_labels[*u] = seeds.labels[v];
            fixed[*u] = true;
        }
    const auto scores = polarization(rg, seed_labels);
    const auto polarized = assign_polarized(scores, rg.n(), cfg.polarization_threshold);
    std::vector<Label> initial = seed_labels;
    for (index_t u = 0; u < rg.n(); ++u)
        if (polarized[u] != kUnlabeled) initial[u] = polarized[u];

    PropagationOptions po;
    po.runs = cfg.propagation_runs;
    po.seed = derive_seed(cfg.seed, "propagation/" + label);
    po.weighted = cfg.weighted_propagation;
    po.max_sweeps = cfg.propagation_max_sweeps;
    po.unique_seed_labels = cfg.unique_seed_labels;
    auto assignment = label_propagation(rg, fixed, initial, po);
    assignment.modularity = seeds.modularity;
    for (const auto& s : scores) assignment.rho[s.user] = s.rho;

    const auto dir = ws.fresh(ws.stage_dir(label, "communities"));
    write_assignment(assignment, rg.registry(), (dir / "assignment.csv").string(), (dir / "summary.json").string());
    {
        std::ofstream out(dir / "verified_louvain.csv", std::ios::binary);
        csv::write_row(out, {"node_id", "label"});
        for (index_t v = 0; v < verified.n(); ++v)
            csv::write_row(out, {verified.registry().id(v), std::to_string(seeds.labels[v])});
    }
    auto inputs = detail::stamped_outputs(ws, up_ingest);
    for (const auto& p : detail::stamped_outputs(ws, up_project)) inputs.push_back(p);
    ws.write_stamp(dir, {"communities", label, ws.hashes(inputs), ws.hashes(detail::stage_files(dir))});
}

/// k-core shells, quantile tiers, surprise core-periphery split and
/// innermost-shell sub-communities of the validated hashtag projection.
inline void run_mesoscale(const PipelineConfig& cfg, const std::string& label) {
    const Workspace ws(cfg.output);
    const auto up_ingest = ws.require(ws.stage_dir(label, "ingest"), "ingest", label);
    const auto up_project = ws.require(ws.stage_dir(label, "project"), "project", label);
    const auto g = detail::load_window_graphs(ws, label);
    const auto hg = read_validated_graph((ws.stage_dir(label, "project") / "hashtags_edges.csv").string(),
                                         g.hashtags.registry(Layer::bottom));
    const auto dec = k_core_decompose(hg);
    const auto tiers = quantile_tiers(dec);
    CorePeripheryOptions co;
    co.restarts = cfg.core_restarts;
    co.seed = derive_seed(cfg.seed, "core_periphery/" + label);
    const auto split = core_periphery(hg, co);
    const double jac = core_shell_jaccard(split, dec);
    const auto sub = innermost_subcommunities(hg, dec, {cfg.louvain_runs, derive_seed(cfg.seed, "shell/" + label)});
    const auto dir = ws.fresh(ws.stage_dir(label, "mesoscale"));
    write_mesoscale(hg, dec, tiers, split, sub, jac, (dir / "mesoscale.csv").string(), (dir / "summary.json").string());
    auto inputs = detail::stamped_outputs(ws, up_ingest);
    for (const auto& p : detail::stamped_outputs(ws, up_project)) inputs.push_back(p);
    ws.write_stamp(dir, {"mesoscale", label, ws.hashes(inputs), ws.hashes(detail::stage_files(dir))});
}

/// Per-community statistics, hashtag betweenness ranking and activity series. For
/// the aggregate window the activity series spans every other window.
inline void run_metrics(const PipelineConfig& cfg, const std::string& label) {
    const Workspace ws(cfg.output);
    const auto up_top = ws.require(ws.ingest_dir(), "ingest", "");
    const auto up_ingest = ws.require(ws.stage_dir(label, "ingest"), "ingest", label);
    const auto up_project = ws.require(ws.stage_dir(label, "project"), "project", label);
    const auto up_comm = ws.require(ws.stage_dir(label, "communities"), "communities", label);
    const auto wi = ws.stage_dir(label, "ingest");
    const auto retweets = read_interactions((wi / "retweets.csv").string());
    const auto mentions = read_interactions((wi / "mentions.csv").string());
    const Graph rg = retweet_network(retweets, false);

    const auto table = csv::read_file((ws.stage_dir(label, "communities") / "assignment.csv").string());
    const auto ci = table.column("node_id"), cl = table.column("label"), cr = table.column("rho");
    std::vector<Label> labels(rg.n(), kUnlabeled);
    std::vector<std::optional<double>> rho(rg.n());
    std::unordered_map<std::string, Label> by_id;
    for (const auto& row : table.rows) {
        const auto u = rg.registry().find(row[ci]);
        if (!u) throw DependencyError("assignment lists unknown user " + row[ci] + "; re-run `vnet communities`");
        labels[*u] = csv::parse_int<Label>(row[cl]);
        if (!row[cr].empty()) rho[*u] = csv::parse_double(row[cr]);
        by_id[row[ci]] = labels[*u];
    }
    const auto stats = community_stats(rg, labels, rho, retweets, mentions, cfg.self_reference_mode());

    const auto g = detail::load_window_graphs(ws, label);
    const auto hg = read_validated_graph((ws.stage_dir(label, "project") / "hashtags_edges.csv").string(),
                                         g.hashtags.registry(Layer::bottom));
    const auto bc = betweenness(hg);

    const auto records = detail::read_records(ws.ingest_dir() / "records.jsonl");
    auto windows = detail::read_windows(ws.ingest_dir() / "windows.csv");
    if (label == "all") {
        if (windows.size() > 1) windows.pop_back();
    } else {
        std::erase_if(windows, [&](const TimeWindow& w) { return w.label != label; });
    }
    const auto activity = activity_series(records, windows, by_id);

    const auto dir = ws.fresh(ws.stage_dir(label, "metrics"));
    write_community_stats(stats, (dir / "community_stats.csv").string());
    write_betweenness(hg, bc, cfg.top_k, (dir / "betweenness.csv").string());
    write_activity(activity, (dir / "activity.csv").string());
    std::vector<fs::path> inputs;
    for (const auto* s : {&up_top, &up_ingest, &up_project, &up_comm})
        for (const auto& p : detail::stamped_outputs(ws, *s)) inputs.push_back(p);
    ws.write_stamp(dir, {"metrics", label, ws.hashes(inputs), ws.hashes(detail::stage_files(dir))});
}

// ---------------------------------------------------------------------------
// Full run

inline const std::vector<std::string>& window_stages() {
    static const std::vector<std::string> s = {"fit", "project", "communities", "mesoscale", "metrics"};
    return s;
}

inline void run_window_stage(const PipelineConfig& cfg, const std::string& stage, const std::string& label) {
    if (stage == "fit") return run_fit(cfg, label);
    if (stage == "project") return run_project(cfg, label);
    if (stage == "communities") return run_communities(cfg, label);
    if (stage == "mesoscale") return run_mesoscale(cfg, label);
    if (stage == "metrics") return run_metrics(cfg, label);
    throw std::invalid_argument("unknown stage " + stage);
}

struct StageStatus {
    std::string stage;
    std::string window;
    std::string status;  // complete | failed | skipped
    std::string error;
    double seconds = 0.0;
};

struct RunResult {
    std::vector<StageStatus> stages;
    bool ok() const {
        return std::all_of(stages.begin(), stages.end(), [](const auto& s) { return s.status == "complete"; });
    }
};

/// Every regular file under the output root except the manifest and the
/// timing log, as (relative path, SHA-256), sorted by path.
inline std::vector<std::pair<std::string, std::string>> output_hashes(const fs::path& root) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file()) continue;
        const auto rel = e.path().lexically_relative(root).generic_string();
        if (rel == "manifest.json" || rel == "run_timings.json") continue;
        out.emplace_back(rel, sha256_file(e.path()));
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Runs ingest and then every window stage, windows in parallel. Writes
/// manifest.json (configuration, stage status, output hashes) and
/// run_timings.json. Stage failures are recorded and skip the remaining
/// stages of that window.
inline RunResult run_pipeline(const PipelineConfig& cfg) {
    cfg.validate();
    if (cfg.input.empty() || !fs::is_regular_file(cfg.input))
        throw ConfigError("input file '" + cfg.input + "' does not exist");
    fs::create_directories(cfg.output);
    fs::remove(fs::path(cfg.output) / "manifest.json");
    RunResult result;
    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    StageStatus ingest{"ingest", "", "complete", "", 0.0};
    std::vector<std::string> labels;
    try {
        labels = run_ingest(cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        ingest.status = "failed";
        ingest.error = e.what();
    }
    ingest.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.stages.push_back(ingest);

    const auto& stages = window_stages();
    std::vector<std::vector<StageStatus>> per_window(labels.size());
    parallel_for(labels.size(), [&](std::size_t w) {
        bool failed = false;
        for (const auto& stage : stages) {
            StageStatus st{stage, labels[w], "skipped", "", 0.0};
            if (!failed) {
                const auto s0 = clock::now();
                try {
                    run_window_stage(cfg, stage, labels[w]);
                    st.status = "complete";
                } catch (const std::exception& e) {
                    st.status = "failed";
                    st.error = e.what();
                    failed = true;
                }
                st.seconds = std::chrono::duration<double>(clock::now() - s0).count();
            }
            per_window[w].push_back(std::move(st));
        }
    });
    for (auto& v : per_window)
        for (auto& s : v) result.stages.push_back(std::move(s));

    const fs::path root(cfg.output);
    nlohmann::ordered_json timings = nlohmann::ordered_json::array();
    for (const auto& s : result.stages)
        timings.push_back({{"stage", s.stage}, {"window", s.window}, {"seconds", s.seconds}});
    detail::write_json(root / "run_timings.json", timings);

    nlohmann::ordered_json m;
    m["tool"] = "vnet";
    m["version"] = kVersion;
    m["seed"] = cfg.seed;
    nlohmann::json cj = cfg;
    m["config"] = cj;
    m["windows"] = labels;
    nlohmann::ordered_json st = nlohmann::ordered_json::array();
    for (const auto& s : result.stages) {
        nlohmann::ordered_json e{{"stage", s.stage}, {"window", s.window}, {"status", s.status}};
        if (!s.error.empty()) e["error"] = s.error;
        st.push_back(e);
    }
    m["stages"] = st;
    m["complete"] = result.ok();
    nlohmann::ordered_json outs = nlohmann::ordered_json::array();
    for (const auto& [path, hash] : output_hashes(root)) outs.push_back({{"path", path}, {"sha256", hash}});
    m["outputs"] = outs;
    detail::write_json(root / "manifest.json", m);
    return result;
}

}  // namespace vnet
