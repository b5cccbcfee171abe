// Command-line front end: one subcommand per pipeline stage plus `run` and `synth`.
//
// Exit codes: 0 success, 2 configuration error, 3 dependency error, 4 stage failure.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vnet/vnet.hpp"

namespace {

enum Exit : int { kOk = 0, kConfig = 2, kDependency = 3, kFailure = 4 };

/// Pipeline flags registered on a subcommand. Values given on the command
/// line override those of `--config`, which override the defaults.
struct PipelineFlags {
    std::string config_path;
    vnet::PipelineConfig values;
    std::vector<std::function<void(vnet::PipelineConfig&)>> apply;
    std::vector<CLI::Option*> options;

    template <class T>
    void add(CLI::App* app, const std::string& flag, T vnet::PipelineConfig::*field, const std::string& help) {
        auto* opt = app->add_option(flag, values.*field, help);
        apply.push_back([this, opt, field](vnet::PipelineConfig& c) {
            if (opt->count() > 0) c.*field = values.*field;
        });
    }

    void add_bool(CLI::App* app, const std::string& flag, bool vnet::PipelineConfig::*field, const std::string& help) {
        auto* opt = app->add_option(flag, values.*field, help)->expected(0, 1)->default_str("true");
        opt->default_val(values.*field);
        apply.push_back([this, opt, field](vnet::PipelineConfig& c) {
            if (opt->count() > 0) c.*field = values.*field;
        });
    }

    void attach(CLI::App* app) {
        app->add_option("--config", config_path, "JSON pipeline configuration");
        add(app, "--input", &vnet::PipelineConfig::input, "Line-delimited JSON interaction records");
        add(app, "--output", &vnet::PipelineConfig::output, "Output directory");
        add(app, "--windows", &vnet::PipelineConfig::windows, "monthly | aggregate | explicit");
        add(app, "--significance", &vnet::PipelineConfig::significance, "FDR significance level t");
        add(app, "--polarization-threshold", &vnet::PipelineConfig::polarization_threshold,
            "Minimum polarization index for assignment");
        add(app, "--louvain-runs", &vnet::PipelineConfig::louvain_runs, "Reshuffled Louvain runs");
        add(app, "--propagation-runs", &vnet::PipelineConfig::propagation_runs, "Label propagation runs");
        add(app, "--levenshtein-distance", &vnet::PipelineConfig::levenshtein_distance,
            "Maximum edit distance for hashtag merging");
        add(app, "--solver-tolerance", &vnet::PipelineConfig::solver_tolerance, "BiCM degree residual tolerance");
        add(app, "--solver-max-iterations", &vnet::PipelineConfig::solver_max_iterations, "BiCM iteration cap");
        add(app, "--seed", &vnet::PipelineConfig::seed, "Master random seed");
        add_bool(app, "--weighted-propagation", &vnet::PipelineConfig::weighted_propagation,
                 "Weight propagation votes by retweet counts");
        add_bool(app, "--unique-seed-labels", &vnet::PipelineConfig::unique_seed_labels,
                 "Start propagation from one label per verified user");
        add_bool(app, "--keep-hashtagless-users", &vnet::PipelineConfig::keep_hashtagless_users,
                 "Keep users without hashtags in the hashtag graph");
        add(app, "--propagation-max-sweeps", &vnet::PipelineConfig::propagation_max_sweeps,
            "Sweep cap per propagation run");
        add(app, "--core-restarts", &vnet::PipelineConfig::core_restarts, "Core-periphery optimizer restarts");
        add(app, "--top-k", &vnet::PipelineConfig::top_k, "Rows flagged in the betweenness ranking");
        add(app, "--self-reference", &vnet::PipelineConfig::self_reference, "authored | involving");
    }

    vnet::PipelineConfig resolve() const {
        vnet::PipelineConfig c;
        if (!config_path.empty()) c = vnet::load_config(config_path);
        for (const auto& f : apply) f(c);
        c.validate();
        return c;
    }
};

std::vector<std::string> selected_windows(const vnet::PipelineConfig& cfg, const std::string& only) {
    auto labels = vnet::ingested_windows(cfg);
    if (only.empty()) return labels;
    if (std::find(labels.begin(), labels.end(), only) == labels.end())
        throw vnet::DependencyError("window '" + only + "' was not produced by `vnet ingest`");
    return {only};
}

int write_h_index(const std::string& input, const std::string& output) {
    const auto t = vnet::csv::read_file(input);
    const auto cu = t.column("user"), cr = t.column("retweets");
    std::map<std::string, std::vector<std::size_t>> per_user;
    for (const auto& row : t.rows) per_user[row[cu]].push_back(vnet::csv::parse_int<std::size_t>(row[cr]));
    std::vector<std::pair<std::string, std::size_t>> h;
    for (const auto& [u, counts] : per_user) h.emplace_back(u, vnet::h_index(counts));
    std::stable_sort(h.begin(), h.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::ofstream out(output, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + output);
    vnet::csv::write_row(out, {"user", "h_index"});
    for (const auto& [u, v] : h) vnet::csv::write_row(out, {u, std::to_string(v)});
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Validated-projection analysis of retweet and hashtag networks"};
    app.require_subcommand(1);
    app.set_version_flag("--version", vnet::kVersion);

    PipelineFlags flags;
    std::string window;

    auto* run = app.add_subcommand("run", "Run every stage on every window and write a manifest");
    flags.attach(run);

    auto* ingest = app.add_subcommand("ingest", "Parse records, merge hashtags, build window graphs");
    flags.attach(ingest);

    std::vector<CLI::App*> window_cmds;
    for (const auto& stage : vnet::window_stages()) {
        auto* cmd = app.add_subcommand(stage, "Run the " + stage + " stage on ingested windows");
        flags.attach(cmd);
        cmd->add_option("--window", window, "Restrict to one window label");
        window_cmds.push_back(cmd);
    }
    auto* metrics = app.get_subcommand("metrics");
    bool print_stats = false;
    std::string h_input;
    metrics->add_flag("--print-stats", print_stats, "Print the per-community table to stdout");
    metrics->add_option("--h-index", h_input, "CSV `user,retweets` (one row per message); writes h_index.csv");

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted communities");
    std::string synth_config, synth_output = "synthetic";
    std::uint64_t synth_seed = 0;
    synth->add_option("--config", synth_config, "JSON generator configuration");
    synth->add_option("--output", synth_output, "Output directory");
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "Override the generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (synth->parsed()) {
            vnet::PlantedConfig pc;
            if (!synth_config.empty()) {
                std::ifstream in(synth_config, std::ios::binary);
                if (!in) throw vnet::ConfigError("cannot read " + synth_config);
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(in);
                } catch (const nlohmann::json::exception& e) {
                    throw vnet::ConfigError(synth_config + ": " + e.what());
                }
                vnet::from_json(j, pc);
            }
            if (synth_seed_opt->count() > 0) pc.seed = synth_seed;
            pc.validate();
            const auto sc = vnet::generate_corpus(pc);
            std::filesystem::create_directories(synth_output);
            const std::filesystem::path dir(synth_output);
            {
                std::ofstream out(dir / "corpus.jsonl", std::ios::binary);
                vnet::write_corpus(out, sc.records);
            }
            vnet::write_ground_truth(sc, (dir / "ground_truth.csv").string());
            {
                std::ofstream out(dir / "synth_config.json", std::ios::binary);
                out << nlohmann::json(pc).dump(2) << '\n';
            }
            std::cout << sc.records.size() << " records, " << sc.planted.size() << " users written to " << synth_output
                      << '\n';
            return kOk;
        }

        const auto cfg = flags.resolve();
        if (run->parsed()) {
            const auto result = vnet::run_pipeline(cfg);
            for (const auto& s : result.stages)
                if (s.status != "complete")
                    std::cerr << s.stage << (s.window.empty() ? "" : " [" + s.window + "]") << ": " << s.status
                              << (s.error.empty() ? "" : " (" + s.error + ")") << '\n';
            return result.ok() ? kOk : kFailure;
        }
        if (ingest->parsed()) {
            const auto labels = vnet::run_ingest(cfg);
            std::cout << labels.size() << " windows ingested\n";
            return kOk;
        }
        for (auto* cmd : window_cmds) {
            if (!cmd->parsed()) continue;
            const auto labels = selected_windows(cfg, window);
            for (const auto& l : labels) vnet::run_window_stage(cfg, cmd->get_name(), l);
            if (cmd == metrics) {
                const vnet::Workspace ws(cfg.output);
                if (print_stats)
                    for (const auto& l : labels) {
                        std::ifstream in(ws.stage_dir(l, "metrics") / "community_stats.csv", std::ios::binary);
                        std::cout << "# window " << l << '\n' << in.rdbuf();
                    }
                if (!h_input.empty()) write_h_index(h_input, (ws.root() / "h_index.csv").string());
            }
            return kOk;
        }
    } catch (const vnet::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const vnet::DependencyError& e) {
        std::cerr << "dependency error: " << e.what() << '\n';
        return kDependency;
    } catch (const std::exception& e) {
        std::cerr << "stage failure: " << e.what() << '\n';
        return kFailure;
    }
    return kOk;
}
