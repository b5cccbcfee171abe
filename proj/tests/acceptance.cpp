// Acceptance run: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "oracles.hpp"
#include "vnet/vnet.hpp"

using namespace vnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double max_residual(const BicmSolution& s, const DegreeSequence& d) {
    double worst = 0.0;
    for (index_t i = 0; i < d.top.size(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(d.top[i]) - s.expected_degree(Layer::top, i)));
    for (index_t a = 0; a < d.bottom.size(); ++a)
        worst = std::max(worst, std::abs(static_cast<double>(d.bottom[a]) - s.expected_degree(Layer::bottom, a)));
    return worst;
}

Outcome bicm_degree_reproduction() {
    Rng rng(1001);
    double worst = 0.0, slowest = 0.0;
    std::size_t failures = 0;
    for (int k = 0; k < 50; ++k) {
        const std::size_t nt = k % 5 == 0 ? 500 : 50 + uniform_index(rng, 451);
        const std::size_t nb = k % 5 == 0 ? 1000 : 100 + uniform_index(rng, 901);
        const double density = 0.005 * std::pow(40.0, uniform01(rng));
        const auto g = oracle::random_bipartite(nt, nb, density, rng);
        const auto d = degrees(g);
        const auto t0 = Clock::now();
        try {
            const auto sol = fit_bicm(d);
            slowest = std::max(slowest, seconds_since(t0));
            worst = std::max(worst, max_residual(sol, d));
        } catch (const std::exception&) {
            ++failures;
        }
    }
    return {failures == 0 && worst <= 1e-8 && slowest < 10.0,
            fmt("50 graphs, max residual %.2e, slowest fit %.3f s, %zu failures", worst, slowest, failures)};
}

Outcome poisson_binomial_exactness() {
    Rng rng(1002);
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        std::vector<double> p(1 + uniform_index(rng, 15));
        for (auto& x : p) x = uniform01(rng);
        for (std::size_t v = 0; v <= p.size(); ++v)
            worst = std::max(worst, std::abs(poisson_binomial_tail(p, v) - oracle::poisson_binomial_tail(p, v)));
    }
    std::size_t checks = 0, misses = 0;
    double worst_z = 0.0;
    const std::size_t samples = 1000000;
    for (std::size_t len : {100u, 700u, 2000u}) {
        std::vector<double> p(len);
        for (auto& x : p) x = 0.3 * uniform01(rng) * uniform01(rng);
        std::vector<std::size_t> hist(len + 1, 0);
        Rng mc(derive_seed(1002, len));
        for (std::size_t s = 0; s < samples; ++s) {
            std::size_t v = 0;
            for (double q : p) v += bernoulli(mc, q);
            ++hist[v];
        }
        double mean = 0.0, var = 0.0;
        for (double q : p) {
            mean += q;
            var += q * (1.0 - q);
        }
        for (double z : {0.0, 1.0, 2.0, 3.0}) {
            const auto v = static_cast<std::size_t>(std::ceil(mean + z * std::sqrt(var)));
            std::size_t above = 0;
            for (std::size_t j = v; j <= len; ++j) above += hist[j];
            const double est = static_cast<double>(above) / samples;
            const double exact = poisson_binomial_tail(p, v);
            const double se = std::sqrt(exact * (1.0 - exact) / samples);
            const double dev = std::abs(est - exact) / se;
            worst_z = std::max(worst_z, dev);
            ++checks;
            misses += dev > 3.0;
        }
    }
    return {worst <= 1e-12 && misses == 0,
            fmt("enumeration max error %.2e; Monte Carlo %zu tails, max deviation %.2f SE", worst, checks, worst_z)};
}

Outcome fdr_calibration() {
    Rng rng(1003);
    const auto base = oracle::random_bipartite(80, 120, 0.08, rng);
    const auto sol = fit_bicm(degrees(base));
    std::size_t good = 0;
    double worst = 0.0;
    for (std::uint64_t rep = 0; rep < 100; ++rep) {
        const auto sample = drop_isolated(sample_graph(sol, derive_seed(1003, rep)));
        const auto fitted = fit_bicm(degrees(sample));
        const auto vp = validated_projection(sample, fitted, Layer::bottom, 0.01);
        const double n = static_cast<double>(vp.n_hypotheses);
        const double frac = static_cast<double>(vp.edges.size()) / n;
        worst = std::max(worst, frac);
        good += frac <= 0.01 + 3.0 * std::sqrt(0.01 / n);
    }
    return {good >= 95, fmt("%zu/100 repetitions within bound, largest validated fraction %.2e", good, worst)};
}

Outcome validated_subset_of_naive() {
    Rng rng(1004);
    std::size_t graphs = 0, violations = 0, validated = 0;
    std::vector<BipartiteGraph> tests;
    for (int k = 0; k < 15; ++k) tests.push_back(oracle::random_bipartite(30 + k * 5, 40 + k * 3, 0.05 + 0.01 * k, rng));
    for (std::uint64_t s = 0; s < 5; ++s) {
        BlockmodelConfig bc;
        bc.n_groups = 3;
        bc.top_per_group = 30;
        bc.bottom_per_group = 20;
        bc.p_in = 0.3;
        bc.p_out = 0.02;
        bc.seed = s;
        tests.push_back(drop_isolated(generate_bipartite_blockmodel(bc).graph));
    }
    for (const auto& g : tests) {
        const auto sol = fit_bicm(degrees(g));
        for (Layer layer : {Layer::top, Layer::bottom}) {
            const auto naive = naive_projection(g, layer);
            for (double t : {0.01, 0.5, 0.99}) {
                const auto vp = validated_projection(g, sol, layer, t);
                ++graphs;
                validated += vp.edges.size();
                for (const auto& e : vp.edges)
                    violations += !naive.has_edge(e.alpha, e.beta) || v_motif_count(g, e.alpha, e.beta, layer) == 0;
            }
        }
    }
    return {violations == 0, fmt("%zu projections, %zu validated links, %zu outside the naive projection", graphs,
                                 validated, violations)};
}

Outcome modularity_oracle() {
    Rng rng(1005);
    double worst = 0.0;
    std::vector<Graph> graphs;
    for (int k = 0; k < 10; ++k) graphs.push_back(oracle::random_graph(40 + 10 * k, 0.05 + 0.01 * k, rng));
    {
        BlockmodelConfig bc;
        bc.seed = 3;
        const auto pb = generate_bipartite_blockmodel(bc);
        graphs.push_back(naive_projection(pb.graph, Layer::top));
    }
    for (const auto& g : graphs) {
        if (g.n_edges() == 0) continue;
        const auto res = louvain(g, {50, 7});
        worst = std::max(worst, std::abs(res.modularity - oracle::modularity(g, res.labels)));
    }
    std::vector<std::pair<index_t, index_t>> e;
    for (index_t base : {0u, 4u})
        for (index_t u = base; u < base + 4; ++u)
            for (index_t v = u + 1; v < base + 4; ++v) e.emplace_back(u, v);
    const auto cliques = louvain(Graph::from_edges(8, e), {50, 7});
    const std::size_t k = community_count(cliques.labels);
    return {worst <= 1e-12 && k == 2 && std::abs(cliques.modularity - 0.5) <= 1e-12,
            fmt("max |Q - oracle| %.2e over %zu graphs; two 4-cliques: %zu communities, Q = %.15f", worst,
                graphs.size(), k, cliques.modularity)};
}

/// Fraction of planted users whose found label matches under the best one-to-one relabeling.
double best_match_accuracy(const std::vector<std::pair<std::size_t, Label>>& pairs, std::size_t n_planted) {
    Label n_found = 0;
    for (const auto& [p, f] : pairs) n_found = std::max(n_found, static_cast<Label>(f + 1));
    std::vector<std::vector<std::size_t>> confusion(n_planted, std::vector<std::size_t>(n_found, 0));
    for (const auto& [p, f] : pairs)
        if (f != kUnlabeled) ++confusion[p][f];
    std::size_t best = 0;
    std::vector<bool> used(n_found, false);
    std::function<void(std::size_t, std::size_t)> go = [&](std::size_t p, std::size_t acc) {
        if (p == n_planted) {
            best = std::max(best, acc);
            return;
        }
        go(p + 1, acc);
        for (Label f = 0; f < n_found; ++f)
            if (!used[f]) {
                used[f] = true;
                go(p + 1, acc + confusion[p][f]);
                used[f] = false;
            }
    };
    go(0, 0);
    return static_cast<double>(best) / static_cast<double>(pairs.size());
}

struct PipelineRun {
    fs::path output;
    SyntheticCorpus corpus;
    double seconds = 0.0;
    bool ok = false;
};

PipelineRun& planted_run() {
    static PipelineRun run = [] {
        PipelineRun r;
        const fs::path dir = fs::path(VNET_TEST_TMP) / "acceptance";
        fs::remove_all(dir);
        fs::create_directories(dir);
        PlantedConfig pc;
        r.corpus = generate_corpus(pc);
        {
            std::ofstream out(dir / "corpus.jsonl", std::ios::binary);
            write_corpus(out, r.corpus.records);
        }
        PipelineConfig cfg;
        cfg.input = (dir / "corpus.jsonl").string();
        cfg.output = (dir / "run").string();
        r.output = cfg.output;
        const auto t0 = Clock::now();
        r.ok = run_pipeline(cfg).ok();
        r.seconds = seconds_since(t0);
        return r;
    }();
    return run;
}

PipelineConfig planted_config() {
    PipelineConfig cfg;
    cfg.input = (fs::path(VNET_TEST_TMP) / "acceptance" / "corpus.jsonl").string();
    cfg.output = planted_run().output.string();
    return cfg;
}

Outcome planted_recovery() {
    auto& run = planted_run();
    if (!run.ok) return {false, "pipeline run failed"};
    const auto table = csv::read_file((run.output / "windows" / "all" / "communities" / "assignment.csv").string());
    const auto ci = table.column("node_id"), cl = table.column("label");
    std::map<std::string, Label> found;
    for (const auto& row : table.rows) found[row[ci]] = csv::parse_int<Label>(row[cl]);
    const std::set<std::string> verified(run.corpus.verified.begin(), run.corpus.verified.end());
    std::vector<std::pair<std::size_t, Label>> pairs;
    for (const auto& [id, planted] : run.corpus.planted) {
        if (verified.count(id)) continue;
        const auto it = found.find(id);
        pairs.emplace_back(planted, it == found.end() ? kUnlabeled : it->second);
    }
    const double acc = best_match_accuracy(pairs, PlantedConfig{}.n_communities);
    return {pairs.size() >= 2000 && acc >= 0.9 && run.seconds < 300.0,
            fmt("%zu non-verified users, %.2f%% recovered, pipeline %.1f s", pairs.size(), 100.0 * acc, run.seconds)};
}

Outcome polarization_boundary() {
    bool ok = true;
    auto star_config = [](std::size_t in_c, std::size_t other) {
        std::vector<std::pair<index_t, index_t>> e;
        std::vector<Label> seeds(1 + in_c + other, 0);
        seeds[0] = kUnlabeled;
        for (index_t v = 1; v <= in_c + other; ++v) {
            e.emplace_back(0, v);
            if (v > in_c) seeds[v] = 1;
        }
        return std::make_pair(Graph::from_edges(seeds.size(), e), seeds);
    };
    std::string detail;
    for (auto [in_c, other, expect] : std::vector<std::tuple<std::size_t, std::size_t, bool>>{
             {9, 1, true}, {90, 10, true}, {899, 101, false}, {89, 10, false}, {8, 1, false}, {10, 0, true}}) {
        const auto [g, seeds] = star_config(in_c, other);
        const auto s = polarization(g, seeds);
        const bool assigned = assign_polarized(s, g.n(), 0.9)[0] == 0;
        ok &= s.size() == 1 && assigned == expect;
        detail += fmt("%zu/%zu->%s ", in_c, in_c + other, assigned ? "in" : "out");
    }
    const std::vector<PolarizationScore> edge = {{0, 0.9, 0}, {1, std::nextafter(0.9, 0.0), 0}};
    const auto l = assign_polarized(edge, 2, 0.9);
    ok &= l[0] == 0 && l[1] == kUnlabeled;

    Rng rng(1007);
    std::size_t compared = 0, mismatches = 0;
    for (int k = 0; k < 20; ++k) {
        const auto g = oracle::random_graph(80, 0.08, rng);
        std::vector<Label> seeds(g.n(), kUnlabeled);
        for (index_t u = 0; u < g.n(); ++u)
            if (bernoulli(rng, 0.3)) seeds[u] = static_cast<Label>(uniform_index(rng, 3));
        const auto ref = oracle::polarization(g, seeds);
        const auto got = polarization(g, seeds);
        mismatches += got.size() != ref.size();
        for (const auto& s : got) {
            ++compared;
            const auto it = ref.find(s.user);
            mismatches += it == ref.end() || it->second.first != s.rho || it->second.second != s.target_community;
        }
    }
    ok &= mismatches == 0;
    return {ok, detail + fmt("| 0.9 in, 0.9-ulp out | %zu rho values, %zu mismatches", compared, mismatches)};
}

Outcome betweenness_oracle() {
    Rng rng(1008);
    double worst = 0.0;
    for (int k = 0; k < 30; ++k) {
        const std::size_t n = 3 + uniform_index(rng, 58);
        const auto g = oracle::random_graph(n, 0.03 + 0.2 * uniform01(rng), rng);
        const auto bc = betweenness(g);
        const auto ref = oracle::betweenness(g);
        for (index_t v = 0; v < n; ++v) worst = std::max(worst, std::abs(bc[v] - ref[v]));
    }
    std::vector<std::pair<index_t, index_t>> e;
    for (index_t v = 1; v < 10; ++v) e.emplace_back(0, v);
    const auto star = betweenness(Graph::from_edges(10, e));
    double leaves = 0.0;
    for (index_t v = 1; v < 10; ++v) leaves = std::max(leaves, star[v]);
    return {worst <= 1e-12 && std::abs(star[0] - 1.0) <= 1e-12 && leaves == 0.0,
            fmt("30 graphs, max error %.2e; star center %.15f, max leaf %.1f", worst, star[0], leaves)};
}

Outcome kcore_oracle() {
    Rng rng(1009);
    std::size_t mismatched = 0;
    for (int k = 0; k < 30; ++k) {
        const std::size_t n = 2 + uniform_index(rng, 99);
        const auto g = oracle::random_graph(n, 0.02 + 0.25 * uniform01(rng), rng);
        mismatched += k_core_decompose(g).coreness != oracle::coreness(g);
    }
    const auto clique = k_core_decompose(Graph::from_edges(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}));
    const bool clique_ok = clique.coreness == std::vector<std::size_t>{3, 3, 3, 3};
    return {mismatched == 0 && clique_ok,
            fmt("30 graphs, %zu mismatches; 4-clique coreness %s", mismatched, clique_ok ? "3,3,3,3" : "wrong")};
}

Outcome core_shell_agreement() {
    bool ok = true;
    double min_jac = 1.0;
    std::size_t beaten_all = 0, beaten_shell = 0;
    const std::size_t instances = 10;
    for (std::uint64_t s = 0; s < instances; ++s) {
        const auto pc = generate_core_periphery(30, 100, 0.5, 2, s);
        const auto dec = k_core_decompose(pc.graph);
        const auto split = core_periphery(pc.graph, {20, s, 200});
        const double jac = core_shell_jaccard(split, dec);
        std::vector<bool> shell(pc.graph.n(), false);
        for (index_t v : dec.innermost_shell()) shell[v] = true;
        const double all_core = split_surprise(pc.graph, std::vector<bool>(pc.graph.n(), true));
        const double max_shell = split_surprise(pc.graph, shell);
        min_jac = std::min(min_jac, jac);
        beaten_all += split.surprise < all_core;
        beaten_shell += split.surprise <= max_shell;
        ok &= jac > 0.6 && split.surprise < all_core && split.surprise <= max_shell;
    }
    return {ok, fmt("%zu graphs, min Jaccard %.3f; beats all-core %zu/%zu, at least matches max-shell %zu/%zu",
                    instances, min_jac, beaten_all, instances, beaten_shell, instances)};
}

Outcome h_index_oracle() {
    Rng rng(1011);
    std::size_t mismatches = 0;
    for (int k = 0; k < 1000; ++k) {
        std::vector<std::size_t> c(uniform_index(rng, 200));
        const std::size_t hi = 1 + uniform_index(rng, 300);
        for (auto& x : c) x = uniform_index(rng, hi);
        mismatches += h_index(c) != oracle::h_index(c);
    }
    const auto hand = h_index(std::vector<std::size_t>{5, 3, 3, 1});
    return {mismatches == 0 && hand == 3, fmt("1000 lists, %zu mismatches; [5,3,3,1] -> %zu", mismatches, hand)};
}

Outcome determinism() {
    auto& run = planted_run();
    if (!run.ok) return {false, "pipeline run failed"};
    std::map<std::string, std::string> first;
    for (const auto& e : fs::recursive_directory_iterator(run.output))
        if (e.is_regular_file() && e.path().filename() != "run_timings.json")
            first[fs::relative(e.path(), run.output).generic_string()] = slurp(e.path());
    fs::remove_all(run.output);
    const bool ok = run_pipeline(planted_config()).ok();
    std::map<std::string, std::string> second;
    for (const auto& e : fs::recursive_directory_iterator(run.output))
        if (e.is_regular_file() && e.path().filename() != "run_timings.json")
            second[fs::relative(e.path(), run.output).generic_string()] = slurp(e.path());
    std::size_t differing = 0;
    for (const auto& [path, content] : first) {
        const auto it = second.find(path);
        differing += it == second.end() || it->second != content;
    }
    differing += second.size() > first.size() ? second.size() - first.size() : 0;
    const bool manifest_same = first.count("manifest.json") && first["manifest.json"] == second["manifest.json"];
    return {ok && differing == 0 && manifest_same,
            fmt("%zu files compared, %zu differ, manifest %s", first.size(), differing,
                manifest_same ? "identical" : "differs")};
}

Outcome levenshtein_merging() {
    Rng rng(1013);
    const auto base = generate_vocabulary(8000, 5, rng, 8, 12);
    std::map<std::string, std::size_t> counts;
    for (std::size_t i = 0; i < base.size(); ++i) counts[base[i]] = 5 + uniform_index(rng, 200);
    while (counts.size() < 10000) {
        std::string t = base[uniform_index(rng, base.size())];
        const std::size_t edits = 1 + uniform_index(rng, 2);
        for (std::size_t e = 0; e < edits; ++e) t = with_typo(t, rng);
        if (!counts.count(t)) counts[t] = 1 + uniform_index(rng, 4);
    }
    const auto t0 = Clock::now();
    const auto m = build_merge_map(counts, 2);
    const double secs = seconds_since(t0);

    std::size_t bad = 0;
    std::map<std::string, std::set<std::string>> classes;
    for (const auto& [raw, rep] : m.canonical) {
        classes[rep].insert(raw);
        bad += m.resolve(rep) != rep;  // idempotent
    }
    for (const auto& [rep, members] : classes) {
        for (const auto& w : members) {
            bad += counts.at(w) > counts.at(rep) || (counts.at(w) == counts.at(rep) && w < rep);
            if (members.size() > 1) {
                bool linked = false;
                for (const auto& o : members)
                    if (o != w && oracle::levenshtein_dp(w, o) <= 2) linked = true;
                bad += !linked;
            }
        }
    }
    std::set<std::set<std::string>> got;
    for (auto& [_, members] : classes) got.insert(members);
    std::vector<std::string> words;
    for (const auto& [w, _] : counts) words.push_back(w);
    const bool same = got == oracle::merge_classes(words, 2);
    return {bad == 0 && same && m.canonical.size() == 10000,
            fmt("%zu hashtags into %zu classes in %.2f s, %zu invariant violations, classes %s oracle",
                m.canonical.size(), classes.size(), secs, bad, same ? "equal" : "differ from")};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"BiCM degree reproduction", bicm_degree_reproduction},
        {"Poisson-Binomial exactness", poisson_binomial_exactness},
        {"FDR calibration", fdr_calibration},
        {"validated projection within naive projection", validated_subset_of_naive},
        {"modularity oracle", modularity_oracle},
        {"planted community recovery", planted_recovery},
        {"polarization threshold boundary", polarization_boundary},
        {"betweenness oracle", betweenness_oracle},
        {"k-core oracle", kcore_oracle},
        {"core/innermost-shell agreement", core_shell_agreement},
        {"h-index oracle", h_index_oracle},
        {"pipeline determinism", determinism},
        {"Levenshtein hashtag merging", levenshtein_merging},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] %zu: %s (%s) [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
