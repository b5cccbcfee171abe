#pragma once

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vnet/common.hpp"
#include "vnet/csv.hpp"

namespace vnet {

/// Bidirectional map between external string ids and dense indices.
/// Indices are assigned in order of first insertion.
class NodeRegistry {
public:
    index_t add(std::string_view id) {
        auto it = index_.find(std::string(id));
        if (it != index_.end()) return it->second;
        const auto idx = static_cast<index_t>(ids_.size());
        ids_.emplace_back(id);
        index_.emplace(ids_.back(), idx);
        return idx;
    }

    std::optional<index_t> find(std::string_view id) const {
        auto it = index_.find(std::string(id));
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    const std::string& id(index_t i) const { return ids_.at(i); }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return ids_.size(); }

    static NodeRegistry numbered(std::size_t n) {
        NodeRegistry r;
        for (std::size_t i = 0; i < n; ++i) r.add(std::to_string(i));
        return r;
    }

private:
    std::vector<std::string> ids_;
    std::unordered_map<std::string, index_t> index_;
};

/// Observed degrees: k_i for top nodes, h_a for bottom nodes.
struct DegreeSequence {
    std::vector<std::size_t> top;
    std::vector<std::size_t> bottom;

    std::size_t edge_count() const {
        return std::accumulate(top.begin(), top.end(), std::size_t{0});
    }
};

using BipartiteEdge = std::pair<index_t, index_t>;

/// Unweighted bipartite graph. The biadjacency matrix is stored twice, as
/// sorted row lists (top -> bottom) and column lists (bottom -> top).
class BipartiteGraph {
public:
    BipartiteGraph() { row_off_.assign(1, 0); col_off_.assign(1, 0); }

    BipartiteGraph(NodeRegistry top, NodeRegistry bottom, std::vector<BipartiteEdge> edges)
        : top_(std::move(top)), bottom_(std::move(bottom)) {
        std::sort(edges.begin(), edges.end());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
        for (auto [i, a] : edges)
            if (i >= top_.size() || a >= bottom_.size())
                throw std::out_of_range("bipartite edge references unknown node");
        fill_csr(edges, top_.size(), row_off_, row_adj_, false);
        fill_csr(edges, bottom_.size(), col_off_, col_adj_, true);
    }

    std::size_t n_top() const noexcept { return top_.size(); }
    std::size_t n_bottom() const noexcept { return bottom_.size(); }
    std::size_t n_edges() const noexcept { return row_adj_.size(); }
    std::size_t size(Layer l) const noexcept { return l == Layer::top ? n_top() : n_bottom(); }

    const NodeRegistry& registry(Layer l) const noexcept { return l == Layer::top ? top_ : bottom_; }

    /// Neighbors (in the opposite layer) of node `i` of layer `l`, ascending.
    std::span<const index_t> neighbors(Layer l, index_t i) const {
        const auto& off = l == Layer::top ? row_off_ : col_off_;
        const auto& adj = l == Layer::top ? row_adj_ : col_adj_;
        return {adj.data() + off.at(i), adj.data() + off.at(i + 1)};
    }

    std::size_t degree(Layer l, index_t i) const { return neighbors(l, i).size(); }

    bool has_edge(index_t top, index_t bottom) const {
        auto r = neighbors(Layer::top, top);
        return std::binary_search(r.begin(), r.end(), bottom);
    }

    std::vector<BipartiteEdge> edges() const {
        std::vector<BipartiteEdge> out;
        out.reserve(n_edges());
        for (index_t i = 0; i < n_top(); ++i)
            for (index_t a : neighbors(Layer::top, i)) out.emplace_back(i, a);
        return out;
    }

    BipartiteGraph transposed() const {
        std::vector<BipartiteEdge> flipped;
        flipped.reserve(n_edges());
        for (auto [i, a] : edges()) flipped.emplace_back(a, i);
        return BipartiteGraph(bottom_, top_, std::move(flipped));
    }

private:
    static void fill_csr(const std::vector<BipartiteEdge>& edges, std::size_t n, std::vector<std::size_t>& off,
                         std::vector<index_t>& adj, bool by_column) {
        off.assign(n + 1, 0);
        for (auto [i, a] : edges) ++off[(by_column ? a : i) + 1];
        std::partial_sum(off.begin(), off.end(), off.begin());
        adj.resize(edges.size());
        std::vector<std::size_t> fill(off.begin(), off.end() - 1);
        // edges are sorted by (top, bottom) so column lists come out sorted too
        for (auto [i, a] : edges) {
            if (by_column)
                adj[fill[a]++] = i;
            else
                adj[fill[i]++] = a;
        }
    }

    NodeRegistry top_, bottom_;
    std::vector<std::size_t> row_off_, col_off_;
    std::vector<index_t> row_adj_, col_adj_;
};

/// Accumulates string-keyed edges; repeated edges collapse to one.
class BipartiteBuilder {
public:
    index_t add_top(std::string_view id) { return top_.add(id); }
    index_t add_bottom(std::string_view id) { return bottom_.add(id); }

    void add_edge(std::string_view top_id, std::string_view bottom_id) {
        edges_.emplace_back(top_.add(top_id), bottom_.add(bottom_id));
    }

    BipartiteGraph build() && { return BipartiteGraph(std::move(top_), std::move(bottom_), std::move(edges_)); }

private:
    NodeRegistry top_, bottom_;
    std::vector<BipartiteEdge> edges_;
};

/// Row and column sums of the biadjacency matrix. Every node must have at
/// least one link; drop isolated nodes first.
inline DegreeSequence degrees(const BipartiteGraph& g) {
    if (g.n_edges() == 0) throw std::domain_error("degrees: graph has no edges");
    DegreeSequence d;
    d.top.resize(g.n_top());
    d.bottom.resize(g.n_bottom());
    for (index_t i = 0; i < g.n_top(); ++i) d.top[i] = g.degree(Layer::top, i);
    for (index_t a = 0; a < g.n_bottom(); ++a) d.bottom[a] = g.degree(Layer::bottom, a);
    auto zero = [](std::size_t k) { return k == 0; };
    if (std::any_of(d.top.begin(), d.top.end(), zero) || std::any_of(d.bottom.begin(), d.bottom.end(), zero))
        throw std::domain_error("degrees: graph has isolated nodes");
    return d;
}

/// Copy of `g` without degree-0 nodes. Surviving nodes keep their relative order.
inline BipartiteGraph drop_isolated(const BipartiteGraph& g) {
    NodeRegistry top, bottom;
    std::vector<index_t> top_map(g.n_top()), bottom_map(g.n_bottom());
    for (index_t i = 0; i < g.n_top(); ++i)
        if (g.degree(Layer::top, i) > 0) top_map[i] = top.add(g.registry(Layer::top).id(i));
    for (index_t a = 0; a < g.n_bottom(); ++a)
        if (g.degree(Layer::bottom, a) > 0) bottom_map[a] = bottom.add(g.registry(Layer::bottom).id(a));
    std::vector<BipartiteEdge> edges;
    edges.reserve(g.n_edges());
    for (auto [i, a] : g.edges()) edges.emplace_back(top_map[i], bottom_map[a]);
    return BipartiteGraph(std::move(top), std::move(bottom), std::move(edges));
}

/// Number of common neighbours V*_{ab} of two nodes of `layer`.
inline std::size_t v_motif_count(const BipartiteGraph& g, index_t a, index_t b, Layer layer = Layer::bottom) {
    if (a == b) throw std::domain_error("v_motif_count: nodes must differ");
    auto na = g.neighbors(layer, a);
    auto nb = g.neighbors(layer, b);
    std::size_t count = 0;
    auto ia = na.begin();
    auto ib = nb.begin();
    while (ia != na.end() && ib != nb.end()) {
        if (*ia < *ib)
            ++ia;
        else if (*ib < *ia)
            ++ib;
        else {
            ++count;
            ++ia;
            ++ib;
        }
    }
    return count;
}

/// Co-occurrence counts for every pair of `layer` nodes with V* > 0, as
/// (a, b, V*) with a < b, sorted.
inline std::vector<std::tuple<index_t, index_t, std::size_t>> cooccurrences(const BipartiteGraph& g, Layer layer) {
    const std::size_t n = g.size(layer);
    std::vector<std::tuple<index_t, index_t, std::size_t>> out;
    std::vector<std::size_t> count(n, 0);
    std::vector<index_t> touched;
    for (index_t a = 0; a < n; ++a) {
        touched.clear();
        for (index_t j : g.neighbors(layer, a))
            for (index_t b : g.neighbors(opposite(layer), j)) {
                if (b <= a) continue;
                if (count[b]++ == 0) touched.push_back(b);
            }
        std::sort(touched.begin(), touched.end());
        for (index_t b : touched) {
            out.emplace_back(a, b, count[b]);
            count[b] = 0;
        }
    }
    return out;
}

struct Neighbor {
    index_t node;
    double weight;
};

struct WeightedEdge {
    index_t u;
    index_t v;
    double weight = 1.0;
};

/// Undirected simple graph with optional edge weights (all 1 when unweighted).
/// Parallel edges merge by summing weights; self-loops are discarded.
class Graph {
public:
    Graph() { off_.assign(1, 0); }

    Graph(NodeRegistry nodes, std::vector<WeightedEdge> edges, bool weighted = false)
        : nodes_(std::move(nodes)), weighted_(weighted) {
        const std::size_t n = nodes_.size();
        std::vector<WeightedEdge> canon;
        canon.reserve(edges.size());
        for (auto e : edges) {
            if (e.u >= n || e.v >= n) throw std::out_of_range("graph edge references unknown node");
            if (e.u == e.v) continue;
            if (e.u > e.v) std::swap(e.u, e.v);
            if (!weighted_) e.weight = 1.0;
            canon.push_back(e);
        }
        std::sort(canon.begin(), canon.end(),
                  [](const auto& x, const auto& y) { return std::tie(x.u, x.v) < std::tie(y.u, y.v); });
        std::vector<WeightedEdge> merged;
        for (const auto& e : canon) {
            if (!merged.empty() && merged.back().u == e.u && merged.back().v == e.v) {
                if (weighted_) merged.back().weight += e.weight;
            } else {
                merged.push_back(e);
            }
        }
        n_edges_ = merged.size();
        off_.assign(n + 1, 0);
        for (const auto& e : merged) {
            ++off_[e.u + 1];
            ++off_[e.v + 1];
        }
        std::partial_sum(off_.begin(), off_.end(), off_.begin());
        adj_.resize(2 * merged.size());
        std::vector<std::size_t> fill(off_.begin(), off_.end() - 1);
        for (const auto& e : merged) {
            adj_[fill[e.u]++] = {e.v, e.weight};
            adj_[fill[e.v]++] = {e.u, e.weight};
        }
        for (index_t i = 0; i < n; ++i)
            std::sort(adj_.begin() + off_[i], adj_.begin() + off_[i + 1],
                      [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
    }

    /// Unweighted graph over nodes named "0".."n-1".
    static Graph from_edges(std::size_t n, const std::vector<std::pair<index_t, index_t>>& edges) {
        std::vector<WeightedEdge> w;
        w.reserve(edges.size());
        for (auto [u, v] : edges) w.push_back({u, v, 1.0});
        return Graph(NodeRegistry::numbered(n), std::move(w), false);
    }

    std::size_t n() const noexcept { return nodes_.size(); }
    std::size_t n_edges() const noexcept { return n_edges_; }
    bool weighted() const noexcept { return weighted_; }
    const NodeRegistry& registry() const noexcept { return nodes_; }

    std::span<const Neighbor> neighbors(index_t i) const {
        return {adj_.data() + off_.at(i), adj_.data() + off_.at(i + 1)};
    }

    std::size_t degree(index_t i) const { return off_.at(i + 1) - off_.at(i); }

    double strength(index_t i) const {
        double s = 0.0;
        for (const auto& nb : neighbors(i)) s += nb.weight;
        return s;
    }

    double total_weight() const {
        double s = 0.0;
        for (const auto& nb : adj_) s += nb.weight;
        return s / 2.0;
    }

    bool has_edge(index_t u, index_t v) const {
        auto nb = neighbors(u);
        return std::binary_search(nb.begin(), nb.end(), Neighbor{v, 0.0},
                                  [](const Neighbor& x, const Neighbor& y) { return x.node < y.node; });
    }

    /// Each undirected edge once, with u < v, sorted.
    std::vector<WeightedEdge> edges() const {
        std::vector<WeightedEdge> out;
        out.reserve(n_edges_);
        for (index_t u = 0; u < n(); ++u)
            for (const auto& nb : neighbors(u))
                if (u < nb.node) out.push_back({u, nb.node, nb.weight});
        return out;
    }

    /// Subgraph induced by `keep` (node order follows `keep`).
    Graph induced_subgraph(std::span<const index_t> keep) const {
        NodeRegistry reg;
        std::vector<std::int64_t> map(n(), -1);
        for (index_t i : keep) map[i] = reg.add(nodes_.id(i));
        std::vector<WeightedEdge> edges;
        for (index_t u : keep)
            for (const auto& nb : neighbors(u))
                if (map[nb.node] >= 0 && u < nb.node)
                    edges.push_back({static_cast<index_t>(map[u]), static_cast<index_t>(map[nb.node]), nb.weight});
        return Graph(std::move(reg), std::move(edges), weighted_);
    }

private:
    NodeRegistry nodes_;
    bool weighted_ = false;
    std::size_t n_edges_ = 0;
    std::vector<std::size_t> off_;
    std::vector<Neighbor> adj_;
};

class GraphBuilder {
public:
    index_t add_node(std::string_view id) { return nodes_.add(id); }

    void add_edge(std::string_view u, std::string_view v, double weight = 1.0) {
        edges_.push_back({nodes_.add(u), nodes_.add(v), weight});
    }

    Graph build(bool weighted) && { return Graph(std::move(nodes_), std::move(edges_), weighted); }

private:
    NodeRegistry nodes_;
    std::vector<WeightedEdge> edges_;
};

/// Links two `layer` nodes whenever they share at least one neighbour.
inline Graph naive_projection(const BipartiteGraph& g, Layer layer) {
    std::vector<WeightedEdge> edges;
    for (auto [a, b, v] : cooccurrences(g, layer)) edges.push_back({a, b, 1.0});
    return Graph(g.registry(layer), std::move(edges), false);
}

// ---------------------------------------------------------------------------
// CSV exchange formats

/// Edge list `layer_top_id,layer_bottom_id` plus registry sidecar `layer,index,node_id`.
inline void write_bipartite(const BipartiteGraph& g, const std::string& edges_path, const std::string& nodes_path) {
    std::ofstream out(edges_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + edges_path);
    csv::write_row(out, {"layer_top_id", "layer_bottom_id"});
    for (auto [i, a] : g.edges())
        csv::write_row(out, {g.registry(Layer::top).id(i), g.registry(Layer::bottom).id(a)});

    std::ofstream nodes(nodes_path, std::ios::binary);
    if (!nodes) throw std::runtime_error("cannot write " + nodes_path);
    csv::write_row(nodes, {"layer", "index", "node_id"});
    for (Layer l : {Layer::top, Layer::bottom}) {
        const auto& reg = g.registry(l);
        for (index_t i = 0; i < reg.size(); ++i)
            csv::write_row(nodes, {std::string(to_string(l)), std::to_string(i), reg.id(i)});
    }
}

inline BipartiteGraph read_bipartite(const std::string& edges_path, const std::string& nodes_path) {
    NodeRegistry top, bottom;
    auto nodes = csv::read_file(nodes_path);
    const auto c_layer = nodes.column("layer");
    const auto c_id = nodes.column("node_id");
    for (const auto& row : nodes.rows) {
        if (row[c_layer] == "top")
            top.add(row[c_id]);
        else if (row[c_layer] == "bottom")
            bottom.add(row[c_id]);
        else
            throw std::runtime_error("bad layer in " + nodes_path);
    }
    auto edges_tbl = csv::read_file(edges_path);
    const auto c_top = edges_tbl.column("layer_top_id");
    const auto c_bot = edges_tbl.column("layer_bottom_id");
    std::vector<BipartiteEdge> edges;
    edges.reserve(edges_tbl.rows.size());
    for (const auto& row : edges_tbl.rows) {
        auto i = top.find(row[c_top]);
        auto a = bottom.find(row[c_bot]);
        if (!i || !a) throw std::runtime_error("edge references unregistered node in " + edges_path);
        edges.emplace_back(*i, *a);
    }
    return BipartiteGraph(std::move(top), std::move(bottom), std::move(edges));
}

/// `source,target[,weight]`.
inline void write_graph(const Graph& g, const std::string& path, bool with_weights) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    if (with_weights)
        csv::write_row(out, {"source", "target", "weight"});
    else
        csv::write_row(out, {"source", "target"});
    for (const auto& e : g.edges()) {
        csv::Row row{g.registry().id(e.u), g.registry().id(e.v)};
        if (with_weights) row.push_back(csv::format_double(e.weight));
        csv::write_row(out, row);
    }
}

}  // namespace vnet
