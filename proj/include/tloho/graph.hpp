#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tloho {

using Edge = std::pair<int, int>;

class GraphError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Disjoint-set forest with path compression and union by rank.
class UnionFind {
public:
    explicit UnionFind(int n) : parent_(static_cast<std::size_t>(n)), rank_(static_cast<std::size_t>(n), 0), count_(n)
    {
        std::iota(parent_.begin(), parent_.end(), 0);
    }

    int find(int x)
    {
        int root = x;
        while (parent_[root] != root) root = parent_[root];
        while (parent_[x] != root) {
            int next = parent_[x];
            parent_[x] = root;
            x = next;
        }
        return root;
    }

    // Returns false when x and y were already in the same set.
    bool unite(int x, int y)
    {
        int rx = find(x), ry = find(y);
        if (rx == ry) return false;
        if (rank_[rx] < rank_[ry]) std::swap(rx, ry);
        parent_[ry] = rx;
        if (rank_[rx] == rank_[ry]) ++rank_[rx];
        --count_;
        return true;
    }

    bool connected(int x, int y) { return find(x) == find(y); }
    int count() const { return count_; }

private:
    std::vector<int> parent_;
    std::vector<int> rank_;
    int count_;
};

/* Immutable undirected simple graph. Edges are stored with u < v and sorted,
 * so two graphs built from permuted edge lists compare equal. */
class Graph {
public:
    Graph() = default;

    Graph(int p, std::vector<Edge> edges) : p_(p), edges_(std::move(edges))
    {
        if (p_ <= 0) throw GraphError("graph needs at least one vertex");
        for (auto& [u, v] : edges_) {
            if (u < 0 || v < 0 || u >= p_ || v >= p_)
                throw GraphError("edge endpoint out of range: (" + std::to_string(u) + "," + std::to_string(v) + ")");
            if (u == v) throw GraphError("self-loop at vertex " + std::to_string(u));
            if (u > v) std::swap(u, v);
        }
        std::sort(edges_.begin(), edges_.end());
        edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

        UnionFind uf(p_);
        for (const auto& [u, v] : edges_) uf.unite(u, v);
        component_.assign(static_cast<std::size_t>(p_), -1);
        std::vector<int> root_label(static_cast<std::size_t>(p_), -1);
        n_components_ = 0;
        for (int v = 0; v < p_; ++v) {
            int r = uf.find(v);
            if (root_label[r] < 0) root_label[r] = n_components_++;
            component_[v] = root_label[r];
        }

        adjacency_.assign(static_cast<std::size_t>(p_), {});
        for (const auto& [u, v] : edges_) {
            adjacency_[u].push_back(v);
            adjacency_[v].push_back(u);
        }
    }

    int num_vertices() const { return p_; }
    int num_edges() const { return static_cast<int>(edges_.size()); }
    int num_components() const { return n_components_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const std::vector<int>& component_labels() const { return component_; }
    const std::vector<int>& neighbors(int v) const { return adjacency_[v]; }

    bool has_edge(int u, int v) const
    {
        if (u > v) std::swap(u, v);
        return std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
    }

    friend bool operator==(const Graph& a, const Graph& b) { return a.p_ == b.p_ && a.edges_ == b.edges_; }

private:
    int p_ = 0;
    std::vector<Edge> edges_;
    std::vector<int> component_;
    int n_components_ = 0;
    std::vector<std::vector<int>> adjacency_;
};

inline Graph load_graph(const std::vector<Edge>& edge_list, int p) { return Graph(p, edge_list); }

// 4-neighbour lattice on a rows x cols grid, vertex index r * cols + c.
inline Graph lattice_graph(int rows, int cols)
{
    std::vector<Edge> edges;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            int v = r * cols + c;
            if (c + 1 < cols) edges.emplace_back(v, v + 1);
            if (r + 1 < rows) edges.emplace_back(v, v + cols);
        }
    return Graph(rows * cols, std::move(edges));
}

/* Spanning forest of a graph plus the cut-edge subset.
 *
 * edges holds exactly p - n_c graph edges forming one spanning tree per
 * connected component; cut[i] marks edges[i] as a member of the cut set.
 * Removing the cut edges leaves n_c + |cut| trees, which are the clusters of
 * the induced partition. */
struct SpanningForest {
    std::vector<Edge> edges;
    std::vector<bool> cut;

    int num_cut() const { return static_cast<int>(std::count(cut.begin(), cut.end(), true)); }

    friend bool operator==(const SpanningForest&, const SpanningForest&) = default;
};

// Kruskal; ties in weight go to the smaller edge index. Edges are returned sorted.
inline SpanningForest minimum_spanning_forest(const Graph& g, const std::vector<double>& weights)
{
    if (weights.size() != static_cast<std::size_t>(g.num_edges()))
        throw GraphError("edge weight count does not match edge count");
    std::vector<int> order(weights.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return weights[a] < weights[b]; });

    SpanningForest f;
    const std::size_t target = static_cast<std::size_t>(g.num_vertices() - g.num_components());
    f.edges.reserve(target);
    UnionFind uf(g.num_vertices());
    for (int idx : order) {
        const auto& [u, v] = g.edges()[idx];
        if (uf.unite(u, v)) {
            f.edges.push_back(g.edges()[idx]);
            if (f.edges.size() == target) break;
        }
    }
    // graph edge order, so equal forests compare equal
    std::sort(f.edges.begin(), f.edges.end());
    f.cut.assign(f.edges.size(), false);
    return f;
}

template <class Urbg>
std::vector<double> uniform_edge_weights(const Graph& g, Urbg& rng)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> w(static_cast<std::size_t>(g.num_edges()));
    for (auto& x : w) x = unif(rng);
    return w;
}

// Random minimum spanning forest under iid Uniform(0,1) edge weights.
template <class Urbg>
SpanningForest sample_forest_prior(const Graph& g, Urbg& rng)
{
    return minimum_spanning_forest(g, uniform_edge_weights(g, rng));
}

// Connected-component labels by breadth-first search; used as an independent check.
inline std::vector<int> bfs_components(int p, const std::vector<Edge>& edges)
{
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(p));
    for (const auto& [u, v] : edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<int> label(static_cast<std::size_t>(p), -1);
    int next = 0;
    std::vector<int> queue;
    for (int s = 0; s < p; ++s) {
        if (label[s] >= 0) continue;
        label[s] = next;
        queue.assign(1, s);
        for (std::size_t h = 0; h < queue.size(); ++h)
            for (int w : adj[queue[h]])
                if (label[w] < 0) {
                    label[w] = next;
                    queue.push_back(w);
                }
        ++next;
    }
    return label;
}

} // namespace tloho
