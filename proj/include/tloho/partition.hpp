#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "tloho/graph.hpp"

namespace tloho {

/* Contiguous partition of the vertex set.
 *
 * Labels are always canonical: clusters are numbered 0..K-1 in order of their
 * smallest member vertex, so two partitions are equal iff their label vectors
 * are equal. */
class Partition {
public:
    Partition() = default;

    // Relabels canonically; any integer labels are accepted.
    explicit Partition(const std::vector<int>& raw_labels) : labels_(raw_labels.size())
    {
        std::unordered_map<int, int> seen; // raw label -> canonical
        for (std::size_t v = 0; v < raw_labels.size(); ++v) {
            auto [it, fresh] = seen.try_emplace(raw_labels[v], static_cast<int>(seen.size()));
            int found = it->second;
            if (fresh) sizes_.push_back(0);
            labels_[v] = found;
            ++sizes_[found];
        }
    }

    static Partition from_canonical(std::vector<int> labels, int k)
    {
        Partition pi;
        pi.sizes_.assign(static_cast<std::size_t>(k), 0);
        for (int l : labels) ++pi.sizes_[l];
        pi.labels_ = std::move(labels);
        return pi;
    }

    int num_vertices() const { return static_cast<int>(labels_.size()); }
    int num_clusters() const { return static_cast<int>(sizes_.size()); }
    const std::vector<int>& labels() const { return labels_; }
    int label(int v) const { return labels_[v]; }
    const std::vector<int>& cluster_sizes() const { return sizes_; }

    std::vector<std::vector<int>> clusters() const
    {
        std::vector<std::vector<int>> out(sizes_.size());
        for (std::size_t k = 0; k < sizes_.size(); ++k) out[k].reserve(static_cast<std::size_t>(sizes_[k]));
        for (std::size_t v = 0; v < labels_.size(); ++v) out[labels_[v]].push_back(static_cast<int>(v));
        return out;
    }

    friend bool operator==(const Partition& a, const Partition& b) { return a.labels_ == b.labels_; }

private:
    std::vector<int> labels_;
    std::vector<int> sizes_;
};

// Canonical labels in O(p) for labels that are already dense in [0, k).
inline Partition canonical_partition(const std::vector<int>& dense_labels, int k)
{
    std::vector<int> map(static_cast<std::size_t>(k), -1);
    std::vector<int> out(dense_labels.size());
    int next = 0;
    for (std::size_t v = 0; v < dense_labels.size(); ++v) {
        int& m = map[dense_labels[v]];
        if (m < 0) m = next++;
        out[v] = m;
    }
    return Partition::from_canonical(std::move(out), next);
}

inline Partition induce_partition(const SpanningForest& f, const Graph& g)
{
    UnionFind uf(g.num_vertices());
    for (std::size_t i = 0; i < f.edges.size(); ++i)
        if (!f.cut[i]) uf.unite(f.edges[i].first, f.edges[i].second);
    std::vector<int> roots(static_cast<std::size_t>(g.num_vertices()));
    for (int v = 0; v < g.num_vertices(); ++v) roots[v] = uf.find(v);
    return canonical_partition(roots, g.num_vertices());
}

// Every cluster induces a connected subgraph of g.
inline bool is_contiguous(const Partition& pi, const Graph& g)
{
    if (pi.num_vertices() != g.num_vertices()) return false;
    std::vector<Edge> within;
    for (const auto& [u, v] : g.edges())
        if (pi.label(u) == pi.label(v)) within.emplace_back(u, v);
    auto comp = bfs_components(g.num_vertices(), within);
    int pieces = 0;
    for (int c : comp) pieces = std::max(pieces, c + 1);
    return pieces == pi.num_clusters();
}

/* Sparse K x p projection with Phi(k, j) = 1/sqrt(|C_k|) for j in C_k.
 * Rows are orthonormal and each column holds exactly one nonzero. */
class Projection {
public:
    explicit Projection(const Partition& pi) : labels_(pi.labels()), members_(pi.clusters())
    {
        scale_.reserve(members_.size());
        for (const auto& m : members_) scale_.push_back(1.0 / std::sqrt(static_cast<double>(m.size())));
    }

    int rows() const { return static_cast<int>(members_.size()); }
    int cols() const { return static_cast<int>(labels_.size()); }
    double scale(int k) const { return scale_[k]; }
    const std::vector<int>& members(int k) const { return members_[k]; }

    // beta_tilde = Phi beta
    std::vector<double> apply(const std::vector<double>& beta) const
    {
        std::vector<double> out(members_.size(), 0.0);
        for (std::size_t k = 0; k < members_.size(); ++k) {
            for (int j : members_[k]) out[k] += beta[j];
            out[k] *= scale_[k];
        }
        return out;
    }

    // beta = Phi^T beta_tilde
    std::vector<double> apply_transpose(const std::vector<double>& beta_tilde) const
    {
        std::vector<double> out(labels_.size());
        for (std::size_t j = 0; j < labels_.size(); ++j) out[j] = beta_tilde[labels_[j]] * scale_[labels_[j]];
        return out;
    }

    // Row-major dense copy, for tests and small problems.
    std::vector<std::vector<double>> dense() const
    {
        std::vector<std::vector<double>> d(members_.size(), std::vector<double>(labels_.size(), 0.0));
        for (std::size_t k = 0; k < members_.size(); ++k)
            for (int j : members_[k]) d[k][j] = scale_[k];
        return d;
    }

private:
    std::vector<int> labels_;
    std::vector<std::vector<int>> members_;
    std::vector<double> scale_;
};

inline Projection projection_matrix(const Partition& pi) { return Projection(pi); }

class PartitionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline SpanningForest split(SpanningForest f, int edge_idx)
{
    if (edge_idx < 0 || static_cast<std::size_t>(edge_idx) >= f.edges.size())
        throw PartitionError("forest edge index out of range");
    if (f.cut[edge_idx]) throw PartitionError("split: forest edge is already cut");
    f.cut[edge_idx] = true;
    return f;
}

inline SpanningForest merge(SpanningForest f, int cut_idx)
{
    if (cut_idx < 0 || static_cast<std::size_t>(cut_idx) >= f.edges.size())
        throw PartitionError("forest edge index out of range");
    if (!f.cut[cut_idx]) throw PartitionError("merge: forest edge is not cut");
    f.cut[cut_idx] = false;
    return f;
}

/* Forest compatible with pi: fresh Uniform(0,1) weights with +1 added to every
 * between-cluster edge, so each cluster is spanned by its own random minimum
 * spanning tree before any between-cluster edge is considered. The
 * between-cluster forest edges form the cut set. */
template <class Urbg>
SpanningForest resample_forest_compatible(const Graph& g, const Partition& pi, Urbg& rng)
{
    auto w = uniform_edge_weights(g, rng);
    const auto& edges = g.edges();
    for (std::size_t i = 0; i < edges.size(); ++i)
        if (pi.label(edges[i].first) != pi.label(edges[i].second)) w[i] += 1.0;
    SpanningForest f = minimum_spanning_forest(g, w);
    for (std::size_t i = 0; i < f.edges.size(); ++i)
        f.cut[i] = pi.label(f.edges[i].first) != pi.label(f.edges[i].second);
    return f;
}

inline std::string format_partition(const Partition& pi)
{
    std::string out;
    for (std::size_t v = 0; v < pi.labels().size(); ++v) {
        if (v) out += ',';
        out += std::to_string(pi.labels()[v]);
    }
    return out;
}

inline Partition parse_partition(const std::string& line)
{
    std::vector<int> raw;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t pos = 0;
        int value = 0;
        try {
            value = std::stoi(tok, &pos);
        } catch (const std::exception&) {
            throw PartitionError("malformed partition label: '" + tok + "'");
        }
        raw.push_back(value);
    }
    if (raw.empty()) throw PartitionError("empty partition line");
    return Partition(raw);
}

} // namespace tloho
