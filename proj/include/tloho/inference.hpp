#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tloho/partition.hpp"

namespace tloho {

struct Draw {
    long iter = 0;
    std::vector<int> labels; // canonical cluster labels
    std::vector<double> beta;
    double sigma2 = 0.0;
    double tau = 0.0;
    int K = 0;
};

struct AcceptanceStats {
    long proposed = 0;
    long accepted = 0;
    double rate() const { return proposed > 0 ? static_cast<double>(accepted) / static_cast<double>(proposed) : 0.0; }
};

struct ChainOutput {
    std::vector<Draw> draws;
    std::map<std::string, AcceptanceStats> acceptance; // split, merge, change, hyper, tau
    double runtime_seconds = 0.0;
    double final_tau_step = 0.0;
};

class InferenceError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {

inline void require_draws(const std::vector<Draw>& draws)
{
    if (draws.empty()) throw InferenceError("no posterior draws");
}

// Calls f(i, j) for every pair i < j sharing a cluster.
template <class F>
void for_each_coclustered_pair(const std::vector<int>& labels, F&& f)
{
    int k = 0;
    for (int l : labels) k = std::max(k, l + 1);
    std::vector<std::vector<int>> members(static_cast<std::size_t>(k));
    for (std::size_t v = 0; v < labels.size(); ++v) members[labels[v]].push_back(static_cast<int>(v));
    for (const auto& m : members)
        for (std::size_t a = 0; a < m.size(); ++a)
            for (std::size_t b = a + 1; b < m.size(); ++b) f(m[a], m[b]);
}

} // namespace detail

/* Posterior co-clustering counts for pairs i < j, stored in a dense p x p
 * buffer (upper triangle). Accumulation walks within-cluster pairs only. */
inline std::vector<std::uint32_t> coclustering_counts(const std::vector<Draw>& draws)
{
    detail::require_draws(draws);
    const std::size_t p = draws.front().labels.size();
    std::vector<std::uint32_t> counts(p * p, 0);
    for (const auto& d : draws) {
        if (d.labels.size() != p) throw InferenceError("draws disagree on the number of vertices");
        detail::for_each_coclustered_pair(d.labels, [&](int i, int j) { ++counts[i * p + j]; });
    }
    return counts;
}

/* Least-squares clustering: the sampled partition whose association matrix is
 * closest in squared Frobenius norm to the co-clustering frequencies. Ties go
 * to the earliest draw. Returns the draw index. */
inline std::size_t dahl_index(const std::vector<Draw>& draws)
{
    auto counts = coclustering_counts(draws);
    const std::size_t p = draws.front().labels.size();
    const auto t_count = static_cast<long long>(draws.size());
    // ||delta - P||^2 = const + (2 / T) * sum_{i<j same cluster} (T - 2 n_ij),
    // kept in integers so that ties are exact
    std::size_t best = 0;
    long long best_score = 0;
    for (std::size_t t = 0; t < draws.size(); ++t) {
        long long score = 0;
        detail::for_each_coclustered_pair(draws[t].labels, [&](int i, int j) {
            score += t_count - 2 * static_cast<long long>(counts[i * p + j]);
        });
        if (t == 0 || score < best_score) {
            best = t;
            best_score = score;
        }
    }
    return best;
}

inline Partition dahl_point_estimate(const ChainOutput& out)
{
    return Partition(out.draws[dahl_index(out.draws)].labels);
}

struct BetaSummary {
    std::vector<double> median;
    std::vector<double> lower;
    std::vector<double> upper;
    double level = 0.9;
};

// Type-7 sample quantile of a sorted sample.
inline double sorted_quantile(const std::vector<double>& sorted, double q)
{
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Coordinate-wise median and equal-tailed credible interval.
inline BetaSummary posterior_median_beta(const std::vector<Draw>& draws, double level = 0.9)
{
    detail::require_draws(draws);
    if (!(level > 0.0 && level < 1.0)) throw InferenceError("credible level must lie in (0, 1)");
    const std::size_t p = draws.front().beta.size();
    BetaSummary s;
    s.level = level;
    s.median.resize(p);
    s.lower.resize(p);
    s.upper.resize(p);
    std::vector<double> col(draws.size());
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t t = 0; t < draws.size(); ++t) col[t] = draws[t].beta[j];
        std::sort(col.begin(), col.end());
        s.median[j] = sorted_quantile(col, 0.5);
        s.lower[j] = sorted_quantile(col, 0.5 * (1.0 - level));
        s.upper[j] = sorted_quantile(col, 0.5 * (1.0 + level));
    }
    return s;
}

inline BetaSummary posterior_median_beta(const ChainOutput& out, double level = 0.9)
{
    return posterior_median_beta(out.draws, level);
}

// Fraction of vertex pairs on which the two partitions agree.
inline double rand_index(const Partition& a, const Partition& b)
{
    if (a.num_vertices() != b.num_vertices()) throw InferenceError("rand_index: partitions differ in size");
    const long p = a.num_vertices();
    if (p < 2) return 1.0;
    // Pair counts from the contingency table: agreements = C(p,2) - (same_a + same_b - 2 * same_both)
    std::map<std::pair<int, int>, long> joint;
    std::vector<long> ca(static_cast<std::size_t>(a.num_clusters()), 0), cb(static_cast<std::size_t>(b.num_clusters()), 0);
    for (long v = 0; v < p; ++v) {
        ++joint[{a.label(static_cast<int>(v)), b.label(static_cast<int>(v))}];
        ++ca[a.label(static_cast<int>(v))];
        ++cb[b.label(static_cast<int>(v))];
    }
    auto pairs = [](long n) { return static_cast<double>(n) * static_cast<double>(n - 1) / 2.0; };
    double same_a = 0, same_b = 0, same_both = 0;
    for (long n : ca) same_a += pairs(n);
    for (long n : cb) same_b += pairs(n);
    for (const auto& [key, n] : joint) same_both += pairs(n);
    const double total = pairs(p);
    return (total - same_a - same_b + 2.0 * same_both) / total;
}

// Mean squared prediction error; x_test is row-major n_t x p.
inline double mspe(const std::vector<double>& beta_hat, const std::vector<std::vector<double>>& x_test,
                   const std::vector<double>& y_test)
{
    if (x_test.size() != y_test.size() || x_test.empty()) throw InferenceError("mspe: dimension mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < x_test.size(); ++i) {
        if (x_test[i].size() != beta_hat.size()) throw InferenceError("mspe: dimension mismatch");
        double pred = 0.0;
        for (std::size_t j = 0; j < beta_hat.size(); ++j) pred += x_test[i][j] * beta_hat[j];
        sum += (y_test[i] - pred) * (y_test[i] - pred);
    }
    return sum / static_cast<double>(y_test.size());
}

// Posterior distribution of K as (k, frequency) pairs.
inline std::map<int, double> k_distribution(const std::vector<Draw>& draws)
{
    detail::require_draws(draws);
    std::map<int, double> hist;
    for (const auto& d : draws) hist[d.K] += 1.0;
    for (auto& [k, v] : hist) v /= static_cast<double>(draws.size());
    return hist;
}

} // namespace tloho
