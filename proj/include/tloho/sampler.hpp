#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tloho/graph.hpp"
#include "tloho/inference.hpp"
#include "tloho/linalg.hpp"
#include "tloho/model.hpp"
#include "tloho/partition.hpp"

namespace tloho {

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

class InvariantViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct MoveRecord {
    MoveKind kind = MoveKind::hyper;
    double log_A = 0.0; // prior ratio
    double log_P = 0.0; // proposal ratio
    double log_L = 0.0; // likelihood ratio
    bool accepted = false;
    bool available = true; // false when no move has positive probability
};

struct SamplerOptions {
    bool sample_tau = true;
    bool sample_lambda = true;
    bool sample_sigma2_beta = true;
    // Validate the full state after every transition.
    bool debug_checks = false;
    double target_tau_acceptance = 0.4;
};

struct Schedule {
    long iters = 1000; // post burn-in iterations
    long burnin = 0;
    long thin = 1;

    void validate() const
    {
        if (iters < 0 || burnin < 0) throw ConfigError("iters and burnin must be nonnegative");
        if (thin < 1) throw ConfigError("thin must be at least 1");
    }
};

// Indices currently in a set, with O(1) insert, erase and uniform choice.
class IndexPool {
public:
    IndexPool() = default;
    explicit IndexPool(int universe) : pos_(static_cast<std::size_t>(universe), -1) {}

    void insert(int i)
    {
        if (pos_[i] >= 0) return;
        pos_[i] = static_cast<int>(items_.size());
        items_.push_back(i);
    }
    void erase(int i)
    {
        const int at = pos_[i];
        if (at < 0) return;
        const int last = items_.back();
        items_[at] = last;
        pos_[last] = at;
        items_.pop_back();
        pos_[i] = -1;
    }
    bool contains(int i) const { return pos_[i] >= 0; }
    int size() const { return static_cast<int>(items_.size()); }
    int operator[](int k) const { return items_[k]; }

    template <class Urbg>
    int pick(Urbg& rng) const
    {
        std::uniform_int_distribution<int> u(0, size() - 1);
        return items_[u(rng)];
    }

private:
    std::vector<int> items_;
    std::vector<int> pos_;
};

// Forest edge list plus adjacency; replaced only by hyper moves.
struct ForestTopology {
    std::vector<Edge> edges;
    std::vector<std::vector<std::pair<int, int>>> adjacency; // (neighbour, forest edge index)

    ForestTopology(int p, std::vector<Edge> e) : edges(std::move(e)), adjacency(static_cast<std::size_t>(p))
    {
        for (int i = 0; i < static_cast<int>(edges.size()); ++i) {
            adjacency[edges[i].first].emplace_back(edges[i].second, i);
            adjacency[edges[i].second].emplace_back(edges[i].first, i);
        }
    }
};

/* One cluster of the current partition. colsum is the sum of the
 * standardized design columns over the members (left empty in normal-means
 * mode); xty_sum is the matching sum of x_j^T y. The reduced column is
 * colsum / sqrt(|C|). */
struct Cluster {
    std::vector<int> members;
    int min_vertex = 0;
    VectorXd colsum;
    double xty_sum = 0.0;

    double size() const { return static_cast<double>(members.size()); }
};

using ClusterPtr = std::shared_ptr<const Cluster>;

/* Full parameter set of one chain plus the cached linear algebra.
 *
 * Clusters live in "slots"; the slot order is the column order of the reduced
 * design and of the Cholesky factor, and is unrelated to canonical labels.
 * All per-slot vectors (gram, xty, lambda, beta_tilde) share that order.
 * Copying a state is O(p + K^2): clusters are shared immutable objects. */
struct ModelState {
    std::shared_ptr<const ForestTopology> topology;
    std::vector<char> cut;
    IndexPool cut_edges;
    IndexPool uncut_edges;

    std::vector<ClusterPtr> clusters;
    std::vector<int> slot_of; // per vertex

    MatrixXd gram; // Xt^T Xt
    VectorXd xty;  // Xt^T y
    VectorXd lambda;
    VectorXd beta_tilde;
    CholState chol; // factor of tau^-2 Lambda^-1 + Xt^T Xt
    double tau = 1.0;
    double sigma2 = 1.0;

    int K() const { return static_cast<int>(clusters.size()); }

    SpanningForest forest() const
    {
        SpanningForest f;
        f.edges = topology->edges;
        f.cut.resize(cut.size());
        for (std::size_t i = 0; i < cut.size(); ++i) f.cut[i] = cut[i] != 0;
        return f;
    }

    Partition partition() const { return canonical_partition(slot_of, K()); }

    // beta = Phi^T beta_tilde
    std::vector<double> beta() const
    {
        std::vector<double> b(slot_of.size());
        for (std::size_t v = 0; v < slot_of.size(); ++v) {
            const int s = slot_of[v];
            b[v] = beta_tilde(s) / std::sqrt(clusters[s]->size());
        }
        return b;
    }

    // Per-slot quantity reordered to canonical cluster order.
    std::vector<double> canonical(const VectorXd& per_slot) const
    {
        const Partition pi = partition();
        std::vector<double> out(static_cast<std::size_t>(K()));
        for (int s = 0; s < K(); ++s) out[pi.label(clusters[s]->min_vertex)] = per_slot(s);
        return out;
    }
};

/* Collapsed reversible-jump sampler for one chain.
 *
 * One iteration: a partition move (split / merge / change / hyper) with
 * (beta_tilde, sigma^2) integrated out, then tau by random-walk MH on log tau,
 * sigma^2 from its beta-marginal inverse-gamma conditional, beta_tilde from its
 * Gaussian conditional, and finally each lambda_k by slice sampling. */
class Sampler {
public:
    Sampler(const Dataset& data, const Graph& g, Hyperparams h, SamplerOptions opts, Rng rng)
        : data_(&data), graph_(&g), h_(h), opts_(opts), rng_(std::move(rng)), log_step_(std::log(h.mh_step_tau))
    {
        h_.validate();
        if (data.p() != g.num_vertices())
            throw DataError("design has " + std::to_string(data.p()) + " columns but the graph has " +
                            std::to_string(g.num_vertices()) + " vertices");
        bind_response();
    }

    // Prior forest, K = n_c, lambda = 1, tau = tau0, sigma^2 = sample variance of y, beta_tilde = 0.
    void initialize()
    {
        SpanningForest f = sample_forest_prior(*graph_, rng_);
        const int nc = graph_->num_components();
        const double n = data_->n();
        const double mean = data_->y().mean();
        double s2 = n > 1 ? (data_->yy() - n * mean * mean) / (n - 1.0) : data_->yy();
        if (!(s2 > 0.0)) s2 = 1.0;
        reset(f, std::vector<double>(static_cast<std::size_t>(nc), 1.0), h_.tau0, s2,
              std::vector<double>(static_cast<std::size_t>(nc), 0.0));
    }

    /* Sets the full state. lambda and beta_tilde are given in canonical
     * cluster order of the partition induced by f. */
    void reset(const SpanningForest& f, const std::vector<double>& lambda, double tau, double sigma2,
               const std::vector<double>& beta_tilde)
    {
        const Partition pi = induce_partition(f, *graph_);
        if (static_cast<int>(lambda.size()) != pi.num_clusters() ||
            static_cast<int>(beta_tilde.size()) != pi.num_clusters())
            throw std::invalid_argument("reset: parameter length does not match the number of clusters");
        ModelState s;
        s.topology = std::make_shared<ForestTopology>(graph_->num_vertices(), f.edges);
        set_cut_flags(s, f.cut);
        s.tau = tau;
        s.sigma2 = sigma2;
        s.slot_of = pi.labels();
        for (auto& members : pi.clusters()) s.clusters.push_back(make_cluster(std::move(members)));
        s.lambda = Eigen::Map<const VectorXd>(lambda.data(), static_cast<Eigen::Index>(lambda.size()));
        s.beta_tilde = Eigen::Map<const VectorXd>(beta_tilde.data(), static_cast<Eigen::Index>(beta_tilde.size()));
        rebuild_linear_algebra(s);
        state_ = std::move(s);
    }

    /* Points the sampler at a dataset with the same design and a new response,
     * refreshing every y-dependent cache. */
    void rebind(const Dataset& data)
    {
        if (data.p() != data_->p() || data.n() != data_->n()) throw DataError("rebind: dataset shape changed");
        data_ = &data;
        bind_response();
        std::vector<ClusterPtr> fresh;
        for (const auto& c : state_.clusters) {
            auto copy = std::make_shared<Cluster>(*c);
            copy->xty_sum = 0.0;
            for (int j : copy->members) copy->xty_sum += col_xty_[j];
            fresh.push_back(std::move(copy));
        }
        state_.clusters = std::move(fresh);
        for (int s = 0; s < state_.K(); ++s)
            state_.xty(s) = state_.clusters[s]->xty_sum / std::sqrt(state_.clusters[s]->size());
    }

    const ModelState& state() const { return state_; }
    Rng& rng() { return rng_; }
    const Hyperparams& hyperparams() const { return h_; }
    const SamplerOptions& options() const { return opts_; }
    double tau_step() const { return std::exp(log_step_); }

    CollapsedTerms terms(const ModelState& s) const
    {
        return collapsed_terms(s.chol, s.xty, data_->yy(), data_->n(), s.tau, s.lambda, h_.noise_prior);
    }

    double loglik(const ModelState& s) const { return terms(s).loglik; }

    // Log likelihood ratio of the collapsed conditional, proposed over current.
    double likelihood_ratio(const ModelState& current, const ModelState& proposed) const
    {
        return loglik(proposed) - loglik(current);
    }

    // Selection probability of a move at cluster count k, after removing
    // moves that are unavailable there.
    double move_probability(MoveKind m, int k) const
    {
        auto w = move_weights(k);
        double total = w[0] + w[1] + w[2] + w[3];
        return total > 0.0 ? w[static_cast<int>(m)] / total : 0.0;
    }

    // (log prior ratio, log proposal ratio) of a split taking K = k to k + 1.
    std::pair<double, double> split_log_ratios(int k) const
    {
        const int p = graph_->num_vertices(), nc = graph_->num_components();
        const double log_a = std::log1p(-h_.c) + log_binomial(p - nc, k - nc) - log_binomial(p - nc, k + 1 - nc);
        const double log_p = std::log(move_probability(MoveKind::merge, k + 1)) - std::log(k + 1.0 - nc) -
                             std::log(move_probability(MoveKind::split, k)) + std::log(static_cast<double>(p - k));
        return {log_a, log_p};
    }

    // (log prior ratio, log proposal ratio) of a merge taking K = k to k - 1.
    std::pair<double, double> merge_log_ratios(int k) const
    {
        const int p = graph_->num_vertices(), nc = graph_->num_components();
        const double log_a = -std::log1p(-h_.c) + log_binomial(p - nc, k - nc) - log_binomial(p - nc, k - 1 - nc);
        const double log_p = std::log(move_probability(MoveKind::split, k - 1)) -
                             std::log(static_cast<double>(p - k + 1)) -
                             std::log(move_probability(MoveKind::merge, k)) + std::log(static_cast<double>(k - nc));
        return {log_a, log_p};
    }

    MoveRecord step_partition()
    {
        MoveRecord rec;
        const int k = state_.K();
        auto w = move_weights(k);
        if (w[0] + w[1] + w[2] + w[3] <= 0.0) {
            rec.available = false;
            return rec;
        }
        std::discrete_distribution<int> pick_move(w.begin(), w.end());
        rec.kind = static_cast<MoveKind>(pick_move(rng_));

        if (rec.kind == MoveKind::hyper) {
            hyper_move();
            rec.accepted = true;
            if (opts_.debug_checks) validate();
            return rec;
        }

        ModelState proposal = state_;
        try {
            if (rec.kind == MoveKind::split) {
                std::tie(rec.log_A, rec.log_P) = split_log_ratios(k);
                if (opts_.debug_checks) check_reversibility(k);
                apply_split(proposal, state_.uncut_edges.pick(rng_), draw_new_lambda());
            } else if (rec.kind == MoveKind::merge) {
                std::tie(rec.log_A, rec.log_P) = merge_log_ratios(k);
                if (opts_.debug_checks) check_reversibility(k - 1);
                apply_merge(proposal, state_.cut_edges.pick(rng_));
            } else {
                // merge then split as one proposal; both directions have the same
                // selection probability and the dropped / drawn lambdas cancel
                apply_merge(proposal, state_.cut_edges.pick(rng_));
                apply_split(proposal, proposal.uncut_edges.pick(rng_), draw_new_lambda());
            }
            rec.log_L = likelihood_ratio(state_, proposal);
        } catch (const NotPositiveDefinite&) {
            rec.log_L = -std::numeric_limits<double>::infinity();
            return rec;
        }

        const double log_alpha = rec.log_A + rec.log_P + rec.log_L;
        if (log_alpha >= 0.0 || std::log(uniform()) < log_alpha) {
            state_ = std::move(proposal);
            rec.accepted = true;
        }
        if (opts_.debug_checks) validate();
        return rec;
    }

    /* Log acceptance ratio of moving tau to tau_new: collapsed likelihood,
     * half-Cauchy prior and the Jacobian of the log-scale walk. */
    double tau_log_acceptance(double tau_new) const
    {
        const ModelState& s = state_;
        const CholState chol_new = cholesky(inner_matrix(s.gram, tau_new, s.lambda));
        const double proposed =
            collapsed_terms(chol_new, s.xty, data_->yy(), data_->n(), tau_new, s.lambda, h_.noise_prior).loglik;
        return proposed - loglik(s) + log_half_cauchy(tau_new, h_.tau0) - log_half_cauchy(s.tau, h_.tau0) +
               std::log(tau_new) - std::log(s.tau);
    }

    // Random-walk MH on log tau; returns whether the proposal was accepted.
    bool update_tau(bool adapt = false, long iteration = 0)
    {
        ModelState& s = state_;
        // refactorizing here also discards round-off accumulated by updates
        s.chol = cholesky(inner_matrix(s.gram, s.tau, s.lambda));
        const double step = std::exp(log_step_);
        const double tau_new = s.tau * std::exp(step * normal());
        bool accepted = false;
        try {
            const double log_alpha = tau_log_acceptance(tau_new);
            if (log_alpha >= 0.0 || std::log(uniform()) < log_alpha) {
                s.tau = tau_new;
                s.chol = cholesky(inner_matrix(s.gram, s.tau, s.lambda));
                accepted = true;
            }
        } catch (const NotPositiveDefinite&) {
        }
        if (adapt) {
            const double gain = 1.0 / std::sqrt(static_cast<double>(iteration) + 1.0);
            log_step_ += gain * ((accepted ? 1.0 : 0.0) - opts_.target_tau_acceptance);
            log_step_ = std::clamp(log_step_, std::log(1e-3), std::log(10.0));
        }
        if (opts_.debug_checks) validate();
        return accepted;
    }

    // sigma^2 ~ IG(a + n/2, b + y^T Sigma^-1 y / 2) with beta_tilde integrated out.
    void update_sigma2()
    {
        const auto [shape, rate] = sigma2_conditional();
        if (!(rate > 0.0)) return;
        std::gamma_distribution<double> gamma(shape, 1.0);
        state_.sigma2 = rate / gamma(rng_);
    }

    std::pair<double, double> sigma2_conditional() const
    {
        return {h_.noise_prior.shape + 0.5 * data_->n(), h_.noise_prior.rate + 0.5 * terms(state_).quad};
    }

    // Posterior mean of beta_tilde given the current factor: A^-1 Xt^T y.
    VectorXd beta_tilde_mean() const
    {
        return triangular_solve(state_.chol, triangular_solve(state_.chol, state_.xty, Triangle::lower),
                                Triangle::upper);
    }

    // beta_tilde ~ N(A^-1 Xt^T y, sigma^2 A^-1) using the cached factor.
    void update_beta_tilde()
    {
        VectorXd z(state_.K());
        for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = normal();
        state_.beta_tilde =
            beta_tilde_mean() + std::sqrt(state_.sigma2) * triangular_solve(state_.chol, z, Triangle::upper);
    }

    /* Slice sampler on eta = 1 / lambda^2, whose conditional is proportional
     * to exp(-mu eta) / (1 + eta) with mu = beta_tilde^2 / (2 sigma^2 tau^2). */
    void update_lambda()
    {
        ModelState& s = state_;
        const double tau2 = s.tau * s.tau;
        bool refactor = false;
        for (int k = 0; k < s.K(); ++k) {
            const double eta = 1.0 / (s.lambda(k) * s.lambda(k));
            const double mu = s.beta_tilde(k) * s.beta_tilde(k) / (2.0 * s.sigma2 * tau2);
            const double eta_new = slice_eta(eta, mu, rng_);
            s.lambda(k) = 1.0 / std::sqrt(eta_new);
            if (refactor) continue;
            try {
                s.chol = diagonal_update(std::move(s.chol), k, (eta_new - eta) / tau2, s.gram(k, k) + eta_new / tau2);
            } catch (const NotPositiveDefinite&) {
                refactor = true;
            }
        }
        if (refactor) s.chol = cholesky(inner_matrix(s.gram, s.tau, s.lambda));
        if (opts_.debug_checks) validate();
    }

    template <class Urbg>
    static double slice_eta(double eta, double mu, Urbg& rng)
    {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        double u;
        do u = unif(rng) / (1.0 + eta);
        while (!(u > 0.0));
        const double bound = (1.0 - u) / u;
        double w;
        do w = unif(rng);
        while (!(w > 0.0));
        double out;
        if (mu * bound < 1e-12) out = w * bound;
        else out = -std::log1p(w * std::expm1(-mu * bound)) / mu;
        return std::clamp(out, 1e-200, 1e200);
    }

    void iterate(bool burnin, long iteration)
    {
        const MoveRecord rec = step_partition();
        if (rec.available) {
            auto& st = stats_[move_name(rec.kind)];
            ++st.proposed;
            if (rec.accepted) ++st.accepted;
        }
        if (opts_.sample_tau) {
            auto& st = stats_["tau"];
            ++st.proposed;
            if (update_tau(burnin, iteration)) ++st.accepted;
        }
        if (opts_.sample_sigma2_beta) {
            update_sigma2();
            update_beta_tilde();
        }
        if (opts_.sample_lambda) update_lambda();
    }

    Draw snapshot(long iteration) const
    {
        Draw d;
        d.iter = iteration;
        d.labels = state_.partition().labels();
        // back to the scale of the supplied design
        d.beta = state_.beta();
        for (std::size_t v = 0; v < d.beta.size(); ++v) d.beta[v] /= data_->column_norms()(static_cast<Eigen::Index>(v));
        d.sigma2 = state_.sigma2;
        d.tau = state_.tau;
        d.K = state_.K();
        return d;
    }

    const std::map<std::string, AcceptanceStats>& acceptance() const { return stats_; }

    // Full consistency check of the current state; throws InvariantViolation.
    void validate() const { validate_state(state_); }

    void validate_state(const ModelState& s) const
    {
        const int p = graph_->num_vertices(), nc = graph_->num_components();
        auto fail = [](const std::string& what) { throw InvariantViolation(what); };
        const Partition pi = s.partition();
        if (!(induce_partition(s.forest(), *graph_) == pi)) fail("partition differs from the forest-induced one");
        if (!is_contiguous(pi, *graph_)) fail("partition is not contiguous");
        if (s.K() != nc + s.cut_edges.size()) fail("K != n_c + |cut set|");
        if (s.K() < nc || s.K() > p) fail("K outside [n_c, p]");
        if (s.gram.rows() != s.K() || s.xty.size() != s.K() || s.lambda.size() != s.K() ||
            s.beta_tilde.size() != s.K() || s.chol.dim() != s.K())
            fail("per-cluster dimensions disagree");
        for (int v = 0; v < p; ++v) {
            const auto& m = s.clusters[s.slot_of[v]]->members;
            if (std::find(m.begin(), m.end(), v) == m.end()) fail("slot_of disagrees with cluster members");
        }

        // orthonormal rows and beta = Phi^T beta_tilde round trip
        const Projection phi(pi);
        for (int k = 0; k < phi.rows(); ++k)
            if (std::abs(phi.scale(k) * phi.scale(k) * phi.members(k).size() - 1.0) > 1e-12) fail("Phi row norm != 1");
        const auto tilde = s.canonical(s.beta_tilde);
        const auto back = phi.apply(phi.apply_transpose(tilde));
        for (std::size_t k = 0; k < tilde.size(); ++k)
            if (std::abs(back[k] - tilde[k]) > 1e-12 * (1.0 + std::abs(tilde[k]))) fail("Phi Phi^T != I");

        // cached linear algebra against a from-scratch rebuild
        ModelState fresh = s;
        rebuild_linear_algebra(fresh);
        const MatrixXd a = inner_matrix(fresh.gram, s.tau, s.lambda);
        const double rel = (s.chol.reconstruct() - a).norm() / a.norm();
        if (!(rel < 1e-8)) fail("Cholesky factor drifted: relative error " + std::to_string(rel));
        if ((fresh.gram - s.gram).norm() > 1e-8 * (1.0 + fresh.gram.norm())) fail("cached Gram matrix drifted");
        if ((fresh.xty - s.xty).norm() > 1e-8 * (1.0 + fresh.xty.norm())) fail("cached Xt^T y drifted");
    }

    // A split from k and the merge back from k + 1 must have cancelling ratios.
    void check_reversibility(int k) const
    {
        if (k < graph_->num_components() || k >= graph_->num_vertices()) return;
        const auto [sa, sp] = split_log_ratios(k);
        const auto [ma, mp] = merge_log_ratios(k + 1);
        if (std::abs(sa + sp + ma + mp) > 1e-12)
            throw InvariantViolation("split/merge prior and proposal ratios do not cancel");
    }

    /* Cuts forest edge e. The child holding the parent's smallest vertex keeps
     * the parent's lambda; the other child receives new_lambda. */
    void apply_split(ModelState& s, int e, double new_lambda) const
    {
        const auto [u, v] = s.topology->edges[e];
        const int slot = s.slot_of[u];
        const ClusterPtr parent = s.clusters[slot];
        const double parent_lambda = s.lambda(slot);

        s.cut[e] = 1;
        s.uncut_edges.erase(e);
        s.cut_edges.insert(e);

        // side of u after the cut, by traversal of the uncut forest
        std::vector<char> on_u_side(s.slot_of.size(), 0);
        std::vector<int> side_u{u};
        on_u_side[u] = 1;
        for (std::size_t h = 0; h < side_u.size(); ++h)
            for (const auto& [w, idx] : s.topology->adjacency[side_u[h]])
                if (!s.cut[idx] && !on_u_side[w]) {
                    on_u_side[w] = 1;
                    side_u.push_back(w);
                }
        std::vector<int> side_v;
        side_v.reserve(parent->members.size() - side_u.size());
        for (int w : parent->members)
            if (!on_u_side[w]) side_v.push_back(w);

        // sum the smaller side, obtain the larger by subtraction
        const bool u_smaller = side_u.size() <= side_v.size();
        ClusterPtr small = make_cluster(u_smaller ? std::move(side_u) : std::move(side_v));
        auto large = std::make_shared<Cluster>();
        large->members = u_smaller ? std::move(side_v) : std::move(side_u);
        large->min_vertex = *std::min_element(large->members.begin(), large->members.end());
        if (!data_->is_normal_means()) large->colsum = parent->colsum - small->colsum;
        large->xty_sum = parent->xty_sum - small->xty_sum;

        remove_slot(s, slot);
        const bool small_keeps = small->min_vertex == parent->min_vertex;
        append_slot(s, small, small_keeps ? parent_lambda : new_lambda);
        append_slot(s, std::move(large), small_keeps ? new_lambda : parent_lambda);
    }

    /* Removes cut edge e, fusing its two clusters; the fused cluster keeps the
     * lambda of the part holding the smaller vertex. */
    void apply_merge(ModelState& s, int e) const
    {
        const auto [u, v] = s.topology->edges[e];
        int su = s.slot_of[u], sv = s.slot_of[v];
        const ClusterPtr a = s.clusters[su], b = s.clusters[sv];
        const double lambda = a->min_vertex < b->min_vertex ? s.lambda(su) : s.lambda(sv);

        s.cut[e] = 0;
        s.cut_edges.erase(e);
        s.uncut_edges.insert(e);

        auto fused = std::make_shared<Cluster>();
        fused->members = a->members;
        fused->members.insert(fused->members.end(), b->members.begin(), b->members.end());
        fused->min_vertex = std::min(a->min_vertex, b->min_vertex);
        if (!data_->is_normal_means()) fused->colsum = a->colsum + b->colsum;
        fused->xty_sum = a->xty_sum + b->xty_sum;

        remove_slot(s, std::max(su, sv));
        remove_slot(s, std::min(su, sv));
        append_slot(s, std::move(fused), lambda);
    }

    // New compatible forest; clusters and linear algebra are unchanged.
    void hyper_move()
    {
        const SpanningForest f = resample_forest_compatible(*graph_, state_.partition(), rng_);
        state_.topology = std::make_shared<ForestTopology>(graph_->num_vertices(), f.edges);
        set_cut_flags(state_, f.cut);
    }

private:
    std::array<double, 4> move_weights(int k) const
    {
        const int p = graph_->num_vertices(), nc = graph_->num_components();
        std::array<double, 4> w = h_.move_probs;
        if (k >= p) w[0] = 0.0;
        if (k <= nc) w[1] = w[2] = 0.0;
        return w;
    }

    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(rng_); }
    double normal() { return std::normal_distribution<double>(0.0, 1.0)(rng_); }

    // Half-Cauchy C+(0, 1) draw for a newly created cluster; 1 when lambda is held fixed.
    double draw_new_lambda()
    {
        if (!opts_.sample_lambda) return 1.0;
        double u;
        do u = uniform();
        while (!(u > 0.0));
        return std::tan(0.5 * std::numbers::pi * u);
    }

    void bind_response()
    {
        const int p = data_->p();
        col_xty_.resize(static_cast<std::size_t>(p));
        if (data_->is_normal_means()) {
            for (int j = 0; j < p; ++j) col_xty_[j] = data_->y()(j);
        } else {
            VectorXd c = data_->x().transpose() * data_->y();
            for (int j = 0; j < p; ++j) col_xty_[j] = c(j);
        }
    }

    ClusterPtr make_cluster(std::vector<int> members) const
    {
        auto c = std::make_shared<Cluster>();
        c->members = std::move(members);
        c->min_vertex = *std::min_element(c->members.begin(), c->members.end());
        if (!data_->is_normal_means()) {
            c->colsum = VectorXd::Zero(data_->n());
            for (int j : c->members) data_->add_column(j, c->colsum);
        }
        for (int j : c->members) c->xty_sum += col_xty_[j];
        return c;
    }

    double cluster_dot(const Cluster& a, const Cluster& b) const
    {
        if (data_->is_normal_means()) return &a == &b ? a.size() : 0.0;
        return a.colsum.dot(b.colsum);
    }

    void set_cut_flags(ModelState& s, const std::vector<bool>& cut) const
    {
        const int m = static_cast<int>(cut.size());
        s.cut.assign(cut.size(), 0);
        s.cut_edges = IndexPool(m);
        s.uncut_edges = IndexPool(m);
        for (int i = 0; i < m; ++i) {
            s.cut[i] = cut[i] ? 1 : 0;
            if (cut[i]) s.cut_edges.insert(i);
            else s.uncut_edges.insert(i);
        }
    }

    void rebuild_linear_algebra(ModelState& s) const
    {
        const int k = s.K();
        s.gram.resize(k, k);
        s.xty.resize(k);
        for (int i = 0; i < k; ++i) {
            const Cluster& ci = *s.clusters[i];
            s.xty(i) = ci.xty_sum / std::sqrt(ci.size());
            for (int j = 0; j <= i; ++j) {
                const Cluster& cj = *s.clusters[j];
                s.gram(i, j) = s.gram(j, i) = cluster_dot(ci, cj) / std::sqrt(ci.size() * cj.size());
            }
        }
        s.chol = cholesky(inner_matrix(s.gram, s.tau, s.lambda));
    }

    void remove_slot(ModelState& s, int slot) const
    {
        const int k = s.K();
        s.chol = delete_column(s.chol, slot);
        auto drop = [&](VectorXd& v) {
            VectorXd out(k - 1);
            out << v.head(slot), v.tail(k - 1 - slot);
            v = std::move(out);
        };
        MatrixXd g(k - 1, k - 1);
        const int tail = k - 1 - slot;
        g.topLeftCorner(slot, slot) = s.gram.topLeftCorner(slot, slot);
        g.topRightCorner(slot, tail) = s.gram.topRightCorner(slot, tail);
        g.bottomLeftCorner(tail, slot) = s.gram.bottomLeftCorner(tail, slot);
        g.bottomRightCorner(tail, tail) = s.gram.bottomRightCorner(tail, tail);
        s.gram = std::move(g);
        drop(s.xty);
        drop(s.lambda);
        drop(s.beta_tilde);
        for (int v : s.clusters[slot]->members) s.slot_of[v] = -1;
        s.clusters.erase(s.clusters.begin() + slot);
        for (int t = slot; t < k - 1; ++t)
            for (int v : s.clusters[t]->members) s.slot_of[v] = t;
    }

    void append_slot(ModelState& s, ClusterPtr c, double lambda) const
    {
        const int k = s.K();
        const double size = c->size();
        VectorXd col(k);
        for (int i = 0; i < k; ++i)
            col(i) = cluster_dot(*s.clusters[i], *c) / std::sqrt(s.clusters[i]->size() * size);
        const double diag = cluster_dot(*c, *c) / size;
        s.chol = append_column(s.chol, col, diag + 1.0 / (s.tau * s.tau * lambda * lambda));

        MatrixXd g(k + 1, k + 1);
        g.topLeftCorner(k, k) = s.gram;
        g.col(k).head(k) = col;
        g.row(k).head(k) = col.transpose();
        g(k, k) = diag;
        s.gram = std::move(g);
        auto push = [&](VectorXd& v, double x) {
            v.conservativeResize(k + 1);
            v(k) = x;
        };
        push(s.xty, c->xty_sum / std::sqrt(size));
        push(s.lambda, lambda);
        push(s.beta_tilde, 0.0);
        for (int v : c->members) s.slot_of[v] = k;
        s.clusters.push_back(std::move(c));
    }

    const Dataset* data_;
    const Graph* graph_;
    Hyperparams h_;
    SamplerOptions opts_;
    Rng rng_;
    double log_step_;
    std::vector<double> col_xty_;
    ModelState state_;
    std::map<std::string, AcceptanceStats> stats_;
};

/* Runs burnin + iters iterations and keeps every thin-th post burn-in draw.
 * The tau step adapts during burn-in only. */
inline ChainOutput run_chain(const Dataset& data, const Graph& g, const Hyperparams& h, const Schedule& schedule,
                             Rng rng, SamplerOptions opts = {})
{
    schedule.validate();
    const auto start = std::chrono::steady_clock::now();
    Sampler sampler(data, g, h, opts, std::move(rng));
    sampler.initialize();
    ChainOutput out;
    out.draws.reserve(static_cast<std::size_t>(schedule.iters / schedule.thin));
    const long total = schedule.burnin + schedule.iters;
    for (long t = 0; t < total; ++t) {
        const bool burnin = t < schedule.burnin;
        sampler.iterate(burnin, t);
        if (!burnin && (t - schedule.burnin + 1) % schedule.thin == 0) out.draws.push_back(sampler.snapshot(t));
    }
    out.acceptance = sampler.acceptance();
    out.final_tau_step = sampler.tau_step();
    out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

// Independent chains, one thread each; chain c uses stream c of the seed.
inline std::vector<ChainOutput> run_chains(const Dataset& data, const Graph& g, const Hyperparams& h,
                                           const Schedule& schedule, std::uint64_t seed, int chains,
                                           SamplerOptions opts = {})
{
    if (chains < 1) throw ConfigError("chains must be at least 1");
    std::vector<ChainOutput> out(static_cast<std::size_t>(chains));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chains));
    std::vector<std::thread> workers;
    for (int c = 0; c < chains; ++c)
        workers.emplace_back([&, c] {
            try {
                out[c] = run_chain(data, g, h, schedule, make_rng(seed, static_cast<std::uint64_t>(c)), opts);
            } catch (...) {
                errors[c] = std::current_exception();
            }
        });
    for (auto& w : workers) w.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace tloho
