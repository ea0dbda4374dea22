#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tloho/graph.hpp"
#include "tloho/linalg.hpp"
#include "tloho/partition.hpp"

namespace tloho {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DataError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class MoveKind { split = 0, merge = 1, change = 2, hyper = 3 };

inline const char* move_name(MoveKind m)
{
    switch (m) {
    case MoveKind::split: return "split";
    case MoveKind::merge: return "merge";
    case MoveKind::change: return "change";
    case MoveKind::hyper: return "hyper";
    }
    return "?";
}

struct Hyperparams {
    double tau0 = 1.0; // scale of the half-Cauchy prior on tau
    double c = 0.5;    // Pr(K = k) proportional to (1 - c)^k
    // split, merge, change, hyper
    std::array<double, 4> move_probs{0.3, 0.3, 0.35, 0.05};
    double mh_step_tau = 0.5; // random-walk scale on log tau
    NoisePrior noise_prior{};

    void validate() const
    {
        if (!(tau0 > 0.0)) throw ConfigError("tau0 must be positive");
        if (!(c >= 0.0 && c < 1.0)) throw ConfigError("c must lie in [0, 1)");
        double sum = 0.0;
        for (double q : move_probs) {
            if (!(q >= 0.0)) throw ConfigError("move probabilities must be nonnegative");
            sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("move probabilities must sum to 1");
        if (!(mh_step_tau > 0.0)) throw ConfigError("mh_step_tau must be positive");
        if (noise_prior.shape < 0.0 || noise_prior.rate < 0.0) throw ConfigError("noise prior must be nonnegative");
    }
};

/* Response and column-standardized design.
 *
 * In normal-means mode the design is the n x n identity and is never
 * materialized. column_norms keeps the l2 norms removed by standardization so
 * coefficients can be reported on the original scale. */
class Dataset {
public:
    Dataset(MatrixXd x, VectorXd y) : x_(std::move(x)), y_(std::move(y))
    {
        if (x_.rows() != y_.size())
            throw DataError("design has " + std::to_string(x_.rows()) + " rows but response has " +
                            std::to_string(y_.size()) + " entries");
        if (x_.rows() < 1 || x_.cols() < 1) throw DataError("design must be at least 1 x 1");
        norms_.resize(x_.cols());
        for (Eigen::Index j = 0; j < x_.cols(); ++j) {
            norms_(j) = x_.col(j).norm();
            if (!(norms_(j) > 0.0)) throw DataError("design column " + std::to_string(j) + " has zero norm");
            x_.col(j) /= norms_(j);
        }
        yy_ = y_.squaredNorm();
    }

    static Dataset normal_means(VectorXd y)
    {
        if (y.size() < 1) throw DataError("response must have at least one entry");
        return Dataset(std::move(y));
    }

    int n() const { return static_cast<int>(y_.size()); }
    int p() const { return identity_ ? n() : static_cast<int>(x_.cols()); }
    bool is_normal_means() const { return identity_; }
    const VectorXd& y() const { return y_; }
    double yy() const { return yy_; }
    const VectorXd& column_norms() const { return norms_; }
    // Standardized design; empty in normal-means mode.
    const MatrixXd& x() const { return x_; }

    // acc += sign * X[:, j]
    void add_column(int j, VectorXd& acc, double sign = 1.0) const
    {
        if (identity_) acc(j) += sign;
        else acc += sign * x_.col(j);
    }

    double column_dot_y(int j) const { return identity_ ? y_(j) : x_.col(j).dot(y_); }

    // Same design, different response (used when simulating from the model).
    Dataset with_response(VectorXd y) const
    {
        if (y.size() != y_.size()) throw DataError("replacement response has the wrong length");
        Dataset d = *this;
        d.y_ = std::move(y);
        d.yy_ = d.y_.squaredNorm();
        return d;
    }

    VectorXd predict(const std::vector<double>& beta) const
    {
        if (identity_) return Eigen::Map<const VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
        return x_ * Eigen::Map<const VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    }

private:
    explicit Dataset(VectorXd y) : y_(std::move(y)), identity_(true)
    {
        norms_ = VectorXd::Ones(y_.size());
        yy_ = y_.squaredNorm();
    }

    MatrixXd x_;
    VectorXd y_;
    VectorXd norms_;
    double yy_ = 0.0;
    bool identity_ = false;
};

inline double log_binomial(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

// log Pr(K = k) with Pr(K = k) proportional to (1 - c)^k on {n_c, ..., p}.
inline double log_prior_K(int k, const Graph& g, const Hyperparams& h)
{
    const int nc = g.num_components(), p = g.num_vertices();
    if (k < nc || k > p) throw std::out_of_range("log_prior_K: k outside [n_c, p]");
    if (h.c == 0.0) return -std::log(static_cast<double>(p - nc + 1));
    const double log_ratio = std::log1p(-h.c);
    // sum_{j=nc}^{p} (1-c)^j = (1-c)^nc (1 - (1-c)^(p-nc+1)) / c
    const double log_norm = nc * log_ratio + std::log(-std::expm1((p - nc + 1) * log_ratio)) - std::log(h.c);
    return k * log_ratio - log_norm;
}

// Uniform choice of the K - n_c cut edges among the p - n_c forest edges.
inline double log_prior_partition_given_forest(const Partition& pi, const Graph& g)
{
    const int nc = g.num_components(), p = g.num_vertices();
    return -log_binomial(p - nc, pi.num_clusters() - nc);
}

// Independent half-Cauchy C+(0, 1) densities.
template <class Range>
double log_prior_local_scales(const Range& lambda)
{
    double s = 0.0;
    for (double l : lambda) {
        if (!(l > 0.0)) throw std::invalid_argument("local scales must be positive");
        s += std::log(2.0 / std::numbers::pi) - std::log1p(l * l);
    }
    return s;
}

inline double log_half_cauchy(double x, double scale)
{
    return std::log(2.0 / (std::numbers::pi * scale)) - std::log1p((x / scale) * (x / scale));
}

} // namespace tloho
