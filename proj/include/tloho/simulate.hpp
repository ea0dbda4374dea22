#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "tloho/graph.hpp"
#include "tloho/linalg.hpp"
#include "tloho/model.hpp"
#include "tloho/partition.hpp"

namespace tloho {

struct SimConfig {
    int lattice_side = 30;
    int n_train = 100;
    int n_test = 1000;
    double theta = 0.0; // GP range; 0 means independent predictors
    double snr = 4.0;
    std::string true_beta_spec = "blobs"; // or "file"
    std::vector<double> true_beta;             // used when true_beta_spec == "file"
    std::uint64_t seed = 1;

    void validate() const
    {
        if (lattice_side < 2) throw ConfigError("lattice_side must be at least 2");
        if (n_train < 2 || n_test < 1) throw ConfigError("need n_train >= 2 and n_test >= 1");
        if (!(snr > 0.0)) throw ConfigError("snr must be positive");
        if (!(theta >= 0.0)) throw ConfigError("theta must be nonnegative");
        if (true_beta_spec == "file") {
            const auto p = static_cast<std::size_t>(lattice_side) * static_cast<std::size_t>(lattice_side);
            if (true_beta.size() != p)
                throw ConfigError("true beta file has " + std::to_string(true_beta.size()) + " entries, expected " +
                                  std::to_string(p));
        } else if (true_beta_spec != "blobs") {
            throw ConfigError("unknown true_beta_spec '" + true_beta_spec + "'");
        }
    }
};

/* Piecewise-constant image on a 30 x 30 template with 144 nonzero pixels
 * (84% zeros) in three irregular clusters of 72, 48 and 24 pixels. The first
 * two touch, with opposite signs; values are set so each cluster carries a
 * similar share of the signal energy. Other sides are resampled from the template
 * by nearest neighbour. Row-major, vertex = row * side + col. */
inline std::vector<double> blob_beta(int side = 30)
{
    constexpr int T = 30;
    std::vector<double> tmpl(T * T, 0.0);
    auto fill = [&](int r0, int r1, int c0, int c1, double v) {
        for (int r = r0; r < r1; ++r)
            for (int c = c0; c < c1; ++c) tmpl[r * T + c] = v;
    };
    fill(4, 10, 4, 14, 7.0);
    fill(10, 13, 6, 10, 7.0);
    fill(4, 10, 14, 20, -9.0);
    fill(2, 4, 15, 21, -9.0);
    fill(20, 25, 20, 24, 11.0);
    fill(25, 26, 21, 25, 11.0);
    if (side == T) return tmpl;
    std::vector<double> out(static_cast<std::size_t>(side) * side);
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) out[r * side + c] = tmpl[(r * T / side) * T + (c * T / side)];
    return out;
}

// Maximal connected regions of equal coefficient value.
inline Partition true_partition(const std::vector<double>& beta, const Graph& g)
{
    UnionFind uf(g.num_vertices());
    for (const auto& [u, v] : g.edges())
        if (beta[u] == beta[v]) uf.unite(u, v);
    std::vector<int> roots(beta.size());
    for (int v = 0; v < g.num_vertices(); ++v) roots[v] = uf.find(v);
    return canonical_partition(roots, g.num_vertices());
}

/* Cholesky factor L of the exp(-d / theta) kernel over lattice pixel
 * coordinates; a 1e-10 jitter is tried once if the plain factorization fails. */
inline MatrixXd gp_kernel_factor(int side, double theta)
{
    const int p = side * side;
    MatrixXd k(p, p);
    for (int a = 0; a < p; ++a)
        for (int b = 0; b < p; ++b) {
            const double dr = a / side - b / side, dc = a % side - b % side;
            k(a, b) = std::exp(-std::sqrt(dr * dr + dc * dc) / theta);
        }
    Eigen::LLT<MatrixXd> llt(k);
    if (llt.info() != Eigen::Success) {
        k.diagonal().array() += 1e-10;
        llt.compute(k);
        if (llt.info() != Eigen::Success) throw DataError("GP kernel matrix is not positive definite after jitter");
    }
    return llt.matrixL();
}

struct SyntheticData {
    Graph graph;
    MatrixXd x_train; // columns scaled to unit norm
    VectorXd y_train;
    MatrixXd x_test; // scaled by the training column norms
    VectorXd y_test;
    std::vector<double> beta;
    Partition truth;
    double sigma2 = 0.0;
};

template <class Urbg>
SyntheticData generate_synthetic(const SimConfig& cfg, Urbg& rng)
{
    cfg.validate();
    const int side = cfg.lattice_side, p = side * side;
    SyntheticData d{lattice_graph(side, side), {}, {}, {}, {}, {}, {}, 0.0};
    d.beta = cfg.true_beta_spec == "file" ? cfg.true_beta : blob_beta(side);
    d.truth = true_partition(d.beta, d.graph);

    std::normal_distribution<double> normal(0.0, 1.0);
    auto draw_rows = [&](int n) {
        MatrixXd z(n, p);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < p; ++j) z(i, j) = normal(rng);
        return z;
    };
    d.x_train = draw_rows(cfg.n_train);
    d.x_test = draw_rows(cfg.n_test);
    if (cfg.theta > 0.0) {
        const MatrixXd l = gp_kernel_factor(side, cfg.theta);
        // each row is L z, so rows of X Z^T have covariance L L^T
        d.x_train = d.x_train * l.transpose();
        d.x_test = d.x_test * l.transpose();
    }
    for (int j = 0; j < p; ++j) {
        const double norm = d.x_train.col(j).norm();
        d.x_train.col(j) /= norm;
        d.x_test.col(j) /= norm;
    }

    const Eigen::Map<const VectorXd> b(d.beta.data(), p);
    const VectorXd signal = d.x_train * b;
    const double var = (signal.array() - signal.mean()).square().sum() / (cfg.n_train - 1.0);
    d.sigma2 = var / cfg.snr;
    const double sd = std::sqrt(d.sigma2);
    d.y_train = signal;
    for (int i = 0; i < cfg.n_train; ++i) d.y_train(i) += sd * normal(rng);
    d.y_test = d.x_test * b;
    for (int i = 0; i < cfg.n_test; ++i) d.y_test(i) += sd * normal(rng);
    return d;
}

inline double mspe(const VectorXd& beta_hat, const MatrixXd& x_test, const VectorXd& y_test)
{
    if (x_test.cols() != beta_hat.size() || x_test.rows() != y_test.size() || y_test.size() == 0)
        throw std::invalid_argument("mspe: dimension mismatch");
    return (y_test - x_test * beta_hat).squaredNorm() / static_cast<double>(y_test.size());
}

} // namespace tloho
