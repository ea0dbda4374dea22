#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace tloho {

using Eigen::MatrixXd;
using Eigen::VectorXd;

class NotPositiveDefinite : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A pivot whose square drops below this fraction of its reference diagonal is
// treated as loss of positive definiteness. No jitter is ever added.
inline constexpr double kPivotTolerance = 1e-12;

/* Upper-triangular Cholesky factor R with R^T R = A.
 *
 * Used for A = tau^-2 Lambda^-1 + Xt^T Xt. The log-determinant of A is cached
 * and refreshed by every mutating operation. */
class CholState {
public:
    CholState() = default;
    explicit CholState(MatrixXd r) : r_(std::move(r)) { refresh_logdet(); }

    int dim() const { return static_cast<int>(r_.rows()); }
    const MatrixXd& factor() const { return r_; }
    double logdet() const { return logdet_; }

    // R^T R, for checks.
    MatrixXd reconstruct() const { return r_.transpose() * r_; }

    MatrixXd& mutable_factor() { return r_; }
    void refresh_logdet()
    {
        logdet_ = 0.0;
        for (Eigen::Index k = 0; k < r_.rows(); ++k) logdet_ += 2.0 * std::log(r_(k, k));
    }

private:
    MatrixXd r_;
    double logdet_ = 0.0;
};

inline CholState cholesky(const MatrixXd& a)
{
    if (a.rows() != a.cols()) throw std::invalid_argument("cholesky: matrix is not square");
    const Eigen::Index k = a.rows();
    MatrixXd r = MatrixXd::Zero(k, k);
    for (Eigen::Index j = 0; j < k; ++j) {
        double pivot_sq = a(j, j) - r.col(j).head(j).squaredNorm();
        if (!(pivot_sq > kPivotTolerance * std::abs(a(j, j))))
            throw NotPositiveDefinite("cholesky: non-positive pivot at index " + std::to_string(j));
        double pivot = std::sqrt(pivot_sq);
        r(j, j) = pivot;
        for (Eigen::Index i = j + 1; i < k; ++i)
            r(j, i) = (a(j, i) - r.col(j).head(j).dot(r.col(i).head(j))) / pivot;
    }
    return CholState(std::move(r));
}

namespace detail {

// In-place update (sign > 0) or downdate (sign < 0) of the trailing block of
// r starting at row/column `from`, with v indexed over the full dimension.
inline void rank_one_inplace(MatrixXd& r, VectorXd v, int sign, Eigen::Index from)
{
    const Eigen::Index k = r.rows();
    for (Eigen::Index i = from; i < k; ++i) {
        if (v(i) == 0.0) continue;
        const double rii = r(i, i);
        double pivot;
        if (sign > 0) {
            pivot = std::hypot(rii, v(i));
        } else {
            double pivot_sq = (rii - v(i)) * (rii + v(i));
            if (!(pivot_sq > kPivotTolerance * rii * rii))
                throw NotPositiveDefinite("rank-one downdate: loss of positive definiteness at index " +
                                          std::to_string(i));
            pivot = std::sqrt(pivot_sq);
        }
        const double c = pivot / rii;
        const double s = v(i) / rii;
        r(i, i) = pivot;
        for (Eigen::Index j = i + 1; j < k; ++j) {
            r(i, j) = (r(i, j) + sign * s * v(j)) / c;
            v(j) = c * v(j) - s * r(i, j);
        }
    }
}

} // namespace detail

// Factor of R^T R + sign * v v^T in O(K^2).
inline CholState rank_one_update(CholState c, const VectorXd& v, int sign)
{
    if (v.size() != c.dim()) throw std::invalid_argument("rank_one_update: dimension mismatch");
    if (sign != 1 && sign != -1) throw std::invalid_argument("rank_one_update: sign must be +1 or -1");
    detail::rank_one_inplace(c.mutable_factor(), v, sign, 0);
    c.refresh_logdet();
    return c;
}

/* Factor of A + delta e_k e_k^T. Rows above k are untouched; row k is
 * rescaled and the trailing block absorbs a rank-one correction.
 *
 * When the caller knows the new diagonal entry of A exactly it can pass it as
 * new_diagonal; the new pivot is then formed as A'_kk - |R(0:k, k)|^2, which
 * avoids cancellation when delta nearly annihilates a large diagonal. */
inline CholState diagonal_update(CholState c, int k, double delta,
                                 double new_diagonal = std::numeric_limits<double>::quiet_NaN())
{
    MatrixXd& r = c.mutable_factor();
    const Eigen::Index dim = r.rows();
    if (k < 0 || k >= dim) throw std::invalid_argument("diagonal_update: index out of range");
    if (delta == 0.0) return c;
    const double rkk = r(k, k);
    double pivot_sq = std::isnan(new_diagonal) ? rkk * rkk + delta
                                               : new_diagonal - r.col(k).head(k).squaredNorm();
    double reference = std::isnan(new_diagonal) ? rkk * rkk + std::max(delta, 0.0) : std::abs(new_diagonal);
    if (!(pivot_sq > kPivotTolerance * reference))
        throw NotPositiveDefinite("diagonal_update: loss of positive definiteness at index " + std::to_string(k));
    const double pivot = std::sqrt(pivot_sq);

    const Eigen::Index tail = dim - k - 1;
    VectorXd v = VectorXd::Zero(dim);
    v.tail(tail) = (std::sqrt(std::abs(delta)) / pivot) * r.row(k).tail(tail).transpose();
    r.row(k).tail(tail) *= rkk / pivot;
    r(k, k) = pivot;
    if (tail > 0) detail::rank_one_inplace(r, std::move(v), delta > 0 ? 1 : -1, k + 1);
    c.refresh_logdet();
    return c;
}

// Factor of A with row and column k removed, via Givens rotations; O(K^2).
inline CholState delete_column(const CholState& c, int k)
{
    const MatrixXd& r = c.factor();
    const Eigen::Index dim = r.rows();
    if (k < 0 || k >= dim) throw std::invalid_argument("delete_column: index out of range");
    MatrixXd h(dim, dim - 1);
    h.leftCols(k) = r.leftCols(k);
    h.rightCols(dim - 1 - k) = r.rightCols(dim - 1 - k);
    for (Eigen::Index j = k; j < dim - 1; ++j) {
        const double a = h(j, j), b = h(j + 1, j);
        const double rho = std::hypot(a, b);
        const double cs = a / rho, sn = b / rho;
        for (Eigen::Index col = j; col < dim - 1; ++col) {
            const double top = h(j, col), bottom = h(j + 1, col);
            h(j, col) = cs * top + sn * bottom;
            h(j + 1, col) = -sn * top + cs * bottom;
        }
        h(j + 1, j) = 0.0;
    }
    return CholState(h.topRows(dim - 1));
}

/* Factor of [[A, a], [a^T, d]]: one forward substitution plus a new pivot. */
inline CholState append_column(const CholState& c, const VectorXd& a, double d)
{
    const Eigen::Index dim = c.dim();
    if (a.size() != dim) throw std::invalid_argument("append_column: dimension mismatch");
    VectorXd col = dim > 0 ? VectorXd(c.factor().transpose().triangularView<Eigen::Lower>().solve(a)) : VectorXd();
    const double pivot_sq = d - col.squaredNorm();
    if (!(pivot_sq > kPivotTolerance * std::abs(d)))
        throw NotPositiveDefinite("append_column: new pivot is not positive");
    MatrixXd r = MatrixXd::Zero(dim + 1, dim + 1);
    r.topLeftCorner(dim, dim) = c.factor();
    r.col(dim).head(dim) = col;
    r(dim, dim) = std::sqrt(pivot_sq);
    return CholState(std::move(r));
}

enum class Triangle { lower, upper };

// lower: solves R^T x = b; upper: solves R x = b.
inline VectorXd triangular_solve(const CholState& c, const VectorXd& b, Triangle mode)
{
    if (b.size() != c.dim()) throw std::invalid_argument("triangular_solve: dimension mismatch");
    if (c.dim() == 0) return VectorXd();
    if (mode == Triangle::lower) return c.factor().transpose().triangularView<Eigen::Lower>().solve(b);
    return c.factor().triangularView<Eigen::Upper>().solve(b);
}

/* Conjugate prior IG(shape, rate) on sigma^2; shape = rate = 0 is the
 * Jeffreys prior 1/sigma^2. */
struct NoisePrior {
    double shape = 0.0;
    double rate = 0.0;
};

struct CollapsedTerms {
    double log_det_sigma = 0.0; // log |I + tau^2 Xt Lambda Xt^T|
    double quad = 0.0;          // y^T Sigma^-1 y
    double loglik = 0.0;
};

/* Collapsed log-likelihood from a factor of A = tau^-2 Lambda^-1 + Xt^T Xt.
 *
 * xty = Xt^T y and yy = y^T y. Sherman-Woodbury-Morrison gives
 * y^T Sigma^-1 y = yy - |R^-T xty|^2, and the determinant lemma gives
 * log|Sigma| = log|A| + log|tau^2 Lambda|. Value up to an additive constant:
 *   -1/2 log|Sigma| - (shape + n/2) log(rate + y^T Sigma^-1 y / 2). */
inline CollapsedTerms collapsed_terms(const CholState& c, const VectorXd& xty, double yy, int n, double tau,
                                      const VectorXd& local_scales, NoisePrior prior = {})
{
    CollapsedTerms t;
    double log_scale = 2.0 * c.dim() * std::log(tau);
    for (Eigen::Index k = 0; k < local_scales.size(); ++k) log_scale += 2.0 * std::log(local_scales(k));
    t.log_det_sigma = c.logdet() + log_scale;
    t.quad = c.dim() > 0 ? yy - triangular_solve(c, xty, Triangle::lower).squaredNorm() : yy;
    if (t.quad < 0.0) t.quad = 0.0;
    t.loglik = -0.5 * t.log_det_sigma;
    // With y = 0 and the Jeffreys prior the quadratic factor is the same
    // degenerate constant for every parameter value, so it is dropped.
    const double rate = prior.rate + 0.5 * t.quad;
    if (rate > 0.0) t.loglik -= (prior.shape + 0.5 * n) * std::log(rate);
    return t;
}

inline MatrixXd inner_matrix(const MatrixXd& gram, double tau, const VectorXd& local_scales)
{
    MatrixXd a = gram;
    for (Eigen::Index k = 0; k < a.rows(); ++k) a(k, k) += 1.0 / (tau * tau * local_scales(k) * local_scales(k));
    return a;
}

// Collapsed log-likelihood for an explicit reduced design Xt (n x K); O(nK^2 + K^3).
inline std::pair<double, CholState> collapsed_loglik(const VectorXd& y, const MatrixXd& xt, double tau,
                                                     const VectorXd& local_scales, NoisePrior prior = {})
{
    if (xt.rows() != y.size() || xt.cols() != local_scales.size())
        throw std::invalid_argument("collapsed_loglik: dimension mismatch");
    if (!(tau > 0.0) || (local_scales.array() <= 0.0).any())
        throw std::invalid_argument("collapsed_loglik: scales must be positive");
    CholState c = cholesky(inner_matrix(xt.transpose() * xt, tau, local_scales));
    VectorXd xty = xt.transpose() * y;
    auto t = collapsed_terms(c, xty, y.squaredNorm(), static_cast<int>(y.size()), tau, local_scales, prior);
    return {t.loglik, std::move(c)};
}

} // namespace tloho
