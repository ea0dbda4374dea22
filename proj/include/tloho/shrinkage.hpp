#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace tloho {

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/* Two-sample t statistic with its group sizes. Sizes may be fractional so that
 * a 9:1 split can be expressed for any nu. */
struct TwoSampleStat {
    double t = 0.0;
    double n1 = 1.0;
    double n2 = 1.0;

    double nu() const { return n1 + n2 - 2.0; }
    double n_delta() const { return 1.0 / (1.0 / n1 + 1.0 / n2); }

    void validate() const
    {
        if (!(n1 > 0.0 && n2 > 0.0)) throw std::invalid_argument("group sizes must be positive");
        if (!(nu() > 0.0)) throw std::invalid_argument("degrees of freedom n1 + n2 - 2 must be positive");
        if (!std::isfinite(t)) throw std::invalid_argument("t statistic must be finite");
    }
};

// Density of the variance w when the difference of two horseshoe draws is
// written as a normal scale mixture.
inline double mixing_density(double w, double tau1, double tau2)
{
    if (!(w > 0.0) || !(tau1 > 0.0) || !(tau2 > 0.0))
        throw std::invalid_argument("mixing_density: arguments must be positive");
    const double s1 = std::sqrt(w + tau1 * tau1);
    const double s2 = std::sqrt(w + tau2 * tau2);
    return (tau1 * s1 + tau2 * s2) / (std::numbers::pi * s1 * s2 * (w + tau1 * tau1 + tau2 * tau2));
}

inline constexpr double kQuadratureTolerance = 1e-6;

/* Integral of g over w in (lo, hi) with lo >= 0, after substituting w = e^u.
 * The u-axis is split at the given breakpoints (in w units), each piece is
 * integrated by adaptive Gauss-Kronrod, and the estimated error is checked
 * against the requested relative tolerance. */
template <class F>
double integrate_log_domain(F&& g, std::vector<double> breakpoints, double lo = 0.0,
                            double hi = std::numeric_limits<double>::infinity(),
                            double rel_tol = kQuadratureTolerance)
{
    using boost::math::quadrature::gauss_kronrod;
    const double inf = std::numeric_limits<double>::infinity();
    const double ulo = lo > 0.0 ? std::log(lo) : -inf;
    const double uhi = std::isinf(hi) ? inf : std::log(hi);
    std::vector<double> cuts;
    for (double b : breakpoints)
        if (b > 0.0 && std::isfinite(b) && std::log(b) > ulo && std::log(b) < uhi) cuts.push_back(std::log(b));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    cuts.insert(cuts.begin(), ulo);
    cuts.push_back(uhi);

    auto integrand = [&](double u) {
        const double w = std::exp(u);
        if (!(w > 0.0) || !std::isfinite(w)) return 0.0;
        return g(w) * w;
    };
    double total = 0.0, error = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (!(cuts[i + 1] > cuts[i])) continue;
        double err = 0.0, piece_l1 = 0.0;
        total += gauss_kronrod<double, 31>::integrate(integrand, cuts[i], cuts[i + 1], 20, rel_tol * 1e-2, &err,
                                                      &piece_l1);
        error += err;
        l1 += piece_l1;
    }
    if (!(error <= rel_tol * std::max(std::abs(total), std::numeric_limits<double>::min())) || !std::isfinite(total))
        throw QuadratureError("quadrature did not reach relative error " + std::to_string(rel_tol) +
                              " (estimate " + std::to_string(error) + " on " + std::to_string(total) + ")");
    return total;
}

// P(W <= w) under the mixing density.
inline double mixing_cdf(double w, double tau1, double tau2)
{
    if (!(w > 0.0)) throw std::invalid_argument("mixing_cdf: w must be positive");
    return integrate_log_domain([&](double x) { return mixing_density(x, tau1, tau2); },
                                {tau1 * tau1, tau2 * tau2}, 0.0, w);
}

inline double mixing_total_mass(double tau1, double tau2)
{
    return integrate_log_domain([&](double x) { return mixing_density(x, tau1, tau2); }, {tau1 * tau1, tau2 * tau2});
}

// Bayes factor of one group over two under a N(0, 1) prior on the standardized difference.
inline double bf_normal(const TwoSampleStat& s)
{
    s.validate();
    const double nu = s.nu(), nd = s.n_delta(), t2 = s.t * s.t;
    const double log_num = -0.5 * (nu + 1.0) * std::log1p(t2 / nu);
    const double log_den = -0.5 * std::log1p(nd) - 0.5 * (nu + 1.0) * std::log1p(t2 / (nu * (1.0 + nd)));
    return std::exp(log_num - log_den);
}

// Same Bayes factor with the difference distributed as the horseshoe difference.
inline double bf_horseshoe(const TwoSampleStat& s, double tau1, double tau2)
{
    s.validate();
    if (!(tau1 > 0.0) || !(tau2 > 0.0)) throw std::invalid_argument("bf_horseshoe: scales must be positive");
    const double nu = s.nu(), nd = s.n_delta(), t2 = s.t * s.t;
    const double num = std::exp(-0.5 * (nu + 1.0) * std::log1p(t2 / nu));
    auto integrand = [&](double w) {
        const double a = 1.0 + nd * w;
        return std::exp(-0.5 * std::log(a) - 0.5 * (nu + 1.0) * std::log1p(t2 / (nu * a))) *
               mixing_density(w, tau1, tau2);
    };
    const double den =
        integrate_log_domain(integrand, {tau1 * tau1, tau2 * tau2, 1.0 / nd, t2 / (nu * nd), t2 / nd});
    return num / den;
}

/* Symmetric scales tau1 = tau2 = tau* that put the median of the mixing
 * density at 1, found by bisection on the quadrature CDF. The group sizes only
 * enter through validation; the criterion does not depend on them. */
inline std::pair<double, double> scale_match(double n1, double n2, double tol = 1e-8)
{
    TwoSampleStat{0.0, n1, n2}.validate();
    double lo = 1e-4, hi = 1e2;
    auto excess = [](double tau) { return mixing_cdf(1.0, tau, tau) - 0.5; };
    // the CDF at 1 decreases in tau
    if (!(excess(lo) > 0.0 && excess(hi) < 0.0)) throw std::runtime_error("scale_match: bisection bracket failed");
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) > 0.0 ? lo : hi) = mid;
    }
    const double tau = 0.5 * (lo + hi);
    return {tau, tau};
}

struct BfScenario {
    std::string name;
    double n1;
    double n2;
    double nu() const { return n1 + n2 - 2.0; }
};

// Balanced and 9:1 groups with nu in {5, 10, 20}.
inline std::vector<BfScenario> default_bf_scenarios()
{
    std::vector<BfScenario> out;
    for (int nu : {5, 10, 20}) {
        const double total = nu + 2.0;
        out.push_back({"balanced_nu" + std::to_string(nu), total / 2.0, total / 2.0});
        out.push_back({"unbalanced_nu" + std::to_string(nu), 0.9 * total, 0.1 * total});
    }
    return out;
}

struct BfCurvePoint {
    double t;
    double normal;
    double horseshoe;
};

inline std::vector<BfCurvePoint> bf_curve(const BfScenario& sc, const std::vector<double>& t_grid, double tau1,
                                          double tau2)
{
    std::vector<BfCurvePoint> out;
    out.reserve(t_grid.size());
    for (double t : t_grid) {
        TwoSampleStat s{t, sc.n1, sc.n2};
        out.push_back({std::abs(t), bf_normal(s), bf_horseshoe(s, tau1, tau2)});
    }
    return out;
}

} // namespace tloho
