#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "tloho/inference.hpp"
#include "tloho/sampler.hpp"
#include "tloho/shrinkage.hpp"
#include "tloho/simulate.hpp"

using namespace tloho;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail)
{
    std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

void info(const std::string& line)
{
    std::printf("  info: %s\n", line.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, double a)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// Empirical partition frequencies of the partition-only chain against exact
// enumeration over every cut set of the (fixed) initial forest.
double exact_oracle_tv(const Graph& g, const VectorXd& y, long iters, std::uint64_t seed)
{
    const int p = g.num_vertices(), nc = g.num_components();
    const Dataset data = Dataset::normal_means(y);
    Hyperparams h;
    h.c = 0.5;
    h.tau0 = 1.0;
    h.move_probs = {0.35, 0.35, 0.3, 0.0};
    SamplerOptions o;
    o.sample_tau = false;
    o.sample_lambda = false;
    o.sample_sigma2_beta = false;
    Sampler s(data, g, h, o, make_rng(seed));
    s.initialize();

    const SpanningForest f0 = s.state().forest();
    const MatrixXd identity = MatrixXd::Identity(p, p);
    std::map<std::vector<int>, double> target;
    double z = 0.0;
    const int m = static_cast<int>(f0.edges.size());
    for (int mask = 0; mask < (1 << m); ++mask) {
        oracle::EdgeList kept;
        for (int i = 0; i < m; ++i)
            if (!((mask >> i) & 1)) kept.push_back(f0.edges[i]);
        const auto labels = oracle::first_appearance(oracle::components(p, kept));
        const int k = *std::max_element(labels.begin(), labels.end()) + 1;
        const double lw = oracle::dense_loglik(y, oracle::reduced_design(identity, labels), 1.0, VectorXd::Ones(k)) +
                          oracle::log_prior_k(k, nc, p, h.c) - oracle::log_choose(p - nc, k - nc);
        target[labels] += std::exp(lw);
        z += std::exp(lw);
    }
    for (auto& [k, v] : target) v /= z;

    std::map<std::vector<int>, double> freq;
    for (long t = 0; t < iters; ++t) {
        s.iterate(false, t);
        freq[s.state().partition().labels()] += 1.0 / static_cast<double>(iters);
    }
    return oracle::total_variation(target, freq);
}

void criterion1()
{
    const long iters = 200000;
    bool pass = true;
    std::string detail;
    {
        const auto start = Clock::now();
        Graph g(3, {{0, 1}, {1, 2}});
        VectorXd y(3);
        y << 0.3, -1.2, 2.0;
        const double tv = exact_oracle_tv(g, y, iters, 1);
        const double secs = seconds_since(start);
        pass = pass && tv < 0.02 && secs < 30.0;
        detail += "3-path TV = " + fmt("%.4f", tv) + " in " + fmt("%.1f", secs) + " s; ";
    }
    {
        const auto start = Clock::now();
        Graph g(5, {{0, 1}, {1, 3}, {0, 3}, {2, 4}});
        VectorXd y(5);
        y << 1.5, -0.4, 2.2, 0.9, -1.7;
        const double tv = exact_oracle_tv(g, y, iters, 2);
        const double secs = seconds_since(start);
        pass = pass && tv < 0.02 && secs < 30.0;
        detail += "5-vertex TV = " + fmt("%.4f", tv) + " in " + fmt("%.1f", secs) + " s (limits 0.02, 30 s)";
    }
    report(1, pass, detail);
}

// Geweke joint-distribution test on a 2 x 3 lattice with n = 8.
struct PriorDraw {
    SpanningForest forest;
    Partition partition;
    std::vector<double> lambda, beta_tilde;
    double tau = 1.0, sigma2 = 1.0;
};

double half_cauchy(Rng& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return std::tan(0.5 * std::numbers::pi * u(rng));
}

PriorDraw draw_prior(const Graph& g, const Hyperparams& h, Rng& rng)
{
    PriorDraw d;
    d.forest = sample_forest_prior(g, rng);
    const int p = g.num_vertices(), nc = g.num_components();
    std::vector<double> w;
    for (int k = nc; k <= p; ++k) w.push_back(std::exp(log_prior_K(k, g, h)));
    const int k = nc + std::discrete_distribution<int>(w.begin(), w.end())(rng);
    std::vector<int> idx(d.forest.edges.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int i = 0; i < k - nc; ++i) d.forest.cut[idx[i]] = true;
    d.partition = induce_partition(d.forest, g);
    d.tau = h.tau0 * half_cauchy(rng);
    std::gamma_distribution<double> gamma(h.noise_prior.shape, 1.0);
    d.sigma2 = h.noise_prior.rate / gamma(rng);
    std::normal_distribution<double> z;
    for (int j = 0; j < k; ++j) {
        d.lambda.push_back(half_cauchy(rng));
        d.beta_tilde.push_back(std::sqrt(d.sigma2) * d.tau * d.lambda.back() * z(rng));
    }
    return d;
}

VectorXd simulate_response(const MatrixXd& x, const Partition& pi, const std::vector<double>& beta_tilde,
                           double sigma2, Rng& rng)
{
    const Projection phi(pi);
    auto beta = phi.apply_transpose(beta_tilde);
    VectorXd y = x * Eigen::Map<const VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    std::normal_distribution<double> z;
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += std::sqrt(sigma2) * z(rng);
    return y;
}

struct GewekeResult {
    double p_k, p_tau, p_sigma2;
};

GewekeResult geweke(std::uint64_t seed, int m, int thin)
{
    const Graph g = lattice_graph(2, 3);
    Rng rng = make_rng(seed, 99);
    MatrixXd x(8, 6);
    std::normal_distribution<double> z;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 6; ++j) x(i, j) = z(rng);
    Hyperparams h;
    h.noise_prior = {3.0, 2.0};
    const Dataset base(x, VectorXd::Zero(8));
    const MatrixXd xs = base.x();

    std::vector<double> fk, ft, fs, sk, st, ss;
    for (int i = 0; i < m; ++i) {
        const PriorDraw d = draw_prior(g, h, rng);
        fk.push_back(d.partition.num_clusters());
        ft.push_back(std::log(d.tau));
        fs.push_back(std::log(d.sigma2));
    }

    const PriorDraw d = draw_prior(g, h, rng);
    Dataset data = base.with_response(simulate_response(xs, d.partition, d.beta_tilde, d.sigma2, rng));
    Sampler s(data, g, h, SamplerOptions{}, make_rng(seed, 7));
    s.reset(d.forest, d.lambda, d.tau, d.sigma2, d.beta_tilde);
    for (long t = 0; t < static_cast<long>(m) * thin; ++t) {
        s.iterate(false, t);
        const ModelState& state = s.state();
        data = base.with_response(
            simulate_response(xs, state.partition(), state.canonical(state.beta_tilde), state.sigma2, rng));
        s.rebind(data);
        if (t % thin == thin - 1) {
            sk.push_back(state.K());
            st.push_back(std::log(state.tau));
            ss.push_back(std::log(state.sigma2));
        }
    }
    auto pv = [](const std::vector<double>& a, const std::vector<double>& b) {
        return oracle::ks_pvalue(oracle::ks_statistic(a, b), a.size(), b.size());
    };
    return {pv(fk, sk), pv(ft, st), pv(fs, ss)};
}

void criterion2()
{
    int passing = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const GewekeResult r = geweke(seed, 2000, 200);
        const bool ok = r.p_k > 0.01 && r.p_tau > 0.01 && r.p_sigma2 > 0.01;
        passing += ok;
        char buf[160];
        std::snprintf(buf, sizeof buf, "seed %d: p(K) = %.3g, p(log tau) = %.3g, p(log sigma2) = %.3g -> %s",
                      static_cast<int>(seed), r.p_k, r.p_tau, r.p_sigma2, ok ? "ok" : "reject");
        info(buf);
    }
    detail = std::to_string(passing) + " of 3 seeds pass KS at p > 0.01 on (K, log tau, log sigma2) (need 2)";
    report(2, passing >= 2, detail);
}

void criterion3()
{
    const auto start = Clock::now();
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> pos(0.2, 3.0);
    auto vec = [&](int k) {
        VectorXd v(k);
        for (int i = 0; i < k; ++i) v(i) = z(rng);
        return v;
    };
    double worst_r1 = 0.0, worst_diag = 0.0, worst_ll = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 1 + static_cast<int>(rng() % 10);
        const MatrixXd a = oracle::random_spd(k, rng);
        const VectorXd v = vec(k);
        worst_r1 = std::max(worst_r1, oracle::rel_error(rank_one_update(cholesky(a), v, 1).factor(),
                                                        oracle::upper_factor(a + v * v.transpose())));
        worst_r1 = std::max(worst_r1, oracle::rel_error(rank_one_update(cholesky(a + v * v.transpose()), v, -1).factor(),
                                                        oracle::upper_factor(a)));
    }
    for (int trial = 0; trial < 1000; ++trial) {
        const int k = 1 + static_cast<int>(rng() % 10);
        const int idx = static_cast<int>(rng() % k);
        const MatrixXd a = oracle::random_spd(k, rng);
        const double delta = std::uniform_real_distribution<double>(-0.4, 2.0)(rng);
        MatrixXd shifted = a;
        shifted(idx, idx) += delta;
        worst_diag = std::max(
            worst_diag, oracle::rel_error(diagonal_update(cholesky(a), idx, delta).factor(), oracle::upper_factor(shifted)));
    }
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 50);
        const int k = 1 + static_cast<int>(rng() % 10);
        const VectorXd y = vec(n);
        MatrixXd xt(n, k);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < k; ++j) xt(i, j) = z(rng);
        VectorXd lambda(k);
        for (int j = 0; j < k; ++j) lambda(j) = pos(rng);
        const double tau = pos(rng);
        const double want = oracle::dense_loglik(y, xt, tau, lambda);
        const double got = collapsed_loglik(y, xt, tau, lambda).first;
        worst_ll = std::max(worst_ll, std::abs(got - want) / std::max(1.0, std::abs(want)));
    }
    const double secs = seconds_since(start);
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "max rel error: rank_one_update %.2e, diagonal_update %.2e, collapsed_loglik %.2e (limit 1e-8); "
                  "%.2f s (limit 10 s)",
                  worst_r1, worst_diag, worst_ll, secs);
    report(3, worst_r1 < 1e-8 && worst_diag < 1e-8 && worst_ll < 1e-8 && secs < 10.0, buf);
}

void criterion4()
{
    SimConfig cfg; // 30 x 30, n = 100, 1000 test points, theta = 0, snr = 4
    auto data_rng = make_rng(1);
    const SyntheticData d = generate_synthetic(cfg, data_rng);
    const Dataset data(d.x_train, d.y_train);
    const ChainOutput out = run_chain(data, d.graph, Hyperparams{}, Schedule{40000, 10000, 10}, make_rng(1, 1));
    const Partition dahl = dahl_point_estimate(out);
    const BetaSummary b = posterior_median_beta(out);
    const double ri = rand_index(dahl, d.truth);
    const double e = mspe(Eigen::Map<const VectorXd>(b.median.data(), static_cast<Eigen::Index>(b.median.size())),
                          d.x_test, d.y_test);
    const double limit = 5.0 * 107.9;
    char buf[220];
    std::snprintf(buf, sizeof buf,
                  "RI = %.4f (need >= 0.85), MSPE = %.2f (need <= 90), %zu draws, Dahl K = %d, true K = %d, "
                  "%.1f s (limit %.1f s)",
                  ri, e, out.draws.size(), dahl.num_clusters(), d.truth.num_clusters(), out.runtime_seconds, limit);
    report(4, ri >= 0.85 && e <= 90.0 && out.runtime_seconds <= limit, buf);
}

void criterion5()
{
    const auto start = Clock::now();
    bool shrink_ok = true, limit_ok = true;
    for (const auto& sc : default_bf_scenarios()) {
        const auto [t1, t2] = scale_match(sc.n1, sc.n2);
        const double ratio = bf_horseshoe({100.0, sc.n1, sc.n2}, t1, t2) / bf_horseshoe({0.0, sc.n1, sc.n2}, t1, t2);
        const TwoSampleStat at0{0.0, sc.n1, sc.n2};
        const double lower = std::pow(1.0 + at0.n_delta(), -sc.nu() / 2.0);
        const double dev100 = std::abs(bf_normal({100.0, sc.n1, sc.n2}) / lower - 1.0);
        const double dev1000 = std::abs(bf_normal({1000.0, sc.n1, sc.n2}) / lower - 1.0);
        shrink_ok = shrink_ok && ratio < 1e-3;
        limit_ok = limit_ok && dev1000 < 0.01;
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "%s: hs ratio at |t| = 100 is %.2e; normal BF off its limit by %.2f%% at |t| = 100, %.3f%% at "
                      "|t| = 1000",
                      sc.name.c_str(), ratio, 100.0 * dev100, 100.0 * dev1000);
        info(buf);
    }

    bool crossing = false;
    double where = 0.0;
    for (const auto& sc : default_bf_scenarios()) {
        if (sc.name != "unbalanced_nu5") continue;
        const auto [t1, t2] = scale_match(sc.n1, sc.n2);
        double prev = 0.0;
        for (int i = 1; i <= 400 && !crossing; ++i) {
            const double t = 0.05 * i;
            const double diff = bf_normal({t, sc.n1, sc.n2}) - bf_horseshoe({t, sc.n1, sc.n2}, t1, t2);
            if (i > 1 && (diff > 0.0) != (prev > 0.0)) {
                crossing = true;
                where = t;
            }
            prev = diff;
        }
    }
    const double secs = seconds_since(start);
    std::string detail = std::string("(a) hs ratio < 1e-3 at |t| = 100: ") + (shrink_ok ? "yes" : "no") +
                         "; normal BF within 1% of (1+n_delta)^(-nu/2) at |t| = 1000: " + (limit_ok ? "yes" : "no") +
                         "; (b) unbalanced_nu5 crossing: " + (crossing ? "near |t| = " + fmt("%.2f", where) : "none") +
                         "; " + fmt("%.2f", secs) + " s (limit 5 s)";
    report(5, shrink_ok && limit_ok && crossing && secs < 5.0, detail);
}

void criterion6()
{
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) worst = std::max(worst, std::abs(mixing_total_mass(u(rng), u(rng)) - 1.0));
    report(6, worst < 1e-6, "max |mass - 1| over 20 random scale pairs = " + fmt("%.2e", worst) + " (limit 1e-6)");
}

void criterion7()
{
    std::mt19937_64 rng(7);
    std::normal_distribution<double> z;
    long iterations = 0, involutions = 0, violations = 0;
    std::string first_violation;
    auto fail = [&](const std::string& what) {
        if (violations++ == 0) first_violation = what;
    };
    for (int config = 0; config < 10; ++config) {
        const int rows = 2 + static_cast<int>(rng() % 4), cols = 2 + static_cast<int>(rng() % 4);
        const int p = rows * cols;
        Graph g = lattice_graph(rows, cols);
        if (config % 3 == 2) {
            // drop edges so that the graph has several components
            std::vector<Edge> kept;
            for (const auto& e : g.edges())
                if (rng() % 3) kept.push_back(e);
            g = Graph(p, kept);
        }
        const bool normal_means = config % 2 == 1;
        Dataset data = [&] {
            VectorXd y(normal_means ? p : 3 * p / 2);
            for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = 2.0 * z(rng);
            if (normal_means) return Dataset::normal_means(y);
            MatrixXd x(y.size(), p);
            for (Eigen::Index i = 0; i < x.rows(); ++i)
                for (int j = 0; j < p; ++j) x(i, j) = z(rng) * (1.0 + 0.2 * j);
            return Dataset(x, y);
        }();
        Hyperparams h;
        h.c = std::uniform_real_distribution<double>(0.0, 0.9)(rng);
        h.tau0 = std::uniform_real_distribution<double>(0.3, 2.0)(rng);
        SamplerOptions o;
        o.debug_checks = true;
        Sampler s(data, g, h, o, make_rng(100 + config));
        try {
            s.initialize();
            for (long t = 0; t < 1000; ++t, ++iterations) {
                const ModelState before = s.state();
                const Partition pi = before.partition();

                // split / merge involution on a random forest edge
                const int e = static_cast<int>(rng() % before.cut.size());
                ModelState trip = before;
                if (before.cut[e]) {
                    const auto [u, v] = before.topology->edges[e];
                    const auto& cu = *before.clusters[before.slot_of[u]];
                    const auto& cv = *before.clusters[before.slot_of[v]];
                    const double dropped = cu.min_vertex < cv.min_vertex ? before.lambda(before.slot_of[v])
                                                                         : before.lambda(before.slot_of[u]);
                    s.apply_merge(trip, e);
                    s.validate_state(trip);
                    s.apply_split(trip, e, dropped);
                } else {
                    s.apply_split(trip, e, 1.7);
                    s.validate_state(trip);
                    s.apply_merge(trip, e);
                }
                s.validate_state(trip);
                ++involutions;
                if (!(trip.partition() == pi)) fail("involution changed the partition");
                if (trip.canonical(trip.lambda) != before.canonical(before.lambda)) fail("involution changed lambda");
                if (std::abs(s.loglik(trip) - s.loglik(before)) > 1e-8 * (1.0 + std::abs(s.loglik(before))))
                    fail("involution changed the likelihood");

                const MoveRecord rec = s.step_partition();
                const int dk = s.state().K() - before.K();
                if (rec.available && rec.accepted) {
                    if (rec.kind == MoveKind::split && dk != 1) fail("accepted split did not add a cluster");
                    if (rec.kind == MoveKind::merge && dk != -1) fail("accepted merge did not remove a cluster");
                    if (rec.kind == MoveKind::change && dk != 0) fail("change move altered K");
                    if (rec.kind == MoveKind::hyper && !(s.state().partition() == pi))
                        fail("hyper move altered the partition");
                } else if (!(s.state().partition() == pi)) {
                    fail("rejected move altered the partition");
                }
                if (rec.available && rec.kind == MoveKind::hyper && !rec.accepted) fail("hyper move rejected");
                s.update_tau(t < 500, t);
                s.update_sigma2();
                s.update_beta_tilde();
                s.update_lambda();
                s.validate();
            }
        } catch (const std::exception& ex) {
            fail(std::string("config ") + std::to_string(config) + ": " + ex.what());
        }
    }
    std::string detail = std::to_string(iterations) + " debug iterations over 10 random configurations, " +
                         std::to_string(involutions) + " involution checks, " + std::to_string(violations) +
                         " violations";
    if (violations) detail += " (first: " + first_violation + ")";
    report(7, violations == 0 && iterations >= 10000, detail);
}

} // namespace

int main()
{
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    std::printf("%s: %d of 7 criteria failed\n", failures ? "FAIL" : "PASS", failures);
    return failures ? 1 : 0;
}
