#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "tloho/inference.hpp"
#include "tloho/simulate.hpp"

using namespace tloho;

namespace {

Draw draw_with(std::vector<int> labels, std::vector<double> beta = {})
{
    Draw d;
    d.labels = std::move(labels);
    if (beta.empty()) beta.assign(d.labels.size(), 0.0);
    d.beta = std::move(beta);
    d.K = Partition(d.labels).num_clusters();
    return d;
}

// Squared Frobenius distance between an association matrix and frequencies, by explicit loops.
double dahl_loss(const std::vector<int>& labels, const std::vector<Draw>& draws)
{
    const std::size_t p = labels.size();
    double loss = 0.0;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
            double freq = 0.0;
            for (const auto& d : draws) freq += d.labels[i] == d.labels[j];
            freq /= draws.size();
            const double delta = labels[i] == labels[j];
            loss += (delta - freq) * (delta - freq);
        }
    return loss;
}

} // namespace

TEST(Dahl, IdenticalDraws)
{
    ChainOutput out;
    for (int i = 0; i < 5; ++i) out.draws.push_back(draw_with({0, 0, 1, 1, 2}));
    EXPECT_EQ(dahl_point_estimate(out), Partition({0, 0, 1, 1, 2}));
}

TEST(Dahl, MajorityWins)
{
    ChainOutput out;
    for (int i = 0; i < 99; ++i) out.draws.push_back(draw_with({0, 0, 0, 1, 1, 1}));
    out.draws.insert(out.draws.begin() + 40, draw_with({0, 1, 2, 3, 4, 5}));
    EXPECT_EQ(dahl_point_estimate(out), Partition({0, 0, 0, 1, 1, 1}));
}

TEST(Dahl, MinimizesDistanceAndInvariantToLabelNames)
{
    std::mt19937_64 rng(3);
    Graph g = lattice_graph(3, 3);
    for (int trial = 0; trial < 30; ++trial) {
        ChainOutput out, renamed;
        for (int t = 0; t < 40; ++t) {
            SpanningForest f = sample_forest_prior(g, rng);
            for (std::size_t i = 0; i < f.cut.size(); ++i) f.cut[i] = rng() % 3 == 0;
            auto labels = induce_partition(f, g).labels();
            out.draws.push_back(draw_with(labels));
            for (int& l : labels) l = 100 - 7 * l;
            renamed.draws.push_back(draw_with(labels));
        }
        const std::size_t best = dahl_index(out.draws);
        const double loss = dahl_loss(out.draws[best].labels, out.draws);
        for (std::size_t t = 0; t < out.draws.size(); ++t) {
            const double other = dahl_loss(out.draws[t].labels, out.draws);
            EXPECT_LE(loss, other + 1e-12);
            if (t < best) {
                EXPECT_GT(other, loss + 1e-12);
            }
        }
        EXPECT_EQ(dahl_point_estimate(out), dahl_point_estimate(renamed));
        // always one of the sampled partitions
        EXPECT_TRUE(std::any_of(out.draws.begin(), out.draws.end(), [&](const Draw& d) {
            return Partition(d.labels) == dahl_point_estimate(out);
        }));
    }
}

TEST(Dahl, EmptyDrawsRejected)
{
    ChainOutput out;
    EXPECT_THROW(dahl_point_estimate(out), InferenceError);
    EXPECT_THROW(posterior_median_beta(out), InferenceError);
}

TEST(PosteriorMedian, ConstantDraws)
{
    std::vector<Draw> draws(7, draw_with({0, 0, 1}, {1.5, 1.5, -2.0}));
    BetaSummary s = posterior_median_beta(draws);
    EXPECT_EQ(s.median, (std::vector<double>{1.5, 1.5, -2.0}));
    EXPECT_EQ(s.lower, s.median);
    EXPECT_EQ(s.upper, s.median);
    EXPECT_EQ(s.level, 0.9);
}

TEST(PosteriorMedian, ThreeValues)
{
    std::vector<Draw> draws{draw_with({0, 1}, {-1, 1}), draw_with({0, 1}, {0, 0}), draw_with({0, 1}, {1, -1})};
    BetaSummary s = posterior_median_beta(draws);
    EXPECT_EQ(s.median, (std::vector<double>{0.0, 0.0}));
}

TEST(PosteriorMedian, MatchesSortOracleAndNests)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> z;
    for (int trial = 0; trial < 20; ++trial) {
        const int t = 1 + static_cast<int>(rng() % 60), p = 5;
        std::vector<Draw> draws;
        for (int i = 0; i < t; ++i) {
            std::vector<double> b(p);
            for (auto& x : b) x = z(rng);
            draws.push_back(draw_with(std::vector<int>(p, 0), b));
        }
        BetaSummary s = posterior_median_beta(draws, 0.9);
        BetaSummary narrow = posterior_median_beta(draws, 0.5);
        for (int j = 0; j < p; ++j) {
            std::vector<double> col;
            for (const auto& d : draws) col.push_back(d.beta[j]);
            std::sort(col.begin(), col.end());
            const double med = t % 2 ? col[t / 2] : 0.5 * (col[t / 2 - 1] + col[t / 2]);
            EXPECT_DOUBLE_EQ(s.median[j], med);
            EXPECT_LE(s.lower[j], narrow.lower[j]);
            EXPECT_GE(s.upper[j], narrow.upper[j]);
            EXPECT_LE(s.lower[j], s.median[j]);
            EXPECT_GE(s.upper[j], s.median[j]);
        }
    }
    EXPECT_THROW(posterior_median_beta(std::vector<Draw>{draw_with({0})}, 1.0), InferenceError);
}

TEST(RandIndex, Examples)
{
    EXPECT_EQ(rand_index(Partition({0, 1, 1, 2}), Partition({0, 1, 1, 2})), 1.0);
    EXPECT_EQ(rand_index(Partition({0, 1, 2}), Partition({0, 0, 0})), 0.0);
    EXPECT_NEAR(rand_index(Partition({0, 0, 1}), Partition({0, 1, 1})), 1.0 / 3.0, 1e-15);
    EXPECT_THROW(rand_index(Partition({0, 0}), Partition({0, 0, 0})), InferenceError);
}

TEST(RandIndex, MatchesPairLoopAndIsSymmetric)
{
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 200; ++trial) {
        const int p = 2 + static_cast<int>(rng() % 25);
        std::vector<int> a(p), b(p);
        for (int v = 0; v < p; ++v) a[v] = static_cast<int>(rng() % 4), b[v] = static_cast<int>(rng() % 3);
        Partition pa(a), pb(b);
        double agree = 0.0, pairs = 0.0;
        for (int i = 0; i < p; ++i)
            for (int j = i + 1; j < p; ++j) {
                agree += (a[i] == a[j]) == (b[i] == b[j]);
                pairs += 1.0;
            }
        EXPECT_NEAR(rand_index(pa, pb), agree / pairs, 1e-14);
        EXPECT_EQ(rand_index(pa, pb), rand_index(pb, pa));
        EXPECT_EQ(rand_index(pa, pb) == 1.0, pa == pb);
    }
}

TEST(Mspe, Examples)
{
    std::vector<std::vector<double>> x{{1, 2}, {0, -1}, {3, 1}};
    std::vector<double> beta{0.5, -1.0};
    std::vector<double> y;
    for (const auto& row : x) y.push_back(row[0] * beta[0] + row[1] * beta[1]);
    EXPECT_EQ(mspe(beta, x, y), 0.0);
    std::vector<double> y2{1.0, 2.0, -3.0};
    EXPECT_NEAR(mspe({0.0, 0.0}, x, y2), (1.0 + 4.0 + 9.0) / 3.0, 1e-15);
    EXPECT_THROW(mspe({0.0}, x, y2), InferenceError);
}

TEST(Mspe, MatchesLoopOracle)
{
    std::mt19937_64 rng(10);
    std::normal_distribution<double> z;
    const int nt = 50, p = 8;
    MatrixXd x(nt, p);
    VectorXd b(p), y(nt);
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < p; ++j) x(i, j) = z(rng);
    for (int j = 0; j < p; ++j) b(j) = z(rng);
    for (int i = 0; i < nt; ++i) y(i) = z(rng);
    double loop = 0.0;
    for (int i = 0; i < nt; ++i) {
        double pred = 0.0;
        for (int j = 0; j < p; ++j) pred += x(i, j) * b(j);
        loop += (y(i) - pred) * (y(i) - pred);
    }
    loop /= nt;
    std::vector<std::vector<double>> rows(nt, std::vector<double>(p));
    for (int i = 0; i < nt; ++i)
        for (int j = 0; j < p; ++j) rows[i][j] = x(i, j);
    EXPECT_NEAR(tloho::mspe(std::vector<double>(b.data(), b.data() + p), rows, std::vector<double>(y.data(), y.data() + nt)),
                loop, 1e-12);
    EXPECT_NEAR(tloho::mspe(b, x, y), loop, 1e-12);
}

TEST(KDistribution, Frequencies)
{
    std::vector<Draw> draws{draw_with({0, 0}), draw_with({0, 1}), draw_with({0, 1}), draw_with({0, 1})};
    auto h = k_distribution(draws);
    EXPECT_EQ(h.at(1), 0.25);
    EXPECT_EQ(h.at(2), 0.75);
}
