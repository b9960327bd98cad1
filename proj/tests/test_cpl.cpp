#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fedhire/cpl.hpp"
#include "fedhire/synthetic.hpp"

using namespace fedhire;

namespace {

ClusterletState three_clusterlets() {
    return ClusterletState::fresh(Matrix(3, 1, std::vector<double>{0.0, 1.0, 2.0}), -4.8);
}

}  // namespace

TEST(Gamma, Examples) {
    const std::vector<std::uint64_t> even{1, 1}, skew{3, 1}, zero{0, 0, 0};
    EXPECT_EQ(compute_gamma(even), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(compute_gamma(skew), (std::vector<double>{0.25, 0.75}));
    EXPECT_EQ(compute_gamma(zero), (std::vector<double>{1, 1, 1}));
}

TEST(Gamma, ComplementsSumToOne) {
    Rng rng(9);
    for (int t = 0; t < 100; ++t) {
        std::vector<std::uint64_t> g(2 + rng.uniform_index(6));
        for (auto& v : g) v = rng.uniform_index(50);
        g[0] += 1;
        const auto gamma = compute_gamma(g);
        double s = 0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            EXPECT_GE(gamma[j], 0.0);
            // a clusterlet that never won keeps gamma = 1
            if (g[j] > 0) EXPECT_LT(gamma[j], 1.0);
            else EXPECT_EQ(gamma[j], 1.0);
            s += 1.0 - gamma[j];
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Squash, Examples) {
    EXPECT_DOUBLE_EQ(squash_weight(-5.0), 0.5);
    EXPECT_NEAR(squash_weight(0.0), 1.0, 1e-15);
    EXPECT_NEAR(squash_weight(-7.0), 1.0 / (1.0 + std::exp(20.0)), 1e-20);
    EXPECT_NEAR(squash_weight(-7.0), 2.061e-9, 1e-12);
}

TEST(Squash, StrictlyIncreasing) {
    for (double a = -8.0; a < -2.0; a += 0.01) EXPECT_LT(squash_weight(a), squash_weight(a + 0.01));
}

TEST(WinnerRival, AtCentroidWins) {
    auto s = ClusterletState::fresh(Matrix(2, 1, std::vector<double>{0.3, 0.9}), -4.8);
    const auto m = FeatureClusterMatrix::uniform(2, 1);
    const std::vector<double> x{0.9};
    const auto [v, r] = select_winner_and_rival(x, s, m);
    EXPECT_EQ(v, 1u);
    EXPECT_EQ(r, 0u);
}

TEST(WinnerRival, ScoresFollowBruteForce) {
    // equal similarity everywhere, scores set through the weights: (0.2, 0.5, 0.4)
    auto s = ClusterletState::fresh(Matrix(3, 1, std::vector<double>{0.0, 0.0, 0.0}), -4.8);
    s.weights = {0.2, 0.5, 0.4};
    const auto m = FeatureClusterMatrix::uniform(3, 1);
    const std::vector<double> x{0.0};
    const auto [v, r] = select_winner_and_rival(x, s, m);
    EXPECT_EQ(v, 1u);
    EXPECT_EQ(r, 2u);
}

TEST(WinnerRival, TiesGoToLowestIndex) {
    auto s = ClusterletState::fresh(Matrix(3, 1, std::vector<double>{0.5, 0.0, 0.5}), -4.8);
    const auto m = FeatureClusterMatrix::uniform(3, 1);
    const std::vector<double> x{0.5};
    const auto [v, r] = select_winner_and_rival(x, s, m);
    EXPECT_EQ(v, 0u);
    EXPECT_EQ(r, 2u);
}

TEST(WinnerRival, SkipsInactiveAndNeedsTwo) {
    auto s = three_clusterlets();
    s.active[1] = false;
    const auto m = FeatureClusterMatrix::uniform(3, 1);
    const std::vector<double> x{1.0};
    const auto [v, r] = select_winner_and_rival(x, s, m);
    EXPECT_NE(v, 1u);
    EXPECT_NE(r, 1u);
    s.active[2] = false;
    EXPECT_THROW(select_winner_and_rival(x, s, m), std::logic_error);
}

TEST(Reward, Examples) {
    auto s = ClusterletState::fresh(Matrix(2, 1), 0.0);
    s.win_counts[1] = 7;
    reward_winner(s, 1, 0.05);
    EXPECT_DOUBLE_EQ(s.raw_weights[1], 0.05);
    EXPECT_EQ(s.win_counts[1], 8u);
    EXPECT_DOUBLE_EQ(s.weights[1], squash_weight(0.05));
    auto t = ClusterletState::fresh(Matrix(2, 1), -5.0);
    reward_winner(t, 0, 0.05);
    EXPECT_NEAR(t.weights[0], 0.62246, 1e-5);
    t.active[1] = false;
    EXPECT_THROW(reward_winner(t, 1, 0.05), std::logic_error);
}

TEST(Penalty, Examples) {
    const auto m = FeatureClusterMatrix::uniform(2, 1);
    const std::vector<double> x{0.0};
    auto equal = ClusterletState::fresh(Matrix(2, 1, std::vector<double>{0.0, 0.0}), -4.8);
    penalize_rival(equal, 0, 1, x, m, 0.05);
    EXPECT_NEAR(equal.raw_weights[1], -4.85, 1e-12);
    auto half = ClusterletState::fresh(Matrix(2, 1, std::vector<double>{0.0, std::log(2.0)}), -4.8);
    penalize_rival(half, 0, 1, x, m, 0.05);
    EXPECT_NEAR(half.raw_weights[1], -4.825, 1e-12);
    EXPECT_DOUBLE_EQ(half.weights[1], squash_weight(half.raw_weights[1]));
    auto far = ClusterletState::fresh(Matrix(2, 1, std::vector<double>{0.0, 60.0}), -4.8);
    penalize_rival(far, 0, 1, x, m, 0.05);
    EXPECT_NEAR(far.raw_weights[1], -4.8, 1e-20);
    EXPECT_THROW(penalize_rival(far, 0, 0, x, m, 0.05), std::logic_error);
}

TEST(Elimination, Examples) {
    auto s = ClusterletState::fresh(Matrix(2, 1), -4.8);
    s.weights = {0.99, 1e-6};
    auto out = eliminate_clusterlets(s, 1e-3);
    EXPECT_EQ(out.eliminated, 0u);
    EXPECT_TRUE(out.floor_applied);
    EXPECT_EQ(s.active_count(), 2u);

    auto t = three_clusterlets();
    t.weights = {0.9, 0.8, 1e-9};
    out = eliminate_clusterlets(t, 1e-3);
    EXPECT_EQ(out.eliminated, 1u);
    EXPECT_TRUE(out.any());
    EXPECT_FALSE(t.active[2]);

    auto u = three_clusterlets();
    out = eliminate_clusterlets(u, 1e-3);
    EXPECT_FALSE(out.any());
    EXPECT_FALSE(out.floor_applied);
    EXPECT_EQ(u.active_count(), 3u);
}

TEST(Elimination, FloorKeepsTwoHeaviest) {
    auto s = ClusterletState::fresh(Matrix(4, 1), -4.8);
    s.weights = {1e-5, 0.9, 1e-4, 1e-6};
    const auto out = eliminate_clusterlets(s, 1e-3);
    EXPECT_TRUE(out.floor_applied);
    EXPECT_EQ(out.eliminated, 2u);
    EXPECT_EQ(s.active, (std::vector<bool>{false, true, true, false}));
}

TEST(RunCpl, TwoPointMassesSeparate) {
    Matrix m;
    for (int i = 0; i < 100; ++i) m.append_row(std::vector<double>{0, 0});
    for (int i = 0; i < 100; ++i) m.append_row(std::vector<double>{10, 10});
    const DataMatrix data(normalize_min_max(DataMatrix(m)));
    CplConfig cfg;
    cfg.initial_k = 20;
    cfg.rng_seed = 3;
    const auto r = run_cpl(data, cfg, FeatureWeighting::on);
    EXPECT_EQ(r.converged_k, 2u);
    for (int i = 1; i < 100; ++i) EXPECT_EQ(r.affiliation.assignments[i], r.affiliation.assignments[0]);
    for (int i = 101; i < 200; ++i) EXPECT_EQ(r.affiliation.assignments[i], r.affiliation.assignments[100]);
    EXPECT_NE(r.affiliation.assignments[0], r.affiliation.assignments[100]);
}

TEST(RunCpl, IdenticalObjectsCollapseToOne) {
    const DataMatrix data(Matrix(30, 2, 0.5));
    CplConfig cfg;
    cfg.initial_k = 10;
    const auto r = run_cpl(data, cfg, FeatureWeighting::on);
    EXPECT_EQ(r.converged_k, 1u);
    EXPECT_EQ(r.affiliation.k, 1u);
}

TEST(RunCpl, DeterministicPerSeed) {
    const auto data = synthetic::gaussian_mixture(120, 3, 3, 0.03, 8);
    CplConfig cfg;
    cfg.initial_k = 40;
    cfg.rng_seed = 77;
    const auto a = run_cpl(data, cfg, FeatureWeighting::on);
    const auto b = run_cpl(data, cfg, FeatureWeighting::on);
    EXPECT_EQ(a.affiliation, b.affiliation);
    EXPECT_EQ(a.clusterlets.centroids, b.clusterlets.centroids);
    EXPECT_EQ(a.clusterlets.raw_weights, b.clusterlets.raw_weights);
    EXPECT_EQ(a.epochs_used, b.epochs_used);
}

TEST(RunCpl, ResultInvariants) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto data = synthetic::gaussian_mixture(150, 2, 4, 0.04, seed);
        CplConfig cfg;
        cfg.initial_k = 60;
        cfg.rng_seed = seed;
        const auto r = run_cpl(normalize_min_max(data), cfg, FeatureWeighting::on);
        EXPECT_LE(r.converged_k, cfg.initial_k);
        EXPECT_EQ(r.converged_k, r.affiliation.k);
        EXPECT_EQ(r.clusterlets.size(), r.converged_k);
        EXPECT_EQ(r.clusterlets.active_count(), r.converged_k);
        const auto sizes = r.affiliation.cluster_sizes();
        for (auto s : sizes) EXPECT_GT(s, 0u);
        for (std::size_t e = 1; e < r.active_history.size(); ++e)
            EXPECT_LE(r.active_history[e], r.active_history[e - 1]);
        for (std::size_t j = 0; j < r.clusterlets.size(); ++j)
            EXPECT_DOUBLE_EQ(r.clusterlets.weights[j], squash_weight(r.clusterlets.raw_weights[j]));
    }
}

TEST(RunCpl, WinCountsTrackPresentations) {
    // one epoch: every presentation increments exactly one count
    const auto data = synthetic::gaussian_mixture(50, 2, 2, 0.05, 1);
    CplConfig cfg;
    cfg.initial_k = 10;
    cfg.max_epochs = 1;
    cfg.elimination_threshold = 1e-300;
    const auto r = run_cpl(data, cfg, FeatureWeighting::off);
    std::uint64_t total = 0;
    for (auto g : r.clusterlets.win_counts) total += g;
    EXPECT_EQ(total, 50u);
    EXPECT_EQ(r.epochs_used, 1u);
    EXPECT_FALSE(r.converged);
}

TEST(RunCpl, RejectsBadInput) {
    const DataMatrix data(Matrix(3, 1, std::vector<double>{0, 1, 2}));
    CplConfig cfg;
    cfg.initial_k = 4;
    EXPECT_THROW(run_cpl(data, cfg, FeatureWeighting::on), InvalidArgument);
    cfg.initial_k = 1;
    EXPECT_THROW(run_cpl(data, cfg, FeatureWeighting::on), InvalidArgument);
    cfg.initial_k = 2;
    cfg.learning_rate = 0;
    EXPECT_THROW(run_cpl(data, cfg, FeatureWeighting::on), InvalidArgument);
}

TEST(RunCpl, FourBlobsAdaptToFour) {
    const Matrix centers(4, 2, std::vector<double>{0.2, 0.2, 0.8, 0.2, 0.2, 0.8, 0.8, 0.8});
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto data = synthetic::gaussian_blobs(centers, {100, 100, 100, 100}, 0.02, 1000 + seed);
        CplConfig cfg;
        cfg.initial_k = 200;
        cfg.rng_seed = seed;
        hits += run_cpl(normalize_min_max(data), cfg, FeatureWeighting::on).converged_k == 4;
    }
    EXPECT_GE(hits, 8);
}
