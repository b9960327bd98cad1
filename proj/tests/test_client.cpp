#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fedhire/client.hpp"
#include "fedhire/synthetic.hpp"

using namespace fedhire;

TEST(InitialClusterlets, FractionAndClipping) {
    EXPECT_EQ(initial_clusterlets(200, 0.5, std::nullopt), 100u);
    EXPECT_EQ(initial_clusterlets(5, 0.5, std::nullopt), 3u);
    EXPECT_EQ(initial_clusterlets(4, 0.1, std::nullopt), 2u);
    EXPECT_EQ(initial_clusterlets(30, 0.5, 64), 30u);
    EXPECT_EQ(initial_clusterlets(300, 0.5, 64), 64u);
}

TEST(RunFcpl, TinyClientIsSkipped) {
    const DataMatrix data(Matrix(3, 2, std::vector<double>{0, 0, 1, 1, 2, 2}));
    EXPECT_FALSE(run_fcpl(data, {}, 0).has_value());
}

TEST(RunFcpl, TwoBlobsGiveTwoCentroidsNearMeans) {
    const Matrix centers(2, 2, std::vector<double>{0.25, 0.3, 0.75, 0.7});
    const auto data = synthetic::gaussian_blobs(centers, {50, 50}, 0.03, 4);
    FcplSettings s;
    s.seed = 12;
    const auto out = run_fcpl(data, s, 3);
    ASSERT_TRUE(out.has_value());
    EXPECT_EQ(out->payload.client_id, 3u);
    ASSERT_EQ(out->payload.centroids.rows(), 2u);

    // exact blob means, compared in normalized units
    const auto scaler = MinMaxScaler::fit(data.values());
    Matrix means(2, 2);
    for (std::size_t i = 0; i < 100; ++i)
        for (std::size_t z = 0; z < 2; ++z) means(i / 50, z) += data.row(i)[z] / 50.0;
    const auto nm = scaler.transform(means);
    const auto nc = scaler.transform(out->payload.centroids);
    for (std::size_t b = 0; b < 2; ++b) {
        double best = 1e9;
        for (std::size_t j = 0; j < 2; ++j) {
            double dist = 0;
            for (std::size_t z = 0; z < 2; ++z) dist += (nm(b, z) - nc(j, z)) * (nm(b, z) - nc(j, z));
            best = std::min(best, std::sqrt(dist));
        }
        EXPECT_LT(best, 0.1);
    }
}

TEST(RunFcpl, PayloadIsInCallerUnits) {
    const Matrix centers(2, 1, std::vector<double>{100.0, 200.0});
    const auto data = synthetic::gaussian_blobs(centers, {30, 30}, 1.0, 2);
    const auto out = run_fcpl(data, {}, 0);
    ASSERT_TRUE(out.has_value());
    for (double v : out->payload.centroids.values()) {
        EXPECT_GT(v, 90.0);
        EXPECT_LT(v, 210.0);
    }
}

TEST(RunFcpl, PayloadBoundsAndDeterminism) {
    const auto data = synthetic::gaussian_mixture(80, 3, 3, 0.04, 6);
    FcplSettings s;
    s.seed = 99;
    const auto a = run_fcpl(data, s, 1);
    const auto b = run_fcpl(data, s, 1);
    ASSERT_TRUE(a && b);
    EXPECT_EQ(a->payload.centroids, b->payload.centroids);
    EXPECT_EQ(a->result.affiliation, b->result.affiliation);
    EXPECT_GE(a->payload.clusterlet_count(), 1u);
    EXPECT_LE(a->payload.clusterlet_count(), initial_clusterlets(80, 0.5, std::nullopt));
    EXPECT_FALSE(a->payload.clusterlet_sizes.has_value());
}

TEST(RunFcpl, SizesOnlyWhenRequested) {
    const auto data = synthetic::gaussian_mixture(40, 2, 2, 0.04, 1);
    FcplSettings s;
    s.include_sizes = true;
    const auto out = run_fcpl(data, s, 0);
    ASSERT_TRUE(out && out->payload.clusterlet_sizes);
    std::size_t total = 0;
    for (auto v : *out->payload.clusterlet_sizes) total += v;
    EXPECT_EQ(total, 40u);
    EXPECT_TRUE(to_json(out->payload).contains("clusterlet_sizes"));
}

TEST(RunFcpl, NoCentroidEqualsADataRow) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto data = synthetic::gaussian_mixture(60, 2, 4, 0.08, seed);
        FcplSettings s;
        s.seed = seed;
        const auto out = run_fcpl(data, s, 0);
        ASSERT_TRUE(out);
        for (auto size : out->result.affiliation.cluster_sizes()) EXPECT_GE(size, 2u);
        const auto& c = out->payload.centroids;
        for (std::size_t j = 0; j < c.rows(); ++j)
            for (std::size_t i = 0; i < data.object_count(); ++i) {
                bool same = true;
                for (std::size_t z = 0; z < 2; ++z) same = same && std::abs(c(j, z) - data.row(i)[z]) < 1e-12;
                EXPECT_FALSE(same) << "centroid " << j << " reproduces row " << i;
            }
    }
}

TEST(FoldSmallClusterlets, MergesSingletonIntoNearest) {
    const DataMatrix data(Matrix(5, 1, std::vector<double>{0.0, 0.1, 0.9, 1.0, 0.6}));
    CplResult r;
    r.affiliation = {{0, 0, 1, 1, 2}, 3};
    r.clusterlets = ClusterletState::fresh(Matrix(3, 1, std::vector<double>{0.05, 0.95, 0.6}), -4.8);
    r.converged_k = 3;
    EXPECT_EQ(fold_small_clusterlets(data, r, 2), 1u);
    EXPECT_EQ(r.converged_k, 2u);
    EXPECT_EQ(r.affiliation.assignments, (std::vector<std::size_t>{0, 0, 1, 1, 1}));
    EXPECT_NEAR(r.clusterlets.centroids(1, 0), (0.9 + 1.0 + 0.6) / 3.0, 1e-15);
}

TEST(Payload, JsonRoundTripAndValidation) {
    ClientPayload p;
    p.client_id = 4;
    p.centroids = Matrix(2, 2, std::vector<double>{0.1, 0.2, 0.3, 0.4});
    const auto back = payload_from_json(nlohmann::json::parse(to_json(p).dump()));
    EXPECT_EQ(back.client_id, 4u);
    EXPECT_EQ(back.centroids, p.centroids);
    EXPECT_FALSE(to_json(p).contains("clusterlet_sizes"));
    EXPECT_THROW(payload_from_json(nlohmann::json{{"client_id", 0}, {"centroids", nlohmann::json::array()}}),
                 InvalidArgument);
}
