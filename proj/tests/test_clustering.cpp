#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dpr/clustering.hpp"
#include "dpr/errors.hpp"
#include "testkit.hpp"

using namespace dpr;
using Eigen::Index;
using Eigen::MatrixXd;

namespace {

MatrixXd random_points(std::mt19937_64& rng, Index n, Index d, double scale = 1.0) {
    std::uniform_real_distribution<double> u(0.0, scale);
    MatrixXd P(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) P(i, j) = u(rng);
    return P;
}

// Two gaussian blobs and a far outlier in the last row.
MatrixXd two_blobs(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 0.3);
    MatrixXd P(101, 2);
    for (Index i = 0; i < 100; ++i) {
        const double cx = i < 50 ? 0.0 : 10.0;
        P(i, 0) = cx + z(rng);
        P(i, 1) = z(rng);
    }
    P(100, 0) = 100;
    P(100, 1) = 100;
    return P;
}

}  // namespace

TEST_CASE("region_query") {
    MatrixXd same(2, 2);
    same << 1, 1, 1, 1;
    CHECK(region_query(same, 0, 1e-9) == std::vector<Index>{0, 1});
    MatrixXd apart(2, 1);
    apart << 0, 10;
    CHECK(region_query(apart, 0, 1) == std::vector<Index>{0});
    CHECK(region_query(apart, 1, 1) == std::vector<Index>{1});
    // boundary distance counts as inside
    CHECK(region_query(apart, 0, 10).size() == 2);
}

TEST_CASE("region_query matches the pairwise oracle") {
    std::mt19937_64 rng(1);
    const auto P = random_points(rng, 20, 3);
    for (double eps : {0.1, 0.3, 0.6})
        for (Index i = 0; i < P.rows(); ++i) CHECK(region_query(P, i, eps) == testkit::naive_region(P, i, eps));
}

TEST_CASE("dbscan trivial cases") {
    const MatrixXd same = MatrixXd::Ones(5, 2);
    auto m = dbscan(same, {0.1, 3});
    CHECK(m.k == 1);
    CHECK(m.noise_count() == 0);

    std::mt19937_64 rng(2);
    const auto P = random_points(rng, 12, 2);
    m = dbscan(P, {10.0, 13});
    CHECK(m.k == 0);
    CHECK(m.noise_count() == 12);
    CHECK_FALSE(m.sc.has_value());
}

TEST_CASE("dbscan on two blobs with an outlier") {
    const auto P = two_blobs(4);
    const auto m = dbscan(P, {1.5, 4});
    CHECK(m.k == 2);
    CHECK(m.labels[100] == kNoise);
    CHECK(m.noise_count() == 1);
    CHECK(testkit::same_partition(m.labels, testkit::brute_force_dbscan(P, {1.5, 4})));
    // ids follow first occurrence
    CHECK(m.labels[0] == 0);
    CHECK(m.labels[50] == 1);
}

TEST_CASE("core threshold: >= by default, strict on request") {
    MatrixXd P(3, 1);
    P << 0, 1, 2;
    // the middle point has 3 neighbours counting itself
    auto m = dbscan(P, {1.0, 3, false});
    CHECK(m.k == 1);
    CHECK(m.core == std::vector<bool>{false, true, false});
    m = dbscan(P, {1.0, 3, true});
    CHECK(m.k == 0);
}

TEST_CASE("border tie goes to the lowest-index core") {
    // two chains of cores 2 apart, a border point midway; the right chain comes first
    MatrixXd P(9, 1);
    P << 1, 1.2, 1.4, 1.6, -1, -1.2, -1.4, -1.6, 0;
    const auto m = dbscan(P, {1.0, 4});
    CHECK(m.k == 2);
    CHECK(m.core[0]);
    CHECK(m.core[4]);
    CHECK_FALSE(m.core[8]);
    CHECK(m.labels[8] == m.labels[0]);
    CHECK(m.labels == testkit::brute_force_dbscan(P, {1.0, 4}));
}

TEST_CASE("dbscan agrees with the brute-force oracle on random instances") {
    std::mt19937_64 rng(77);
    for (int t = 0; t < 60; ++t) {
        const Index n = 5 + static_cast<Index>(rng() % 40);
        const Index d = 1 + static_cast<Index>(rng() % 4);
        const auto P = random_points(rng, n, d);
        const DbscanParams p{0.05 + 0.4 * std::uniform_real_distribution<double>(0, 1)(rng),
                             1 + static_cast<int>(rng() % 6), (rng() % 2) == 0};
        const auto m = dbscan(P, p);
        const auto oracle = testkit::brute_force_dbscan(P, p);
        CHECK(m.labels == oracle);
    }
}

TEST_CASE("noise points have no core within eps; members reach a core") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
        const auto P = random_points(rng, 40, 2);
        const DbscanParams p{0.15, 4};
        const auto m = dbscan(P, p);
        for (Index i = 0; i < P.rows(); ++i) {
            const auto nb = region_query(P, i, p.eps);
            const bool near_core = std::any_of(nb.begin(), nb.end(), [&](Index j) { return m.core[j]; });
            if (m.labels[i] == kNoise) {
                CHECK_FALSE(near_core);
            } else {
                CHECK(near_core);
                // a core of the same cluster is within eps
                CHECK(std::any_of(nb.begin(), nb.end(),
                                  [&](Index j) { return m.core[j] && m.labels[j] == m.labels[i]; }));
            }
        }
    }
}

TEST_CASE("dbscan is permutation invariant up to renaming") {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 20; ++t) {
        const auto P = random_points(rng, 30, 2);
        const DbscanParams p{0.2, 3};
        const auto m = dbscan(P, p);
        std::vector<Index> perm(30);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        MatrixXd Q(30, 2);
        for (Index i = 0; i < 30; ++i) Q.row(i) = P.row(perm[static_cast<std::size_t>(i)]);
        const auto mq = dbscan(Q, p);
        std::vector<int> back(30);
        for (Index i = 0; i < 30; ++i) back[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] = mq.labels[i];
        // cores never depend on order; border ties may, so compare cores and noise
        for (Index i = 0; i < 30; ++i) {
            CHECK(mq.core[i] == m.core[perm[static_cast<std::size_t>(i)]]);
            CHECK((back[static_cast<std::size_t>(i)] == kNoise) == (m.labels[i] == kNoise));
        }
        std::vector<int> a, b;
        for (Index i = 0; i < 30; ++i)
            if (m.core[i]) {
                a.push_back(m.labels[i]);
                b.push_back(back[static_cast<std::size_t>(i)]);
            }
        CHECK(testkit::same_partition(a, b));
        CHECK(mq.k == m.k);
    }
}

TEST_CASE("a far point adds exactly one noise label") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 10; ++t) {
        const auto P = random_points(rng, 30, 2);
        const DbscanParams p{0.2, 2 + static_cast<int>(rng() % 3)};
        const auto m = dbscan(P, p);
        MatrixXd Q(31, 2);
        Q << P, Eigen::RowVector2d(50, 50);
        const auto mq = dbscan(Q, p);
        CHECK(mq.labels.back() == kNoise);
        CHECK(std::equal(m.labels.begin(), m.labels.end(), mq.labels.begin()));
    }
}

// ---------------------------------------------------------------------------

TEST_CASE("silhouette") {
    MatrixXd P(4, 1);
    P << 0, 0, 5, 5;
    CHECK(silhouette_sc(P, {0, 0, 1, 1}) == 1.0);
    const MatrixXd Z = MatrixXd::Zero(4, 1);
    CHECK(silhouette_sc(Z, {0, 0, 1, 1}) == 0.0);
    CHECK_THROWS_AS(silhouette_sc(P, {0, 0, 0, kNoise}), InputError);
    // singleton cluster members score 0
    MatrixXd S(3, 1);
    S << 0, 0, 5;
    CHECK(silhouette_sc(S, {0, 0, 1}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("silhouette matches the naive oracle and stays in [-1, 1]") {
    std::mt19937_64 rng(30);
    for (int t = 0; t < 20; ++t) {
        const auto P = random_points(rng, 30, 3);
        std::vector<int> labels(30);
        for (auto& l : labels) l = static_cast<int>(rng() % 4) - 1;  // includes noise
        labels[0] = 0;
        labels[1] = 1;
        const double sc = silhouette_sc(P, labels);
        CHECK(std::abs(sc - testkit::naive_silhouette(P, labels)) <= 1e-12);
        CHECK(sc >= -1.0);
        CHECK(sc <= 1.0);
    }
}

TEST_CASE("sse") {
    MatrixXd Z = MatrixXd::Zero(3, 2);
    CHECK(sse(Z, {0, 0, 0}) == 0.0);
    MatrixXd P(2, 1);
    P << 0, 2;
    CHECK(sse(P, {0, 0}) == 2.0);
    CHECK(sse(P, {0, kNoise}) == 0.0);
}

TEST_CASE("sse matches the oracle and does not grow under a split") {
    std::mt19937_64 rng(31);
    for (int t = 0; t < 20; ++t) {
        const auto P = random_points(rng, 25, 2);
        std::vector<int> labels(25);
        for (auto& l : labels) l = static_cast<int>(rng() % 3) - 1;
        const double s = sse(P, labels);
        CHECK(std::abs(s - testkit::naive_sse(P, labels)) <= 1e-10);
        // split cluster 0 by the sign of the first coordinate about its median
        auto split = labels;
        for (std::size_t i = 0; i < split.size(); ++i)
            if (split[i] == 0 && P(static_cast<Index>(i), 0) > 0.5) split[i] = 7;
        CHECK(sse(P, split) <= s + 1e-12);
    }
}

TEST_CASE("k-distance profile") {
    MatrixXd P(3, 1);
    P << 0, 1, 2;
    CHECK(k_distance_profile(P, 1) == std::vector<double>{1, 1, 1});
    MatrixXd D(4, 1);
    D << 3, 3, 3, 9;
    const auto kd = k_distance_profile(D, 2);
    CHECK(std::count(kd.begin(), kd.end(), 0.0) == 3);
    CHECK_THROWS_AS(k_distance_profile(P, 3), InputError);

    std::mt19937_64 rng(40);
    const auto R = random_points(rng, 30, 4);
    for (int k : {1, 3, 7}) CHECK(k_distance_profile(R, k) == testkit::naive_k_distance(R, k));
}

// ---------------------------------------------------------------------------

TEST_CASE("scan of one configuration matches dbscan") {
    const auto P = two_blobs(5);
    const auto rows = scan_params(P, {1.5}, {4});
    REQUIRE(rows.size() == 1);
    const auto m = dbscan(P, {1.5, 4});
    CHECK(rows[0].k == m.k);
    CHECK(rows[0].noise == m.noise_count());
    CHECK(rows[0].sc == m.sc);
    CHECK(rows[0].sse == m.sse);
}

TEST_CASE("scan below the minimum distance leaves SC undefined") {
    MatrixXd P(4, 1);
    P << 0, 1, 2, 3;
    const auto rows = scan_params(P, {0.5, 0.25}, {2, 3});
    for (const auto& r : rows) {
        CHECK(r.k == 0);
        CHECK_FALSE(r.sc.has_value());
    }
    CHECK_FALSE(best_scan_row(rows).has_value());
}

TEST_CASE("scan is eps-major and thread count does not change it") {
    const auto P = two_blobs(6);
    const std::vector<double> eps{0.5, 1.0, 2.0};
    const std::vector<int> mp{2, 4};
    const auto a = scan_params(P, eps, mp, false, 1);
    const auto b = scan_params(P, eps, mp, false, 4);
    REQUIRE(a.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].eps == eps[i / 2]);
        CHECK(a[i].min_pts == mp[i % 2]);
        CHECK(a[i].k == b[i].k);
        CHECK(a[i].sc == b[i].sc);
        CHECK(a[i].sse == b[i].sse);
    }
}

TEST_CASE("best scan row tie-breaks") {
    std::vector<ScanRow> rows{{0.1, 3, 2, 1, 0.8, 1}, {0.2, 3, 2, 0, 0.8, 1}, {0.3, 3, 2, 0, 0.8, 1},
                              {0.4, 3, 2, 0, 0.7, 1}, {0.5, 3, 0, 9, std::nullopt, 0}};
    CHECK(best_scan_row(rows) == std::optional<std::size_t>(2));
    rows[0].sc = 0.9;
    CHECK(best_scan_row(rows) == std::optional<std::size_t>(0));
}

TEST_CASE("k-distance eps grid") {
    MatrixXd P(5, 1);
    P << 0, 1, 2, 3, 10;
    // 1-distances sorted: 1 1 1 1 7
    const auto g = k_distance_eps_grid(P, 2, 0.0, 1.0, 3);
    CHECK(g == std::vector<double>{1.0, 4.0, 7.0});
    CHECK(k_distance_eps_grid(P, 2, 0.75, 1.0, 1) == std::vector<double>{7.0});
    CHECK(k_distance_eps_grid(P, 2, 0.875, 0.875, 1)[0] == doctest::Approx(4.0));
    CHECK_THROWS_AS(k_distance_eps_grid(P, 2, 0.5, 0.4, 3), InputError);
}

TEST_CASE("six-cluster panel: SC-maximizing scan row recovers k = 6") {
    const auto panel = testkit::generate_panel(testkit::six_cluster_spec());
    const auto points = energy_mix_features(panel.data, NormalizeMode::RawShares).values;
    const auto eps = k_distance_eps_grid(points, 3, 0.95, 1.0, 20);
    const auto rows = scan_params(points, eps, {3, 5});
    const auto best = best_scan_row(rows);
    REQUIRE(best.has_value());
    CHECK(rows[*best].k == 6);
    const auto m = dbscan(points, {rows[*best].eps, rows[*best].min_pts});
    CHECK(testkit::adjusted_rand_index(m.labels, panel.labels) >= 0.9);
}

TEST_CASE("assignment of unseen rows") {
    MatrixXd train(4, 1);
    train << 0, 0.1, 5, 5.1;
    const auto m = dbscan(train, {0.5, 2});
    MatrixXd fresh(3, 1);
    fresh << 0.3, 4.8, 2.5;
    const auto l = assign_to_clusters(m, train, fresh);
    CHECK(l[0] == m.labels[0]);
    CHECK(l[1] == m.labels[2]);
    CHECK(l[2] == kNoise);
    // assigning the training rows themselves reproduces core labels
    const auto self = assign_to_clusters(m, train, train);
    for (std::size_t i = 0; i < 4; ++i) CHECK(self[i] == m.labels[i]);
}
