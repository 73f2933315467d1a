#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dpr/errors.hpp"
#include "testkit.hpp"

using namespace dpr;
using namespace dpr::testkit;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("ARI examples") {
    CHECK(adjusted_rand_index({0, 0, 1, 1}, {0, 0, 1, 1}) == 1.0);
    // all singletons vs one block: index 0, expected 0, max 3
    CHECK(adjusted_rand_index({0, 1, 2, 3}, {0, 0, 0, 0}) == 0.0);
    // contingency {2, 0; 1, 2}: index 2, expected 1.6, max 4
    CHECK(adjusted_rand_index({0, 0, 1, 1, 1}, {0, 0, 0, 1, 1}) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
    CHECK(adjusted_rand_index({0, 0, 1, 1, 2}, {5, 5, 9, 9, 1}) == 1.0);
    CHECK(adjusted_rand_index({0, 0, 1, 1, 1}, {7, 7, 7, 3, 3}) ==
          adjusted_rand_index({0, 0, 1, 1, 1}, {0, 0, 0, 1, 1}));
    // noise is a block like any other
    CHECK(adjusted_rand_index({kNoise, kNoise, 0, 0}, {3, 3, 1, 1}) == 1.0);
    CHECK_THROWS_AS(adjusted_rand_index({0, 1}, {0}), InputError);
}

TEST_CASE("same_partition") {
    CHECK(same_partition({0, 0, 1, kNoise}, {1, 1, 0, kNoise}));
    CHECK_FALSE(same_partition({0, 0, 1, kNoise}, {1, 1, 0, 2}));
    CHECK_FALSE(same_partition({0, 0, 1}, {0, 1, 1}));
}

TEST_CASE("generator is deterministic under a seed") {
    auto write = [](const SyntheticSpec& s) {
        std::ostringstream os;
        write_panel(os, generate_panel(s).data);
        return os.str();
    };
    CHECK(write(six_cluster_spec(3)) == write(six_cluster_spec(3)));
    CHECK(write(six_cluster_spec(3)) != write(six_cluster_spec(4)));
    CHECK(write(collinear_spec()) == write(collinear_spec(11)));
}

TEST_CASE("noise-free panels are exactly log-linear") {
    auto s = six_cluster_spec();
    s.noise_sd = 0.0;
    const auto p = generate_panel(s);
    for (std::size_t i = 0; i < p.data.size(); ++i) {
        const auto& o = p.data.observations[i];
        double y = s.intercept + p.offsets[static_cast<std::size_t>(p.labels[i])];
        for (std::size_t j = 0; j < o.features.size(); ++j)
            y += p.coefficients(static_cast<Eigen::Index>(j)) * std::log(o.features[j] + 1.0);
        CHECK(std::abs(std::log(*o.target + 1.0) - y) <= 1e-9 * std::max(1.0, std::abs(y)));
        CHECK(p.labels[i] == p.entity_cluster[o.entity]);
    }
}

TEST_CASE("copy columns repeat their base before the split period") {
    const auto spec = collinear_spec();
    const auto p = generate_panel(spec);
    for (const auto& o : p.data.observations)
        for (std::size_t j = 0; j < spec.copy_of.size(); ++j) {
            const int src = spec.copy_of[j];
            if (src < 0) continue;
            const double a = o.features[j], b = o.features[static_cast<std::size_t>(src)];
            if (static_cast<int>(o.period) < spec.copy_split_period)
                CHECK(a == b);
            else
                CHECK(a != b);
        }
}

TEST_CASE("spec parsing") {
    std::istringstream preset("preset = six_cluster\n");
    CHECK(parse_synthetic_spec(preset).seed == 7);
    std::istringstream seeded("preset = collinear\nseed = 4\n");
    const auto s = parse_synthetic_spec(seeded);
    CHECK(s.seed == 4);
    CHECK(s.n_features == 16);
    std::istringstream custom(
        "n_entities = 4\nn_periods = 3\nn_features = 2\nn_clusters = 2\n"
        "mix_profiles = 0.5,0.5;0.9,0.1\ntrue_coefficients = 1,-1\n");
    const auto c = parse_synthetic_spec(custom);
    CHECK(generate_panel(c).data.size() == 12);
    std::istringstream bad("n_features = 2\nmix_profiles = 0.5,0.6\n");
    CHECK_THROWS_AS(generate_panel(parse_synthetic_spec(bad)), InputError);
    std::istringstream unknown("colour = blue\n");
    CHECK_THROWS_AS(parse_synthetic_spec(unknown), InputError);
}

TEST_CASE("clustering oracles on hand examples") {
    MatrixXd P(4, 1);
    P << 0, 1, 10, 11;
    const std::vector<int> labels{0, 0, 1, 1};
    const double s0 = (10.5 - 1) / 10.5, s1 = (9.5 - 1) / 9.5;
    CHECK(naive_silhouette(P, labels) == doctest::Approx((s0 + s1) / 2).epsilon(1e-15));
    CHECK(naive_sse(P, labels) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(naive_k_distance(P, 1) == std::vector<double>{1, 1, 1, 1});
    CHECK(naive_region(P, 0, 1.0) == std::vector<Eigen::Index>{0, 1});

    DbscanParams params{1.0, 2, false};
    CHECK(brute_force_dbscan(P, params) == labels);
    params.min_pts = 3;
    CHECK(brute_force_dbscan(P, params) == std::vector<int>(4, kNoise));
}

TEST_CASE("regression oracles") {
    MatrixXd X(5, 2);
    X << 1, 0, 2, 1, 3, 0, 4, 1, 5, 0;
    VectorXd y(5);
    y << 3, 6, 7, 10, 11;  // 1 + 2 x1 + 1 x2
    const auto ols = reference_objective_min(X, y, 0.0, 0.0);
    CHECK(ols.beta(0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(ols.beta(1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ols.intercept == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(ols.objective) < 1e-20);
    CHECK(kkt_violation(X, y, ols.intercept, ols.beta, 0.0, 0.0).maxCoeff() < 1e-12);

    const auto zero = reference_objective_min(X, y, 1e6, 0.5);
    CHECK(zero.beta.isZero(0.0));
    CHECK(zero.intercept == doctest::Approx(y.mean()));

    // every candidate pattern is searched, including all-negative signs
    VectorXd yneg = -y;
    const auto neg = reference_objective_min(X, yneg, 0.01, 0.5);
    CHECK(neg.beta(0) < 0);
    CHECK(neg.beta(1) < 0);
    CHECK(kkt_violation(X, yneg, neg.intercept, neg.beta, 0.01, 0.5).maxCoeff() < 1e-9);

    CHECK(reference_objective(X, y, 1.0, ols.beta, 0.5, 0.4) ==
          doctest::Approx(0.5 * (0.4 * 3.0 + 0.6 * 5.0)).epsilon(1e-12));
    CHECK_THROWS_AS(reference_objective_min(MatrixXd::Zero(3, 13), VectorXd::Zero(3), 0.1, 0.5), InputError);
}
