#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"
#include "ldme/cov.hpp"

using namespace ldme;
using namespace ldme::testing;

TEST_CASE("weighted_mean basic examples") {
    MatrixXd pts(2, 2);
    pts << 0, 0, 2, 0;
    Dataset data = make_dataset(pts);
    WeightVector w = WeightVector::uniform(2);
    auto idx = all_indices(2);

    VectorXd mu = weighted_mean(data, w, idx);
    CHECK(mu[0] == doctest::Approx(1.0));
    CHECK(mu[1] == doctest::Approx(0.0));

    SUBCASE("single-point subset returns the point") {
        std::vector<Index> one{1};
        VectorXd m1 = weighted_mean(data, w, one);
        CHECK(m1[0] == doctest::Approx(2.0));
    }

    SUBCASE("zero mass on subset throws degenerate-weights") {
        WeightVector wz(VectorXd::Zero(2));
        CHECK_THROWS_AS(weighted_mean(data, wz, idx), Error);
    }
}

TEST_CASE("weighted_mean with non-uniform weights") {
    // weights (0.2, 0.2, 0.6) on x-coords (0, 2, 4): mean x = 2.8
    MatrixXd pts(3, 2);
    pts << 0, 0, 2, 0, 4, 0;
    Dataset data = make_dataset(pts);
    VectorXd wv(3);
    wv << 0.2, 0.2, 0.6;
    // scale into the 1/n cap while keeping proportions
    WeightVector w(wv / 3.0);
    VectorXd mu = weighted_mean(data, w);
    CHECK(mu[0] == doctest::Approx(2.8).epsilon(1e-12));
}

TEST_CASE("weighted_cov dense forms") {
    SUBCASE("two symmetric points") {
        MatrixXd pts(2, 2);
        pts << 1, 0, -1, 0;
        Dataset data = make_dataset(pts);
        WeightVector w = WeightVector::uniform(2);
        MatrixXd c = weighted_cov(data, w, true).dense();
        CHECK(c(0, 0) == doctest::Approx(1.0));
        CHECK(c(0, 1) == doctest::Approx(0.0));
        CHECK(c(1, 1) == doctest::Approx(0.0));
    }
    SUBCASE("identical points give the zero operator") {
        MatrixXd pts = MatrixXd::Constant(5, 3, 2.5);
        Dataset data = make_dataset(pts);
        WeightVector w = WeightVector::uniform(5);
        CHECK(weighted_cov(data, w, true).dense().norm() == doctest::Approx(0.0));
    }
    SUBCASE("three-point normalized example") {
        MatrixXd pts(3, 2);
        pts << 0, 0, 1, 0, 0, 1;
        Dataset data = make_dataset(pts);
        WeightVector w = WeightVector::uniform(3);
        MatrixXd c = weighted_cov(data, w, true).dense();
        CHECK(c(0, 0) == doctest::Approx(2.0 / 9.0));
        CHECK(c(0, 1) == doctest::Approx(-1.0 / 9.0));
        CHECK(c(1, 1) == doctest::Approx(2.0 / 9.0));
    }
}

TEST_CASE("cov_matvec matches the dense oracle") {
    Rng rng(7);
    SUBCASE("zero operator") {
        Dataset data = make_dataset(MatrixXd::Constant(4, 3, 1.0));
        WeightVector w = WeightVector::uniform(4);
        CovOperator op = weighted_cov(data, w, true);
        VectorXd v = rng.normal_vector(3);
        CHECK(cov_matvec(op, v).norm() == doctest::Approx(0.0));
    }
    SUBCASE("diagonal example") {
        MatrixXd pts(2, 2);
        pts << 1, 0, -1, 0;
        Dataset data = make_dataset(pts);
        WeightVector w = WeightVector::uniform(2);
        VectorXd v(2);
        v << 3, 5;
        VectorXd out = cov_matvec(weighted_cov(data, w, true), v);
        CHECK(out[0] == doctest::Approx(3.0));
        CHECK(out[1] == doctest::Approx(0.0));
    }
    SUBCASE("random instances, both normalizations, d up to 50") {
        for (int trial = 0; trial < 20; ++trial) {
            Rng r = rng.child(trial);
            Index n = 5 + static_cast<Index>(r.below(40));
            Index d = 2 + static_cast<Index>(r.below(49));
            Dataset data = random_dataset(n, d, r, 2.0);
            WeightVector w = random_weights(n, r);
            for (bool normalized : {true, false}) {
                CovOperator op = weighted_cov(data, w, normalized);
                MatrixXd oracle = dense_cov_oracle(data.points, w.values(), normalized);
                VectorXd v = r.normal_vector(d);
                double rel = (cov_matvec(op, v) - oracle * v).norm() / std::max(1.0, (oracle * v).norm());
                CHECK(rel <= 1e-10);
                CHECK((op.dense() - oracle).norm() <= 1e-10 * std::max(1.0, oracle.norm()));
            }
        }
    }
    SUBCASE("dimension mismatch") {
        Dataset data = random_dataset(5, 3, rng);
        WeightVector w = WeightVector::uniform(5);
        CovOperator op = weighted_cov(data, w, true);
        CHECK_THROWS_AS(cov_matvec(op, VectorXd::Zero(4)), Error);
    }
}

TEST_CASE("covariance operators are positive semidefinite") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        Rng r = rng.child(trial);
        Dataset data = random_dataset(12, 6, r, 3.0);
        WeightVector w = random_weights(12, r);
        CovOperator op = weighted_cov(data, w, true);
        for (int probe = 0; probe < 5; ++probe) {
            VectorXd v = r.normal_vector(6);
            CHECK(v.dot(op.apply_vec(v)) >= -1e-9 * v.squaredNorm());
        }
    }
}

// mu_w mu_w^T <= sum (w_i/||w||_1) X_i X_i^T, applied to shifted points
TEST_CASE("second-moment domination of the mean (random instances)") {
    Rng rng(13);
    for (int trial = 0; trial < 25; ++trial) {
        Rng r = rng.child(trial);
        Index n = 4 + static_cast<Index>(r.below(20));
        Index d = 2 + static_cast<Index>(r.below(8));
        Dataset data = random_dataset(n, d, r, 2.0);
        WeightVector w = random_weights(n, r);
        VectorXd shift = r.normal_vector(d);

        VectorXd mu = weighted_mean(data, w);
        MatrixXd lhs = MatrixXd::Zero(d, d);
        for (Index i = 0; i < n; ++i) {
            VectorXd c = data.points.row(i).transpose() - shift;
            lhs += w[i] / w.mass() * (c * c.transpose());
        }
        lhs -= (mu - shift) * (mu - shift).transpose();
        CHECK(min_eig(lhs) >= -1e-9);
    }
}

// sum w_i (X_i - v)(X_i - v)^T = Cov-tilde + ||w||_1 (mu - v)(mu - v)^T
TEST_CASE("shift-by-mean identity (random instances)") {
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        Rng r = rng.child(trial);
        Index n = 4 + static_cast<Index>(r.below(20));
        Index d = 2 + static_cast<Index>(r.below(8));
        Dataset data = random_dataset(n, d, r, 2.0);
        WeightVector w = random_weights(n, r);
        VectorXd v = r.normal_vector(d);

        VectorXd mu = weighted_mean(data, w);
        MatrixXd lhs = MatrixXd::Zero(d, d);
        for (Index i = 0; i < n; ++i) {
            VectorXd c = data.points.row(i).transpose() - v;
            lhs += w[i] * (c * c.transpose());
        }
        MatrixXd rhs = weighted_cov(data, w, false).dense() + w.mass() * (mu - v) * (mu - v).transpose();
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, lhs.norm()));
    }
}

TEST_CASE("weight mass stays compensated") {
    Rng rng(19);
    Index n = 1000;
    WeightVector w = random_weights(n, rng);
    double direct = 0.0;
    for (Index i = 0; i < n; ++i) direct += w[i];
    CHECK(std::abs(w.mass() - direct) <= 1e-12 * static_cast<double>(n));
    CHECK(w.respects_cap());
}

TEST_CASE("dataset validation") {
    Dataset data = make_dataset(MatrixXd::Zero(10, 2));
    DatasetTruth t;
    t.mu_star = VectorXd::Zero(2);
    t.alpha = 0.3;
    t.inlier_indices = {0, 1, 2};
    data.truth = t;
    CHECK_NOTHROW(data.validate());

    data.truth->inlier_indices = {0, 1};  // round(0.3 * 10) = 3 != 2
    CHECK_THROWS_AS(data.validate(), Error);

    data.truth->inlier_indices = {0, 1, 2};
    data.points(3, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(data.validate(), Error);
}
