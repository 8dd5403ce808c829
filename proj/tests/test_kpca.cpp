#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "helpers.hpp"
#include "ldme/kpca.hpp"

using namespace ldme;
using namespace ldme::testing;

TEST_CASE("power_iterate recovers a dominant direction") {
    Rng rng(3);
    MatrixXd a = VectorXd{{4.0, 1.0}}.asDiagonal();
    DenseOp op(a);
    EigenBasis basis = power_iterate(op, 1, 0.05, 0.01, 4.0, 1.0, rng);
    CHECK(std::abs(basis.v(0, 0)) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(basis.rayleigh[0] >= 3.8);
    CHECK(basis.rayleigh[0] <= 4.2);
}

TEST_CASE("isotropic operators accept any orthonormal basis") {
    Rng rng(5);
    double c = 2.5;
    MatrixXd a = c * MatrixXd::Identity(6, 6);
    DenseOp op(a);
    EigenBasis basis = power_iterate(op, 3, 0.1, 0.01, c, c, rng);
    CHECK((basis.v.transpose() * basis.v - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-8);
    for (Index j = 0; j < 3; ++j) {
        CHECK(basis.rayleigh[j] >= (1 - 0.1) * c);
        CHECK(basis.rayleigh[j] <= (1 + 0.1) * c);
    }
    CHECK(verify_sandwich(a, basis, 0.1).ok);
}

TEST_CASE("zero operator is handled") {
    Rng rng(6);
    DenseOp op(MatrixXd::Zero(5, 5));
    EigenBasis basis = power_iterate(op, 2, 0.1, 0.01, 0.0, 1e-12, rng);
    CHECK(basis.k() >= 1);
    CHECK(basis.rayleigh.cwiseAbs().maxCoeff() == doctest::Approx(0.0));
    CHECK(verify_sandwich(MatrixXd::Zero(5, 5), basis, 0.0).ok);
}

TEST_CASE("orthonormality and decreasing Rayleigh quotients") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        Rng r = rng.child(trial);
        Index d = 8 + static_cast<Index>(r.below(20));
        Index k = 1 + static_cast<Index>(r.below(6));
        MatrixXd a = random_psd(d, 0.0, 3.0, r);
        DenseOp op(a);
        EigenBasis basis = power_iterate(op, k, 0.05, 0.01, 3.0, 1e-12, r);
        CHECK((basis.v.transpose() * basis.v - MatrixXd::Identity(basis.k(), basis.k()))
                  .cwiseAbs()
                  .maxCoeff() <= 1e-8);
        for (Index j = 1; j < basis.k(); ++j) CHECK(basis.rayleigh[j] <= basis.rayleigh[j - 1] + 1e-8);
    }
}

TEST_CASE("sandwich holds on random PSD instances (30x30, k=5)") {
    Rng rng(11);
    int pass = 0;
    const int runs = 100;
    for (int s = 0; s < runs; ++s) {
        Rng r = rng.child(s);
        MatrixXd a = random_psd(30, 0.0, 5.0, r);
        DenseOp op(a);
        EigenBasis basis = power_iterate(op, 5, 0.05, 0.01, 5.0, 1e-12, r);
        SandwichResult sw = verify_sandwich(a, basis, 0.05);
        if (!sw.ok) continue;
        // Rayleigh quotients within (1 +- eps) of the true eigenvalues.
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(a, Eigen::EigenvaluesOnly);
        VectorXd lam = es.eigenvalues().reverse();
        bool quotients_ok = true;
        for (Index j = 0; j < 5; ++j)
            if (basis.rayleigh[j] < (1 - 0.05) * lam[j] || basis.rayleigh[j] > (1 + 0.05) * lam[j])
                quotients_ok = false;
        if (quotients_ok) ++pass;
    }
    CHECK(pass >= 95);
}

TEST_CASE("verify_sandwich detects a wrong basis") {
    // For diagonal A a basis aligned with any coordinate axis keeps
    // PAP + QAQ = A, so the failing basis must mix eigendirections.
    MatrixXd a = VectorXd{{10.0, 1.0}}.asDiagonal();
    EigenBasis wrong;
    wrong.v = MatrixXd::Constant(2, 1, 1.0 / std::sqrt(2.0));
    wrong.rayleigh = VectorXd::Constant(1, 5.5);
    SandwichResult sw = verify_sandwich(a, wrong, 0.1);
    CHECK(!sw.ok);
    REQUIRE(sw.witness.size() == 2);
    // The witness certifies one of the two Loewner violations.
    MatrixXd p = wrong.v * wrong.v.transpose();
    MatrixXd q = MatrixXd::Identity(2, 2) - p;
    MatrixXd m = p * a * p + q * a * q;
    double lower = sw.witness.dot((a - 0.9 * m) * sw.witness);
    double upper = sw.witness.dot((1.1 * m - a) * sw.witness);
    CHECK(std::min(lower, upper) < -1e-8);

    EigenBasis right;
    right.v = MatrixXd::Zero(2, 1);
    right.v(0, 0) = 1.0;
    right.rayleigh = VectorXd::Constant(1, 10.0);
    CHECK(verify_sandwich(a, right, 0.0).ok);
}

TEST_CASE("doubling accuracy never worsens the sandwich violation") {
    Rng rng(13);
    for (int trial = 0; trial < 8; ++trial) {
        Rng gen = rng.child(trial);
        MatrixXd a = random_psd(15, 0.0, 4.0, gen);
        DenseOp op(a);
        PowerOptions opts;
        opts.stagnation_tol = 0.0;  // force the paper iteration counts to act
        opts.stagnation_eps_factor = 0.0;
        opts.max_iterations = 400;
        Rng r1 = rng.child(1000 + trial);
        Rng r2 = rng.child(1000 + trial);  // same stream: fixed seed comparison
        EigenBasis coarse = power_iterate(op, 4, 0.4, 0.05, 4.0, 1e-6, r1, opts);
        EigenBasis fine = power_iterate(op, 4, 0.2, 0.05, 4.0, 1e-6, r2, opts);
        double coarse_slack = verify_sandwich(a, coarse, 1e-12).min_slack;
        double fine_slack = verify_sandwich(a, fine, 1e-12).min_slack;
        CHECK(fine_slack >= coarse_slack - 1e-9);
    }
}

TEST_CASE("outputs stay inside a pre-projected subspace") {
    Rng rng(17);
    const Index d = 12, kb = 3;
    MatrixXd b = random_orthogonal(d, rng).leftCols(kb);
    MatrixXd proj = MatrixXd::Identity(d, d) - b * b.transpose();
    MatrixXd raw = random_psd(d, 0.5, 2.0, rng);
    MatrixXd a = proj * raw * proj;
    DenseOp op(a);
    EigenBasis basis = power_iterate(op, 4, 0.05, 0.01, 2.0, 1e-12, rng);
    CHECK((b.transpose() * basis.v).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("rank reduction flags and non-PSD detection") {
    Rng rng(19);
    SUBCASE("rank-deficient operator reduces k") {
        VectorXd eigs = VectorXd::Zero(10);
        eigs[0] = 3.0;
        eigs[1] = 2.0;  // rank 2
        MatrixXd a = random_psd(eigs, rng);
        DenseOp op(a);
        EigenBasis basis = power_iterate(op, 5, 0.05, 0.01, 3.0, 1e-12, rng);
        CHECK(basis.rank_reduced);
        CHECK(basis.k() == 2);
    }
    SUBCASE("indefinite operator throws not-psd") {
        VectorXd eigs(4);
        eigs << 2.0, 1.0, 0.5, -1.0;
        MatrixXd a = random_psd(eigs, rng);
        DenseOp op(a);
        CHECK_THROWS_AS(power_iterate(op, 4, 0.05, 0.01, 2.0, 1e-12, rng), Error);
    }
}
