// Shared generators and dense oracles for the test suites.

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ldme/dataset.hpp"
#include "ldme/rng.hpp"
#include "ldme/weights.hpp"

namespace ldme::testing {

inline MatrixXd random_orthogonal(Index d, Rng& rng) {
    MatrixXd g = rng.normal_matrix(d, d);
    Eigen::HouseholderQR<MatrixXd> qr(g);
    return qr.householderQ() * MatrixXd::Identity(d, d);
}

/// PSD matrix with the given eigenvalues in a random basis.
inline MatrixXd random_psd(const VectorXd& eigs, Rng& rng) {
    MatrixXd q = random_orthogonal(eigs.size(), rng);
    return q * eigs.asDiagonal() * q.transpose();
}

/// PSD matrix with eigenvalues uniform in [lo, hi].
inline MatrixXd random_psd(Index d, double lo, double hi, Rng& rng) {
    VectorXd eigs(d);
    for (Index i = 0; i < d; ++i) eigs[i] = rng.uniform(lo, hi);
    return random_psd(eigs, rng);
}

inline Dataset make_dataset(const MatrixXd& pts) {
    Dataset d;
    d.points = pts;
    return d;
}

inline Dataset random_dataset(Index n, Index d, Rng& rng, double scale = 1.0) {
    return make_dataset(scale * rng.normal_matrix(n, d));
}

inline WeightVector random_weights(Index n, Rng& rng) {
    VectorXd w(n);
    for (Index i = 0; i < n; ++i) w[i] = rng.uniform() / static_cast<double>(n);
    return WeightVector(w);
}

inline std::vector<Index> all_indices(Index n) {
    std::vector<Index> idx(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    return idx;
}

/// Dense weighted covariance by brute force (the oracle the operators are
/// checked against).
inline MatrixXd dense_cov_oracle(const MatrixXd& pts, const VectorXd& w, bool normalized) {
    const Index n = pts.rows(), d = pts.cols();
    double z = w.sum();
    VectorXd mu = VectorXd::Zero(d);
    for (Index i = 0; i < n; ++i) mu += w[i] * pts.row(i).transpose();
    mu /= z;
    MatrixXd m = MatrixXd::Zero(d, d);
    for (Index i = 0; i < n; ++i) {
        VectorXd c = pts.row(i).transpose() - mu;
        m += w[i] * (c * c.transpose());
    }
    if (normalized) m /= z;
    return m;
}

inline double op_norm(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

inline double min_eig(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double trace_norm(const MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().sum();
}

inline double kyfan(const MatrixXd& m, Index k) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    VectorXd lam = es.eigenvalues().reverse();
    return lam.head(std::min<Index>(k, lam.size())).sum();
}

}  // namespace ldme::testing
