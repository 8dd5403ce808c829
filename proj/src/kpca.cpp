#include <algorithm>
#include <cmath>

#include "ldme/kpca.hpp"

namespace ldme {

namespace {

// Orthonormalize columns in place; returns the retained column count.
Index qr_orthonormalize(MatrixXd& q) {
    Eigen::HouseholderQR<MatrixXd> qr(q);
    MatrixXd thin = MatrixXd::Identity(q.rows(), q.cols());
    q = qr.householderQ() * thin;
    return q.cols();
}

}  // namespace

EigenBasis power_iterate(const LinOp& op, Index k, double eps, double delta, double lam_max,
                         double lam_min, Rng& rng, const PowerOptions& opts) {
    const Index d = op.dim();
    if (k < 1) throw Error("invalid-argument", "power_iterate requires k >= 1");
    if (!(eps > 0.0 && eps < 1.0)) throw Error("invalid-argument", "power_iterate eps outside (0,1)");
    Index k_eff = std::min(k, d);

    lam_max = std::max(lam_max, 0.0);
    lam_min = std::max(lam_min, 1e-300);
    double kappa = std::max(lam_max / lam_min, 1.0);
    double n_exact =
        (opts.theta_constant / eps) * std::log(std::max(2.0, static_cast<double>(d) / (delta * eps) * kappa));
    Index n_cap = static_cast<Index>(std::min<double>(std::ceil(n_exact), static_cast<double>(opts.max_iterations)));
    n_cap = std::max(n_cap, opts.min_iterations);

    MatrixXd q = rng.normal_matrix(d, k_eff);
    qr_orthonormalize(q);

    VectorXd prev_ritz = VectorXd::Constant(k_eff, kInf);
    Index stagnant = 0;
    MatrixXd z;
    VectorXd ritz = VectorXd::Zero(k_eff);
    MatrixXd ritz_vecs = MatrixXd::Identity(k_eff, k_eff);

    for (Index it = 0; it < n_cap; ++it) {
        op.apply(q, z);
        double zn = z.norm();
        if (!(zn > 1e-280)) break;  // operator annihilates the block (zero / rank-0 case)

        MatrixXd small = q.transpose() * z;  // = Q^T A Q up to symmetry
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (small + small.transpose()));
        VectorXd cur = es.eigenvalues().reverse();

        double scale = std::max({std::abs(cur[0]), lam_min, 1e-30});
        bool settled = true;
        for (Index j = 0; j < cur.size() && settled; ++j) {
            double tol = std::max(opts.stagnation_tol * scale,
                                  opts.stagnation_eps_factor * eps * (std::abs(cur[j]) + 1e-6 * scale));
            if (std::abs(cur[j] - prev_ritz[j]) > tol) settled = false;
        }
        if (settled) {
            if (++stagnant >= 2) {
                ritz = cur;
                ritz_vecs = es.eigenvectors().rowwise().reverse();
                break;
            }
        } else {
            stagnant = 0;
        }
        prev_ritz = cur;
        ritz = cur;
        ritz_vecs = es.eigenvectors().rowwise().reverse();

        q = z;
        qr_orthonormalize(q);
    }

    // Final Rayleigh-Ritz pass on the last orthonormal block.
    op.apply(q, z);
    MatrixXd small = q.transpose() * z;
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (small + small.transpose()));
    ritz = es.eigenvalues().reverse();
    ritz_vecs = es.eigenvectors().rowwise().reverse();

    EigenBasis basis;
    basis.eps = eps;
    basis.requested_k = k;

    double top = std::max(ritz.size() > 0 ? ritz[0] : 0.0, 0.0);
    double psd_tol = 1e-9 * std::max(top, 1.0);
    if (ritz.size() > 0 && ritz.minCoeff() < -psd_tol)
        throw Error("not-psd", "negative Rayleigh quotient " + std::to_string(ritz.minCoeff()));

    // Numerical rank reduction: drop directions the operator cannot support.
    Index keep = k_eff;
    if (top > 0.0) {
        while (keep > 1 && ritz[keep - 1] <= 1e-14 * top) --keep;
    }
    basis.rank_reduced = keep < k_eff || k_eff < k;
    basis.v = q * ritz_vecs.leftCols(keep);
    basis.rayleigh = ritz.head(keep).cwiseMax(0.0);
    return basis;
}

SandwichResult verify_sandwich(const MatrixXd& a, const EigenBasis& basis, double eps) {
    if (a.rows() > kDenseOracleDim) throw Error("invalid-argument", "verify_sandwich is a dense oracle (d <= 512)");
    const Index d = a.rows();
    MatrixXd p = basis.v * basis.v.transpose();
    MatrixXd q = MatrixXd::Identity(d, d) - p;
    MatrixXd m = p * a * p + q * a * q;

    double norm_a = 0.0;
    {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
        norm_a = es.eigenvalues().cwiseAbs().maxCoeff();
    }
    double tol = 1e-8 * std::max(1.0, norm_a);

    SandwichResult res;
    Eigen::SelfAdjointEigenSolver<MatrixXd> lower(a - (1.0 - eps) * m);
    Eigen::SelfAdjointEigenSolver<MatrixXd> upper((1.0 + eps) * m - a);
    double lo = lower.eigenvalues().minCoeff();
    double hi = upper.eigenvalues().minCoeff();
    res.min_slack = std::min(lo, hi);
    res.ok = res.min_slack >= -tol;
    if (!res.ok) {
        if (lo <= hi) {
            Index j;
            lower.eigenvalues().minCoeff(&j);
            res.witness = lower.eigenvectors().col(j);
        } else {
            Index j;
            upper.eigenvalues().minCoeff(&j);
            res.witness = upper.eigenvectors().col(j);
        }
    }
    return res;
}

}  // namespace ldme
