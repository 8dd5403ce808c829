// ldme: randomized simultaneous power iteration (approximate k-PCA).
//
// power_iterate runs block power iteration with per-step QR and a final
// Rayleigh-Ritz rotation, so the returned columns diagonalize V^T A V and the
// Rayleigh quotients come out weakly decreasing. The iteration count from the
// analysis, ceil((C/eps) log(d/(delta eps) * lmax/lmin)), is kept as a cap;
// in floating point the iterates stagnate long before it on gapped spectra,
// so the loop also exits once the Ritz values stop moving.

#pragma once

#include <Eigen/Dense>
#include <optional>

#include "ldme/linop.hpp"
#include "ldme/rng.hpp"

namespace ldme {

struct EigenBasis {
    MatrixXd v;          // d x k_eff, orthonormal columns, Ritz-rotated
    VectorXd rayleigh;   // <v_j, A v_j>, weakly decreasing
    double eps = 0.0;    // accuracy the basis was computed for
    Index requested_k = 0;
    bool rank_reduced = false;  // set when k exceeded the operator's numerical rank

    Index k() const { return v.cols(); }
};

struct PowerOptions {
    double theta_constant = 10.0;  // the Theta(.) constant in the iteration bound
    Index max_iterations = 20000;
    // Ritz values are "stagnant" once per-iteration drift falls under
    // max(stagnation_tol * lambda_1, stagnation_eps_factor * eps * |lambda_j|);
    // the eps-relative term stops iteration orders of magnitude before the
    // absolute one when the caller only needs a coarse (1 +- eps) basis.
    double stagnation_tol = 1e-12;
    double stagnation_eps_factor = 0.005;
    Index min_iterations = 3;
};

/// Approximate top-k eigenbasis of a PSD operator. lam_max/lam_min are caller
/// bounds on the nonzero spectrum of the working subspace (conservative bounds
/// are fine; they only enter the iteration cap). Throws "not-psd" when a Ritz
/// value is negative beyond tolerance.
EigenBasis power_iterate(const LinOp& op, Index k, double eps, double delta, double lam_max,
                         double lam_min, Rng& rng, const PowerOptions& opts = {});

struct SandwichResult {
    bool ok = false;
    double min_slack = 0.0;  // most negative eigenvalue slack observed
    VectorXd witness;        // violating direction when !ok
};

/// Checks (1-eps)(PAP + QAQ) <= A <= (1+eps)(PAP + QAQ) for P = VV^T,
/// Q = I - P, with slack tolerance -1e-8 * max(1, ||A||_op). Dense oracle.
SandwichResult verify_sandwich(const MatrixXd& a, const EigenBasis& basis, double eps);

}  // namespace ldme
