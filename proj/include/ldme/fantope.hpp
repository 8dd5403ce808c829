// ldme: Bregman projection onto the k-Fantope {0 <= Y <= I, Tr Y = k}.
//
// The projection of a symmetric S is a truncated, normalized matrix
// exponential: eigenvalues above a level tau are capped before exponentiation
// so the result stays operator-norm bounded. exact_project is the d <= 512
// oracle; approx_project builds a compressed certificate from an approximate
// top-k basis, a down-scaled deflated remainder, and a trace estimate, and
// never forms the d x d matrix.
//
// All spectral arithmetic is done in log-space: the MMW aggregate reaches
// eigenvalues of order 425 log d, far past exp() overflow.

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>

#include "ldme/kpca.hpp"
#include "ldme/linop.hpp"
#include "ldme/rng.hpp"

namespace ldme {

struct FantopePoint {
    MatrixXd y;  // dense d x d symmetric, eigenvalues in [0,1], trace k
};

/// Truncation level: the maximal tau with exp(tau) / sum_j exp(min(tau, l_j))
/// <= 1/k. Solved by bisection on [min l - 1, max l + log d] to 1e-12, then
/// snapped to the piecewise closed form exp(tau) = sum_{j > l} exp(l_j)/(k-l).
/// Returns +inf for k == d (the trace constraint forces Y = I; no level binds).
double solve_tau(const VectorXd& eigs, Index k);

/// Fixed point of k exp(tau) = sum_{j in [k]} exp(min(tau, head_j)) + T where
/// T is the exponential mass of an untruncated tail, given as log(T). This is
/// the solver behind both solve_tau and the approximate certificates.
double solve_tau_head_tail(const VectorXd& head, double log_tail, Index k);

/// Dense oracle Bregman projection (gradient of the conjugate regularizer).
FantopePoint exact_project(const MatrixXd& s, Index k);

struct TraceExpOptions {
    double sketch_constant = 8.0;       // r = ceil(c * log(2d/delta) / gamma^2)
    double degree_constant = 4.0;       // m = ceil(c * (lam_max/2 + log(3/gamma)))
    bool materialize_dense = true;      // evaluate p(A/2) as a matrix when cheaper
};

/// (1 +- gamma)-estimate of Tr exp(A) for 0 <= A <= lam_max I, probability
/// >= 1 - delta: Rademacher sketch through a Taylor approximant of exp.
double trace_exp_estimate(const LinOp& a, double lam_max, double gamma, double delta, Rng& rng,
                          const TraceExpOptions& opts = {});

struct ApproxProjectOptions {
    bool force_sketch = false;     // exercise the sketch path even when dense is available
    PowerOptions power;
    TraceExpOptions trace;
};

/// Compressed representation of an approximate Fantope projection:
///   Yhat = sum_j exp(min(tau, l_j) - tau) u_j u_j^T
///          + e^{-tau} (I-P) exp(S_defl) (I-P),
/// with S_defl the (1 - Delta/(4 lam_max))-scaled deflated remainder.
class DualCertificate {
public:
    Index dim() const { return u_.rows(); }
    Index k() const { return k_; }
    const MatrixXd& basis() const { return u_; }           // top-k Ritz vectors
    const VectorXd& top_eigs() const { return lambda_; }   // Ritz values, decreasing
    double tau_hat() const { return tau_hat_; }
    double t_hat() const { return std::exp(log_t_hat_); }  // deflated-part trace estimate
    double log_t_hat() const { return log_t_hat_; }
    double scale_delta() const { return scale_delta_; }    // the Delta/(4 lam_max) down-scaling
    double norm_const() const { return static_cast<double>(k_) * std::exp(tau_hat_); }
    double lam_max() const { return lam_max_; }
    bool isotropic() const { return isotropic_; }

    /// v^T Yhat v for one vector (exact through the stored complement spectrum
    /// on the dense path, sketched otherwise).
    double quadform(const VectorXd& v) const;

    /// Dense materialization, d <= 512 oracle path only.
    MatrixXd dense() const;

    friend DualCertificate approx_project(std::shared_ptr<const LinOp> s, double lam_max, double lam_min,
                                          Index k, double delta_acc, double delta, Rng& rng,
                                          const ApproxProjectOptions& opts);
    friend std::vector<double> dual_quadform(const DualCertificate& cert, const MatrixXd& vectors,
                                             double eps, double delta, Rng& rng);

private:
    Index k_ = 0;
    MatrixXd u_;        // d x k_eff
    VectorXd lambda_;   // Ritz values
    double tau_hat_ = 0.0;
    double log_t_hat_ = -kInf;
    double scale_delta_ = 0.0;
    double lam_max_ = 0.0;
    bool isotropic_ = false;
    double iso_level_ = 0.0;  // eigenvalue level when isotropic

    std::shared_ptr<const LinOp> base_;  // the projected S
    // complement evaluation: dense spectral factorization ...
    std::optional<MatrixXd> comp_basis_;  // d x (d-k)
    std::optional<VectorXd> comp_eigs_;   // scaled deflated eigenvalues
    // ... or shared polynomial sketch (W = p(A/2) (I-P) G, column-major)
    std::optional<MatrixXd> sketch_w_;
    double sketch_eps_ = 0.0;
};

/// Approximate Bregman projection with ||Yhat - grad r*(S)||_tr <= k * Delta
/// (probability >= 1 - delta). lam_min/lam_max bound the spectrum of S on its
/// working subspace.
DualCertificate approx_project(std::shared_ptr<const LinOp> s, double lam_max, double lam_min, Index k,
                               double delta_acc, double delta, Rng& rng,
                               const ApproxProjectOptions& opts = {});

/// Batched (1 +- eps)-approximations to v_i^T Yhat v_i; rows of `vectors` are
/// the query points. Deterministic and exact on the dense certificate path;
/// the sketch path shares one polynomial sketch across the batch.
std::vector<double> dual_quadform(const DualCertificate& cert, const MatrixXd& vectors, double eps,
                                  double delta, Rng& rng);

}  // namespace ldme
