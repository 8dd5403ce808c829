// ldme: Ky Fan-k matrix multiplicative weights (lazy mirror descent over the
// k-Fantope).
//
// The dual aggregate is kept as an operator sum with an identity shift, so
// after the standard shift the projections see I + eta * sum_s G_s with
// spectrum in [1, t+2]. Certificates are indexed so that the one returned
// after consuming G_t depends only on gains with index <= t; the certificate
// available before any gain is the uniform (k/d) I action.

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "ldme/fantope.hpp"
#include "ldme/linop.hpp"
#include "ldme/rng.hpp"

namespace ldme {

struct MmwStepRecord {
    double gain_inner = 0.0;  // estimated <G_t, Yhat_t> (weighted score mass when used by filters)
    bool monotonicity_warning = false;
};

class MmwState {
public:
    /// horizon = total number of steps the failure probability is split over.
    MmwState(Index d, Index k, double eta, double delta_acc, double delta, Index horizon, Rng rng);

    Index d() const { return s_accum->dim(); }
    Index k() const { return k_; }
    double eta() const { return eta_; }
    double delta_acc() const { return delta_acc_; }
    Index t() const { return t_; }

    /// Replace the lam_max = t+2 bound handed to the projections by the
    /// measured top eigenvalue of the aggregate (dense mirror required).
    /// Affects only constants inside the power/trace schedules.
    bool tighter_lam_max = false;

    /// Certificate Yhat_t for the next gain; certs()[s] depends on gains < s.
    const DualCertificate& current_certificate() const { return *certs_.back(); }
    const std::vector<std::shared_ptr<const DualCertificate>>& certs() const { return certs_; }
    std::vector<MmwStepRecord>& history() { return history_; }
    const std::vector<MmwStepRecord>& history() const { return history_; }

    std::shared_ptr<OpSum> s_accum;  // I + eta * sum G_s (identity shift owned here)

    friend std::shared_ptr<const DualCertificate> mmw_approx_step(MmwState& state,
                                                                  std::shared_ptr<const LinOp> gain,
                                                                  const ApproxProjectOptions& opts);

private:
    Index k_;
    double eta_;
    double delta_acc_;
    double delta_;
    Index horizon_;
    Index t_ = 0;
    Rng rng_;
    std::shared_ptr<const LinOp> last_gain_;
    std::vector<std::shared_ptr<const DualCertificate>> certs_;
    std::vector<MmwStepRecord> history_;
};

/// Consumes G_t, updates the aggregate, returns Yhat_{t+1}. The Loewner
/// monotonicity precondition is spot-checked on sampled vectors; a violation
/// is recorded as a warning, not an error. Probabilistic subroutine failures
/// are retried on fresh seeds (3 attempts) before propagating.
std::shared_ptr<const DualCertificate> mmw_approx_step(MmwState& state, std::shared_ptr<const LinOp> gain,
                                                       const ApproxProjectOptions& opts = {});

struct RegretReport {
    double lhs = 0.0;        // (1/T) || sum_t G_t ||_k   (exact run)  or  ||G_T||_k (audit)
    double rhs = 0.0;        // bound side
    double slack = 0.0;      // rhs - lhs
    std::vector<double> inner_products;  // exact <G_t, Y_t>
};

struct ExactMmwResult {
    std::vector<MatrixXd> actions;  // Y_0 .. Y_{T-1}
    RegretReport report;
};

/// Dense reference loop: Y_t = grad r*(S_t). Verifies the refined regret
/// bound against the best fixed Fantope action in hindsight. Throws
/// "step-size-violation" if some eta * G_t exceeds (1/2) I.
ExactMmwResult mmw_exact_run(const std::vector<MatrixXd>& gains, Index k, double eta);

/// Dense audit of the approximate run: ||G_T||_k <= (2/T) sum <G_t, Yhat_t>
/// + k log d / (eta T) + k Delta / eta, with G_T := G_{T-1}.
RegretReport regret_audit(const MmwState& state, const std::vector<MatrixXd>& gains);

}  // namespace ldme
