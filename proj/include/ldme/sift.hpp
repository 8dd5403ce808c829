// ldme: SIFT, soft downweighting against whitened top-k-subspace scores.
//
// Each round scores every point by the squared length of its whitened
// projection onto the current approximate top-k eigenspace of the weighted
// covariance; the weighted average score is k by construction, so the scores
// are safe whenever the loop-continuation condition holds and downweighting
// preserves saturation. The loop exits once the k-th Rayleigh quotient drops
// below c / sqrt(total mass), after which sampled candidates carry the whole
// error budget.

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "ldme/cov.hpp"
#include "ldme/estimates.hpp"
#include "ldme/kpca.hpp"
#include "ldme/rng.hpp"

namespace ldme {

struct SiftConfig {
    double alpha = 0.0;
    Index k = 0;                 // defaults to ceil(4/alpha), clamped to d at run time
    double termination_c = 4.0;  // threshold c / sqrt(beta)
    double power_eps = 0.2;
    Index list_size = 0;         // defaults to ceil((2/alpha) log(2/delta))
    double delta = 0.05;

    static SiftConfig make(double alpha, double delta);
};

struct SiftIterationRecord {
    double mass = 0.0;
    double mass_s = -1.0;      // -1 when truth is unknown
    double lambda_k = 0.0;
    double score_mean = 0.0;   // weighted mean score (should equal k)
    double score_max = 0.0;
    bool terminated = false;   // termination fired at this iteration
    std::optional<bool> saturated;
    std::optional<bool> safe;
    Index whitening_rank = 0;
};

struct SiftTrace {
    std::vector<SiftIterationRecord> iterations;
    bool whitening_pinv_used = false;
};

/// Whitened scores tau_i = || Sigma_k^{-1/2} V^T (X_i - mu_w(T)) ||^2.
/// Near-singular directions of Sigma_k (below 1e-10 of its top eigenvalue)
/// are dropped pseudo-inverse style; rank 0 throws "whitening-singular".
VectorXd sift_scores(const Dataset& data, const WeightVector& w, const MatrixXd& v,
                     const MatrixXd& sigma_k, bool* pinv_used = nullptr, Index* rank = nullptr);

/// w'_i = (1 - tau_i / tau_max) w_i with tau_max over the support; zeroes at
/// least one previously nonzero weight. Ties for tau_max resolve to the
/// smallest index (the update value is unaffected; the choice pins golden runs).
WeightVector downweight(const WeightVector& w, const VectorXd& tau);

/// Safety: sum_S (w_i/||w_S||_1) tau_i <= (1/2) sum_T (w_i/||w||_1) tau_i.
bool is_safe(const VectorXd& tau, const WeightVector& w, std::span<const Index> s_idx);

/// Saturation: w <= 1/n entrywise and ||w_S||_1 >= alpha sqrt(||w||_1).
bool is_saturated(const WeightVector& w, std::span<const Index> s_idx, double alpha);

/// Full SIFT run; candidates are decomposed as (fixed part in the complement,
/// sampled coords in the top-k frame) for downstream merging.
EstimateList run_sift(const Dataset& data, const SiftConfig& cfg, Rng& rng, SiftTrace* trace = nullptr,
                      RunStats* stats = nullptr);

}  // namespace ldme
