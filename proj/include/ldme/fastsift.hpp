// ldme: the nearly-PCA-time pipeline.
//
// DecreaseKFNorm drives an approximate Ky Fan MMW loop and exits through one
// of three wins: total mass halves (Case 1), a dominant eigendirection block
// is set aside (Case 2), or the Ky Fan norm of the covariance halves after
// the full horizon (Case 3). BicriteriaFilter stacks the set-aside blocks
// into a basis B until the covariance outside B is small; ProduceGoodTuple
// restarts it across mass halvings. FastSIFT then learns the mean outside B
// from the filtered weights and runs SIFT (or plain sampling, FasterSIFT)
// inside B on a reserved slow sample.

#pragma once

#include <Eigen/Dense>
#include <variant>

#include "ldme/estimates.hpp"
#include "ldme/mmw.hpp"
#include "ldme/sift.hpp"

namespace ldme {

struct GoodTuple {
    MatrixXd b;       // d x k' orthonormal columns
    WeightVector w;   // saturated weights
};

enum class CaseTag { MassHalved, OperatorNormDrop, KyFanHalved };

struct CaseResult {
    CaseTag tag;
    WeightVector w;
    MatrixXd v;  // present iff OperatorNormDrop
};

struct FastSiftParams {
    double alpha = 0.0;
    double delta = 0.05;
    double radius_bound = 0.0;       // R of the diameter assumption
    double kyfan_exit_coeff = 110.0; // gamma < coeff * k / sqrt(mass) exits BicriteriaFilter
    double mmw_delta_acc = 1.0 / 200.0;
    double score_eps = 0.05;

    Index k() const { return static_cast<Index>(std::ceil(612.0 / alpha)); }
};

/// Smallest K such that the K-fold downweight w_i (1 - tau_i/tau_max)^K
/// either halves the mass against beta_bar or brings the weighted score mass
/// under `threshold`. Exact binary search; throws "K-overflow" past k_max.
struct MinKResult {
    std::uint64_t k = 0;
    WeightVector w;
};
MinKResult find_min_K(const WeightVector& w, const VectorXd& tau, double threshold, double beta_bar,
                      std::uint64_t k_max);

/// One DecreaseKFNorm run over projected points (rows of `points`); `gamma`
/// is a 1.05-approximation of the Ky Fan k-norm of the current covariance.
CaseResult decrease_kf_norm(const std::shared_ptr<const MatrixXd>& points, const WeightVector& w,
                            double gamma, double delta, const FastSiftParams& params, Rng& rng,
                            const std::vector<Index>* truth_s = nullptr, RunStats* stats = nullptr);

std::variant<WeightVector, GoodTuple> bicriteria_filter(const MatrixXd& points, double delta,
                                                        const WeightVector& w,
                                                        const FastSiftParams& params, Rng& rng,
                                                        const std::vector<Index>* truth_s = nullptr,
                                                        RunStats* stats = nullptr);

GoodTuple produce_good_tuple(const Dataset& data, double delta, const FastSiftParams& params, Rng& rng,
                             RunStats* stats = nullptr);

EstimateList fast_sift(const Dataset& data_fast, const Dataset& data_slow, double delta,
                       const FastSiftParams& params, Rng& rng, RunStats* stats = nullptr);

/// FastSIFT with the inner SIFT replaced by uniform sampling of projected
/// slow points; list size ceil((2/alpha) log(4/(delta alpha))).
EstimateList faster_sift(const Dataset& data_fast, const Dataset& data_slow, double delta,
                         const FastSiftParams& params, Rng& rng, RunStats* stats = nullptr);

}  // namespace ldme
