// ldme: end-to-end estimator.
//
// PreProcess bounds the dataset diameter by clustering a random 1-d
// projection into gap-separated equivalence classes; per cluster FastSIFT
// produces a decomposed candidate list; PostProcess greedily merges it down
// to at most 2/alpha_j survivors. The alpha <= 1/(C d) regime dispatches to
// the sampling-only SamplePostProcess algorithm instead.

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ldme/fastsift.hpp"

namespace ldme {

enum class EstimateMode { Slow, Fast, Faster };

/// Chained equivalence classes of sorted projection values: adjacent values
/// within `threshold` join the same class. Exposed for deterministic tests.
std::vector<std::vector<Index>> cluster_by_projection(const VectorXd& values, double threshold);

/// Clusters of size >= round(alpha n) under the Gaussian projection with gap
/// threshold 4 sqrt(n log(n/delta)).
std::vector<std::vector<Index>> preprocess(const Dataset& data, double alpha, double delta, Rng& rng);

/// Greedy merge of a decomposed candidate list: keep candidates whose sampled
/// coordinates have at least n' alpha / 2 slow points within squared distance
/// 32/alpha, maximal subject to pairwise squared separation 128/alpha.
/// Throws "undecomposed-list" when candidates lack their decomposition.
EstimateList postprocess(const EstimateList& list, const MatrixXd& slow_points, double alpha);

struct PipelineOptions {
    double trivial_regime_c = 1.0;  // dispatch to sampling when alpha <= 1/(C d)
    double slow_reserve_c = 4.0;    // reserve ceil(c log(R) / alpha^2) slow points
    bool timing = false;
};

/// Full driver. `slow_indices` may be empty, in which case the driver
/// reserves a slow sample itself (deterministically from the rng).
EstimateList list_decodable_mean_estimation(const Dataset& data, std::vector<Index> slow_indices,
                                            double alpha, double delta, EstimateMode mode, Rng& rng,
                                            RunStats* stats = nullptr,
                                            const PipelineOptions& opts = {});

/// The alpha^{-1} = Omega(d) regime: random sampling plus sketched greedy
/// clustering; |L| <= 3/alpha and min squared error <= 84 d.
EstimateList sample_postprocess(const Dataset& data, double alpha, double delta, Rng& rng);

/// Driver-side reservation of the slow sample (stratified over the truth
/// inliers when available, uniform otherwise).
std::vector<Index> reserve_slow_indices(const Dataset& data, double alpha, double delta, Rng& rng,
                                        double c_slow = 4.0);

}  // namespace ldme
