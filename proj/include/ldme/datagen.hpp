// ldme: synthetic adversarial instances with ground truth.

#pragma once

#include <Eigen/Dense>
#include <string>

#include "ldme/dataset.hpp"
#include "ldme/estimates.hpp"
#include "ldme/linop.hpp"
#include "ldme/rng.hpp"

namespace ldme {

enum class InlierModel { Gaussian, PointMass, BoundedSupport };
enum class OutlierModel { FarClusters, MirrorMean, ColinearLine, UniformBall };

struct InstanceSpec {
    Index d = 0;
    Index n = 0;
    double alpha = 0.0;
    std::uint64_t seed = 0;

    InlierModel inlier_model = InlierModel::Gaussian;
    double inlier_sigma = 0.5;        // Gaussian std / bounded-support radius
    VectorXd mu_star;                 // defaults to the origin when empty

    OutlierModel outlier_model = OutlierModel::FarClusters;
    Index cluster_count = 0;          // 0 = round((1-alpha)/alpha)
    double outlier_radius = 0.0;      // 0 = 50 / sqrt(alpha)
    double outlier_spread = 0.5;

    void validate() const;
};

/// Generates a dataset with truth whose inlier block passes the bounded
/// second-moment check (inlier deviations are rescaled once when the
/// empirical check exceeds 1).
Dataset gen_instance(const InstanceSpec& spec, Rng& rng);

/// || (1/|S|) sum_S (X_i - mu*)(X_i - mu*)^T ||_op; the instance passes the
/// corruption-model assumption when this is <= 1.05.
double check_assumption(const Dataset& data);

struct ListMetrics {
    double min_error = 0.0;         // min over the list of ||mu - mu*||_2
    Index list_size = 0;
    double normalized_error = 0.0;  // sqrt(alpha) * min_error
};

ListMetrics eval_list(const EstimateList& list, const DatasetTruth& truth);

InlierModel inlier_model_from_string(const std::string& s);
OutlierModel outlier_model_from_string(const std::string& s);
std::string to_string(InlierModel m);
std::string to_string(OutlierModel m);

}  // namespace ldme
