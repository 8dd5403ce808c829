// ldme: dataset container with optional ground truth for audits.

#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "ldme/common.hpp"

namespace ldme {

struct DatasetTruth {
    VectorXd mu_star;                   // true mean
    std::vector<Index> inlier_indices;  // the good subset S
    double alpha = 0.0;                 // |S| = round(alpha * n)
};

struct Dataset {
    MatrixXd points;  // n x d, one point per row
    std::optional<DatasetTruth> truth;

    Index n() const { return points.rows(); }
    Index d() const { return points.cols(); }

    /// Throws if coordinates are non-finite or the truth block is inconsistent.
    void validate() const;

    /// Dataset restricted to a subset of rows; truth indices are remapped and
    /// dropped from S when not present in the subset.
    Dataset slice(std::span<const Index> rows) const;
};

}  // namespace ldme
