// ldme: candidate lists with provenance and the counters audited by the
// acceptance suite.

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ldme/common.hpp"

namespace ldme {

/// Coordinate frame of a candidate's sampled component: the subspace basis B
/// (empty means the identity) and the inner basis V expressed in B's
/// coordinates. The sampled part of a candidate is B V y for its coords y.
struct BasisContext {
    MatrixXd b;  // d x k', orthonormal columns; 0 columns = identity frame
    MatrixXd v;  // (k' or d) x k, orthonormal columns

    Index sample_dim() const { return v.cols(); }

    /// Rows of `pts` mapped to V-coordinates (n x k).
    MatrixXd project_rows(const MatrixXd& pts) const {
        if (b.cols() > 0) return (pts * b) * v;
        return pts * v;
    }

    VectorXd lift(const VectorXd& y) const {
        if (b.cols() > 0) return b * (v * y);
        return v * y;
    }
};

struct Candidate {
    VectorXd mean;
    // Decomposition mean = mu_fixed + context.lift(y); absent for candidates
    // that were never decomposed (e.g. sample_postprocess output).
    std::optional<VectorXd> mu_fixed;
    std::optional<VectorXd> y;
    std::shared_ptr<const BasisContext> context;
    Index cluster_id = 0;
    std::string algorithm;  // "sift", "fast", "faster", "sample"

    bool decomposed() const { return mu_fixed && y && context; }
};

struct EstimateList {
    std::vector<Candidate> candidates;
    std::vector<double> alpha_effective;  // per cluster id

    Index size() const { return static_cast<Index>(candidates.size()); }
};

/// Instrumentation counters checked against the pipeline's loop caps.
struct RunStats {
    long spectrum_calls = 0;     // Power invocations
    long sift_iterations = 0;
    long max_dkf_steps = 0;      // MMW steps inside one DecreaseKFNorm call
    long max_bicriteria_passes = 0;
    long max_pgt_calls = 0;      // BicriteriaFilter calls inside one ProduceGoodTuple
    long saturation_violations = 0;
    long safety_violations = 0;
    long monotonicity_warnings = 0;
};

}  // namespace ldme
