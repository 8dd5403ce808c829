// ldme: weighted means and implicit covariance operators.

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <span>

#include "ldme/dataset.hpp"
#include "ldme/linop.hpp"
#include "ldme/weights.hpp"

namespace ldme {

/// Weighted second-moment operator in M^T M form: row i of M is
/// sqrt(w_i) (X_i - center), scaled by 1/mass when normalized. Never
/// materializes d x d on the apply path; dense() is the d <= 512 oracle.
class CovOperator final : public LinOp {
public:
    CovOperator(std::shared_ptr<const MatrixXd> points, VectorXd effective_weights, VectorXd center,
                bool normalized, double mass);

    Index dim() const override { return center_.size(); }
    void apply(const MatrixXd& x, MatrixXd& y) const override;
    bool has_dense() const override { return dim() <= kDenseOracleDim; }
    MatrixXd dense() const override;

    const VectorXd& center() const { return center_; }
    bool normalized() const { return normalized_; }
    double mass() const { return mass_; }

private:
    std::shared_ptr<const MatrixXd> points_;  // n x d
    VectorXd weff_;                           // w_i (over Z when normalized), zero off-subset
    VectorXd center_;
    bool normalized_;
    double mass_;
};

/// sum_{i in subset} (w_i / ||w_subset||_1) X_i. Throws "degenerate-weights"
/// when the subset carries no mass.
VectorXd weighted_mean(const Dataset& data, const WeightVector& w, std::span<const Index> subset);
VectorXd weighted_mean(const Dataset& data, const WeightVector& w);

/// Covariance operator centered at the subset's weighted mean; normalized
/// divides by the subset mass, otherwise the unnormalized Cov-tilde.
CovOperator weighted_cov(const Dataset& data, const WeightVector& w, std::span<const Index> subset,
                         bool normalized);
CovOperator weighted_cov(const Dataset& data, const WeightVector& w, bool normalized);

/// Builders over a shared points matrix; the pipeline uses these so the many
/// gain operators fed to MMW alias one copy of the data.
CovOperator make_cov_operator(std::shared_ptr<const MatrixXd> points, const WeightVector& w,
                              std::span<const Index> subset, bool normalized);
CovOperator make_cov_operator(std::shared_ptr<const MatrixXd> points, const WeightVector& w,
                              bool normalized);

VectorXd cov_matvec(const CovOperator& op, const VectorXd& v);

}  // namespace ldme
