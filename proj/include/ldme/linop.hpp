// ldme: symmetric linear operators.
//
// Estimators see covariance and dual-aggregate matrices only through matvec
// so that nothing materializes a d x d matrix on the data path. Operators
// with d <= kDenseOracleDim additionally expose dense() for the oracle and
// fast evaluation paths.

#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "ldme/common.hpp"

namespace ldme {

constexpr Index kDenseOracleDim = 512;

class LinOp {
public:
    virtual ~LinOp() = default;
    virtual Index dim() const = 0;
    /// Y = A * X for a block of column vectors.
    virtual void apply(const MatrixXd& X, MatrixXd& Y) const = 0;
    virtual bool has_dense() const { return false; }
    virtual MatrixXd dense() const { throw Error("no-dense-form", "operator has no dense form"); }

    VectorXd apply_vec(const VectorXd& v) const {
        MatrixXd x = v, y;
        apply(x, y);
        return y.col(0);
    }
};

class DenseOp final : public LinOp {
public:
    explicit DenseOp(MatrixXd a) : a_(std::move(a)) {}
    Index dim() const override { return a_.rows(); }
    void apply(const MatrixXd& x, MatrixXd& y) const override { y = a_ * x; }
    bool has_dense() const override { return true; }
    MatrixXd dense() const override { return a_; }

private:
    MatrixXd a_;
};

/// c0 * I + sum_t coeff_t * term_t. Used for the MMW dual aggregate, whose
/// terms are unnormalized covariance operators. A dense mirror is kept for
/// d <= kDenseOracleDim; at that size accumulating the mirror is cheaper
/// than repeated constituent matvecs and it feeds the dense oracle paths.
class OpSum final : public LinOp {
public:
    explicit OpSum(Index d, double shift = 0.0) : d_(d), shift_(shift) {
        if (d_ <= kDenseOracleDim) mirror_ = shift_ * MatrixXd::Identity(d_, d_);
    }

    void add_term(double coeff, std::shared_ptr<const LinOp> op) {
        if (op->dim() != d_) throw Error("dimension-mismatch", "OpSum term dimension");
        if (mirror_ && op->has_dense())
            *mirror_ += coeff * op->dense();
        else if (mirror_ && !op->has_dense())
            mirror_.reset();
        terms_.emplace_back(coeff, std::move(op));
    }

    Index dim() const override { return d_; }
    Index term_count() const { return static_cast<Index>(terms_.size()); }
    double shift() const { return shift_; }

    void apply(const MatrixXd& x, MatrixXd& y) const override {
        if (mirror_) {
            y = *mirror_ * x;
            return;
        }
        y = shift_ * x;
        MatrixXd tmp;
        for (const auto& [c, op] : terms_) {
            op->apply(x, tmp);
            y += c * tmp;
        }
    }

    bool has_dense() const override { return mirror_.has_value(); }
    MatrixXd dense() const override {
        if (!mirror_) throw Error("no-dense-form", "OpSum exceeds dense mirror dimension");
        return *mirror_;
    }

private:
    Index d_;
    double shift_;
    std::vector<std::pair<double, std::shared_ptr<const LinOp>>> terms_;
    std::optional<MatrixXd> mirror_;
};

/// scale * (I - VV^T) A (I - VV^T) for orthonormal V; the deflated remainder
/// inside approximate Fantope projections.
class DeflatedOp final : public LinOp {
public:
    DeflatedOp(std::shared_ptr<const LinOp> base, MatrixXd v, double scale)
        : base_(std::move(base)), v_(std::move(v)), scale_(scale) {}

    Index dim() const override { return base_->dim(); }

    void apply(const MatrixXd& x, MatrixXd& y) const override {
        MatrixXd xt = x - v_ * (v_.transpose() * x);
        base_->apply(xt, y);
        y -= v_ * (v_.transpose() * y);
        y *= scale_;
    }

    bool has_dense() const override { return base_->has_dense(); }
    MatrixXd dense() const override {
        MatrixXd a = base_->dense();
        Index d = a.rows();
        MatrixXd p = MatrixXd::Identity(d, d) - v_ * v_.transpose();
        return scale_ * (p * a * p);
    }

    const MatrixXd& basis() const { return v_; }
    double scale() const { return scale_; }

private:
    std::shared_ptr<const LinOp> base_;
    MatrixXd v_;
    double scale_;
};

}  // namespace ldme
