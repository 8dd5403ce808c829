// ldme: per-point weight vectors.
//
// Weights live in absolute scale (never renormalized in place): the fast
// pipeline needs the unnormalized covariance to stay Loewner-monotone while
// the total mass shrinks. All normalization happens at read time.

#pragma once

#include <Eigen/Dense>
#include <span>

#include "ldme/common.hpp"

namespace ldme {

class WeightVector {
public:
    WeightVector() = default;
    explicit WeightVector(VectorXd w) : w_(std::move(w)) { recompute_mass(); }

    static WeightVector uniform(Index n) {
        return WeightVector(VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
    }

    Index size() const { return w_.size(); }
    const VectorXd& values() const { return w_; }
    double operator[](Index i) const { return w_[i]; }

    double mass() const { return mass_; }

    double mass_on(std::span<const Index> subset) const {
        KahanSum acc;
        for (Index i : subset) acc.add(w_[i]);
        return acc.value();
    }

    /// Entrywise cap w_i <= 1/n plus nonnegativity; tolerance covers rounding.
    bool respects_cap(double slack = 1e-12) const {
        double cap = 1.0 / static_cast<double>(w_.size()) + slack;
        return (w_.array() >= -slack).all() && (w_.array() <= cap).all();
    }

    Index support_size() const { return (w_.array() > 0.0).count(); }

    void recompute_mass() { mass_ = compensated_sum(w_); }

private:
    VectorXd w_;
    double mass_ = 0.0;
};

}  // namespace ldme
