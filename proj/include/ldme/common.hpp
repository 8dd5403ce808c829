// ldme: shared error type and small numeric helpers.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ldme {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Error with a stable machine-readable code ("degenerate-weights", "not-psd", ...).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Neumaier-compensated accumulator. The weight-mass invariant is pinned to
/// 1e-12*n and plain summation drifts past it after many multiplicative
/// downweight rounds.
class KahanSum {
public:
    void add(double x) {
        double t = s_ + x;
        if (std::abs(s_) >= std::abs(x))
            c_ += (s_ - t) + x;
        else
            c_ += (x - t) + s_;
        s_ = t;
    }
    double value() const { return s_ + c_; }

private:
    double s_ = 0.0, c_ = 0.0;
};

inline double compensated_sum(const VectorXd& v) {
    KahanSum acc;
    for (Index i = 0; i < v.size(); ++i) acc.add(v[i]);
    return acc.value();
}

/// log(sum(exp(x_i))) without overflow; returns -inf on empty input.
inline double logsumexp(std::span<const double> xs) {
    double m = -kInf;
    for (double x : xs) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline double logsumexp(const VectorXd& v) {
    return logsumexp(std::span<const double>(v.data(), static_cast<size_t>(v.size())));
}

/// Index subsets are plain vectors; helper for membership tests.
inline std::vector<char> index_mask(Index n, std::span<const Index> subset) {
    std::vector<char> mask(static_cast<size_t>(n), 0);
    for (Index i : subset) {
        if (i < 0 || i >= n) throw Error("index-out-of-range", "subset index " + std::to_string(i));
        mask[static_cast<size_t>(i)] = 1;
    }
    return mask;
}

}  // namespace ldme
