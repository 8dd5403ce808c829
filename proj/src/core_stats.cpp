#include <algorithm>
#include <numeric>

#include "ldme/cov.hpp"

namespace ldme {

void Dataset::validate() const {
    if (!points.allFinite()) throw Error("non-finite-data", "dataset contains non-finite coordinates");
    if (!truth) return;
    const auto& t = *truth;
    if (t.mu_star.size() != d()) throw Error("truth-mismatch", "mu_star dimension");
    if (t.alpha <= 0.0 || t.alpha > 0.5) throw Error("truth-mismatch", "alpha outside (0, 1/2]");
    Index expect = static_cast<Index>(std::llround(t.alpha * static_cast<double>(n())));
    if (static_cast<Index>(t.inlier_indices.size()) != expect)
        throw Error("truth-mismatch", "|S| != round(alpha*n)");
    auto mask = index_mask(n(), t.inlier_indices);
    Index distinct = std::accumulate(mask.begin(), mask.end(), Index{0});
    if (distinct != expect) throw Error("truth-mismatch", "duplicate inlier indices");
}

Dataset Dataset::slice(std::span<const Index> rows) const {
    Dataset out;
    out.points.resize(static_cast<Index>(rows.size()), d());
    for (Index r = 0; r < static_cast<Index>(rows.size()); ++r) out.points.row(r) = points.row(rows[r]);
    if (truth) {
        std::vector<Index> pos(static_cast<size_t>(n()), -1);
        for (Index r = 0; r < static_cast<Index>(rows.size()); ++r) pos[static_cast<size_t>(rows[r])] = r;
        DatasetTruth t;
        t.mu_star = truth->mu_star;
        for (Index i : truth->inlier_indices)
            if (pos[static_cast<size_t>(i)] >= 0) t.inlier_indices.push_back(pos[static_cast<size_t>(i)]);
        t.alpha = static_cast<double>(t.inlier_indices.size()) / static_cast<double>(rows.size());
        out.truth = std::move(t);
    }
    return out;
}

CovOperator::CovOperator(std::shared_ptr<const MatrixXd> points, VectorXd effective_weights,
                         VectorXd center, bool normalized, double mass)
    : points_(std::move(points)),
      weff_(std::move(effective_weights)),
      center_(std::move(center)),
      normalized_(normalized),
      mass_(mass) {}

void CovOperator::apply(const MatrixXd& x, MatrixXd& y) const {
    // sum_i weff_i (X_i - mu)(X_i - mu)^T x  via two passes over the points
    const MatrixXd& p = *points_;
    MatrixXd u = p * x;  // n x k
    Eigen::RowVectorXd mx = center_.transpose() * x;
    u.rowwise() -= mx;
    MatrixXd wu = weff_.asDiagonal() * u;           // n x k
    y.noalias() = p.transpose() * wu;               // d x k
    y.noalias() -= center_ * wu.colwise().sum();    // subtract mu * sum_i weff_i u_i
}

MatrixXd CovOperator::dense() const {
    if (dim() > kDenseOracleDim) throw Error("no-dense-form", "covariance dimension exceeds oracle limit");
    const MatrixXd& p = *points_;
    MatrixXd c = p;
    c.rowwise() -= center_.transpose();
    MatrixXd sc = weff_.cwiseMax(0.0).cwiseSqrt().asDiagonal() * c;
    return sc.transpose() * sc;
}

namespace {

std::vector<Index> full_index(Index n) {
    std::vector<Index> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    return idx;
}

}  // namespace

VectorXd weighted_mean(const Dataset& data, const WeightVector& w, std::span<const Index> subset) {
    if (subset.empty()) throw Error("degenerate-weights", "empty subset");
    if (w.size() != data.n()) throw Error("dimension-mismatch", "weights length != n");
    double z = w.mass_on(subset);
    if (!(z > 0.0)) throw Error("degenerate-weights", "zero mass on subset");
    VectorXd mu = VectorXd::Zero(data.d());
    // compensated per-coordinate accumulation
    std::vector<KahanSum> acc(static_cast<size_t>(data.d()));
    for (Index i : subset) {
        double wi = w[i];
        if (wi == 0.0) continue;
        for (Index j = 0; j < data.d(); ++j) acc[static_cast<size_t>(j)].add(wi * data.points(i, j));
    }
    for (Index j = 0; j < data.d(); ++j) mu[j] = acc[static_cast<size_t>(j)].value() / z;
    return mu;
}

VectorXd weighted_mean(const Dataset& data, const WeightVector& w) {
    auto idx = full_index(data.n());
    return weighted_mean(data, w, idx);
}

CovOperator make_cov_operator(std::shared_ptr<const MatrixXd> points, const WeightVector& w,
                              std::span<const Index> subset, bool normalized) {
    if (subset.empty()) throw Error("degenerate-weights", "empty subset");
    double z = w.mass_on(subset);
    if (!(z > 0.0)) throw Error("degenerate-weights", "zero mass on subset");
    Index n = points->rows(), d = points->cols();
    std::vector<KahanSum> acc(static_cast<size_t>(d));
    for (Index i : subset) {
        double wi = w[i];
        if (wi == 0.0) continue;
        for (Index j = 0; j < d; ++j) acc[static_cast<size_t>(j)].add(wi * (*points)(i, j));
    }
    VectorXd mu(d);
    for (Index j = 0; j < d; ++j) mu[j] = acc[static_cast<size_t>(j)].value() / z;
    VectorXd weff = VectorXd::Zero(n);
    for (Index i : subset) weff[i] = normalized ? w[i] / z : w[i];
    return CovOperator(std::move(points), std::move(weff), std::move(mu), normalized, z);
}

CovOperator make_cov_operator(std::shared_ptr<const MatrixXd> points, const WeightVector& w,
                              bool normalized) {
    auto idx = full_index(points->rows());
    return make_cov_operator(std::move(points), w, idx, normalized);
}

CovOperator weighted_cov(const Dataset& data, const WeightVector& w, std::span<const Index> subset,
                         bool normalized) {
    if (w.size() != data.n()) throw Error("dimension-mismatch", "weights length != n");
    auto pts = std::make_shared<const MatrixXd>(data.points);
    return make_cov_operator(std::move(pts), w, subset, normalized);
}

CovOperator weighted_cov(const Dataset& data, const WeightVector& w, bool normalized) {
    auto idx = full_index(data.n());
    return weighted_cov(data, w, idx, normalized);
}

VectorXd cov_matvec(const CovOperator& op, const VectorXd& v) {
    if (v.size() != op.dim()) throw Error("dimension-mismatch", "cov_matvec vector length");
    return op.apply_vec(v);
}

}  // namespace ldme
