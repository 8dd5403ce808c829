#include <algorithm>
#include <cmath>
#include <vector>

#include "ldme/fantope.hpp"

namespace ldme {

namespace {

// log(k) + tau - log( sum_j exp(min(tau, head_j)) + exp(log_tail) );
// increasing in tau, root is the truncation level.
double tau_gap(double tau, const VectorXd& head, double log_tail, Index k) {
    std::vector<double> terms;
    terms.reserve(static_cast<size_t>(head.size()) + 1);
    for (Index j = 0; j < head.size(); ++j) terms.push_back(std::min(tau, head[j]));
    if (log_tail > -kInf) terms.push_back(log_tail);
    return std::log(static_cast<double>(k)) + tau - logsumexp(terms);
}

MatrixXd orthonormal_complement(const MatrixXd& u) {
    const Index d = u.rows(), k = u.cols();
    Eigen::HouseholderQR<MatrixXd> qr(u);
    MatrixXd full = qr.householderQ() * MatrixXd::Identity(d, d);
    return full.rightCols(d - k);
}

// Y += sum of Taylor terms of exp(A/2) applied to the block, in place.
void taylor_exp_half_apply(const LinOp& a, const MatrixXd& x, MatrixXd& y, Index degree) {
    y = x;
    MatrixXd term = x, tmp;
    for (Index i = 1; i <= degree; ++i) {
        a.apply(term, tmp);
        term = tmp / (2.0 * static_cast<double>(i));
        y += term;
    }
}

MatrixXd taylor_exp_half_matrix(const MatrixXd& a, Index degree) {
    const Index d = a.rows();
    MatrixXd y = MatrixXd::Identity(d, d);
    MatrixXd term = y;
    for (Index i = 1; i <= degree; ++i) {
        term = (a * term) / (2.0 * static_cast<double>(i));
        y += term;
    }
    return y;
}

Index taylor_degree(double lam_max, double gamma, double degree_constant) {
    double m = degree_constant * (std::max(lam_max, 0.0) / 2.0 + std::log(3.0 / gamma));
    return static_cast<Index>(std::max(4.0, std::ceil(m)));
}

}  // namespace

double solve_tau_head_tail(const VectorXd& head, double log_tail, Index k) {
    if (head.size() == 0 && log_tail == -kInf)
        throw Error("invalid-argument", "solve_tau_head_tail with empty spectrum");
    if (head.size() < k && log_tail == -kInf)
        throw Error("invalid-argument", "head shorter than k requires tail mass");
    double hmin = head.size() > 0 ? head.minCoeff() : log_tail;
    double hmax = head.size() > 0 ? head.maxCoeff() : log_tail;

    // With a short head (rank-reduced basis) the level can sit below the
    // smallest head entry, pinned by the tail mass alone.
    double lo = hmin - 1.0;
    if (log_tail > -kInf) lo = std::min(lo, log_tail - std::log(static_cast<double>(k)) - 1.0);
    double hi = std::max(hmax, log_tail > -kInf ? log_tail : hmax) + std::log(static_cast<double>(k) + 1.0) + 1.0;
    while (tau_gap(lo, head, log_tail, k) > 0.0) lo -= std::max(1.0, hi - lo);
    while (tau_gap(hi, head, log_tail, k) <= 0.0) hi += std::max(1.0, hi - lo);

    for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, std::abs(hi)); ++it) {
        double mid = 0.5 * (lo + hi);
        if (tau_gap(mid, head, log_tail, k) <= 0.0)
            lo = mid;
        else
            hi = mid;
    }
    double tau_b = lo;

    // Recover the truncation count and snap to the closed form
    // exp(tau) = (sum_{j > l} exp(head_j) + T) / (k - l).
    Index ell = 0;
    for (Index j = 0; j < head.size(); ++j)
        if (head[j] > tau_b + 1e-9) ++ell;
    if (ell >= k) ell = k - 1;
    std::vector<double> tail_terms;
    for (Index j = ell; j < head.size(); ++j) tail_terms.push_back(head[j]);
    if (log_tail > -kInf) tail_terms.push_back(log_tail);
    if (!tail_terms.empty()) {
        double tau_cf = logsumexp(tail_terms) - std::log(static_cast<double>(k - ell));
        if (std::abs(tau_gap(tau_cf, head, log_tail, k)) <= 1e-9 && std::abs(tau_cf - tau_b) <= 1e-6 * std::max(1.0, std::abs(tau_b)) + 1e-6)
            return tau_cf;
    }
    return tau_b;
}

double solve_tau(const VectorXd& eigs, Index k) {
    const Index d = eigs.size();
    if (k < 1 || k > d) throw Error("invalid-argument", "solve_tau requires 1 <= k <= d");
    if (k == d) return kInf;  // no truncation level binds; the Fantope collapses to {I}
    VectorXd sorted = eigs;
    std::sort(sorted.data(), sorted.data() + d, std::greater<double>());
    VectorXd head = sorted.head(k);
    std::vector<double> tail(sorted.data() + k, sorted.data() + d);
    return solve_tau_head_tail(head, logsumexp(tail), k);
}

FantopePoint exact_project(const MatrixXd& s, Index k) {
    const Index d = s.rows();
    if (d > kDenseOracleDim) throw Error("invalid-argument", "exact_project is a dense oracle (d <= 512)");
    if (k < 1 || k > d) throw Error("invalid-argument", "exact_project requires 1 <= k <= d");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (s + s.transpose()));
    if (es.info() != Eigen::Success) throw Error("eigensolver-failure", "exact_project eigendecomposition");
    VectorXd lam = es.eigenvalues().reverse();
    MatrixXd v = es.eigenvectors().rowwise().reverse();

    if (k == d) return FantopePoint{MatrixXd::Identity(d, d)};

    VectorXd head = lam.head(k);
    std::vector<double> tail(lam.data() + k, lam.data() + d);
    double tau = solve_tau_head_tail(head, logsumexp(tail), k);

    // coefficients k exp(min(tau, l_j)) / N with N = k exp(tau) at the fixed point
    VectorXd c(d);
    for (Index j = 0; j < d; ++j) c[j] = std::exp(std::min(tau, lam[j]) - tau);
    return FantopePoint{v * c.asDiagonal() * v.transpose()};
}

double trace_exp_estimate(const LinOp& a, double lam_max, double gamma, double delta, Rng& rng,
                          const TraceExpOptions& opts) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw Error("invalid-argument", "trace_exp_estimate gamma outside (0,1)");
    const Index d = a.dim();
    if (lam_max / 2.0 > 650.0)
        throw Error("estimator-failure", "trace sketch would overflow doubles (lam_max too large)");

    Index m = taylor_degree(lam_max, gamma, opts.degree_constant);
    Index r = static_cast<Index>(
        std::ceil(opts.sketch_constant * std::log(2.0 * static_cast<double>(d) / delta) / (gamma * gamma)));
    r = std::max<Index>(r, 8);

    MatrixXd g = rng.rademacher_sketch(d, r);
    if (opts.materialize_dense && a.has_dense() && r > d) {
        MatrixXd p = taylor_exp_half_matrix(a.dense(), m);
        double est = 0.0;
        constexpr Index kBlock = 1024;
        for (Index j0 = 0; j0 < r; j0 += kBlock) {
            Index b = std::min(kBlock, r - j0);
            est += (p * g.middleCols(j0, b)).squaredNorm();
        }
        return est;
    }
    double est = 0.0;
    constexpr Index kBlock = 64;
    MatrixXd y;
    for (Index j0 = 0; j0 < r; j0 += kBlock) {
        Index b = std::min(kBlock, r - j0);
        MatrixXd block = g.middleCols(j0, b);
        taylor_exp_half_apply(a, block, y, m);
        est += y.squaredNorm();
    }
    return est;
}

DualCertificate approx_project(std::shared_ptr<const LinOp> s, double lam_max, double lam_min, Index k,
                               double delta_acc, double delta, Rng& rng, const ApproxProjectOptions& opts) {
    const Index d = s->dim();
    if (k < 1) throw Error("invalid-argument", "approx_project requires k >= 1");
    if (!(delta_acc > 0.0 && delta_acc < 1.0)) throw Error("invalid-argument", "approx_project Delta outside (0,1)");
    Index k_req = std::min(k, d);

    DualCertificate cert;
    cert.k_ = k_req;
    cert.lam_max_ = lam_max;
    cert.base_ = s;

    // Pure shifts (including the zero operator) project exactly to (k/d) I.
    const auto* sum = dynamic_cast<const OpSum*>(s.get());
    bool isotropic = (sum != nullptr && sum->term_count() == 0) || !(lam_max > 0.0);
    if (isotropic) {
        double level = sum != nullptr ? sum->shift() : 0.0;
        cert.isotropic_ = true;
        cert.iso_level_ = level;
        cert.u_ = MatrixXd::Identity(d, k_req);
        cert.lambda_ = VectorXd::Constant(k_req, level);
        cert.tau_hat_ = level + std::log(static_cast<double>(d) / static_cast<double>(k_req));
        cert.log_t_hat_ = d > k_req ? std::log(static_cast<double>(d - k_req)) + level : -kInf;
        cert.scale_delta_ = 0.0;
        return cert;
    }

    double eps = std::min(0.9, delta_acc / (8.0 * lam_max));
    Rng prng = rng.child(11);
    EigenBasis basis = power_iterate(*s, k_req, eps, delta / 2.0, lam_max, lam_min, prng, opts.power);
    const Index k_eff = basis.k();

    cert.u_ = basis.v;
    cert.lambda_ = basis.rayleigh;
    cert.scale_delta_ = delta_acc / (4.0 * lam_max);
    const double scale = 1.0 - cert.scale_delta_;

    bool dense_path = s->has_dense() && d <= kDenseOracleDim && !opts.force_sketch;
    if (k_eff == d) {
        cert.log_t_hat_ = -kInf;  // no complement; T-hat = 0 forced
    } else if (dense_path) {
        MatrixXd e = orthonormal_complement(cert.u_);
        MatrixXd comp = scale * (e.transpose() * s->dense() * e);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (comp + comp.transpose()));
        cert.comp_eigs_ = es.eigenvalues();
        cert.comp_basis_ = e * es.eigenvectors();
        cert.log_t_hat_ = logsumexp(*cert.comp_eigs_);
    } else {
        auto defl = std::make_shared<DeflatedOp>(s, cert.u_, scale);
        // Zero deflated part: substitute T-hat = d - k without sketching.
        Rng zrng = rng.child(13);
        MatrixXd probe = zrng.normal_matrix(d, std::min<Index>(4, d)), out;
        defl->apply(probe, out);
        if (out.norm() <= 1e-12 * std::max(1.0, probe.norm())) {
            cert.log_t_hat_ = std::log(static_cast<double>(d - k_eff));
        } else {
            double gamma = delta_acc / 8.0;
            Index m = taylor_degree(scale * lam_max, gamma, opts.trace.degree_constant);
            Index r = static_cast<Index>(std::ceil(
                opts.trace.sketch_constant * std::log(2.0 * static_cast<double>(d) / (delta / 2.0)) / (gamma * gamma)));
            if (scale * lam_max / 2.0 > 650.0)
                throw Error("estimator-failure", "deflated trace sketch would overflow");
            if (static_cast<double>(r) * static_cast<double>(d) > 1.6e7)
                throw Error("estimator-failure", "deflated trace sketch exceeds memory budget");
            Rng srng = rng.child(17);
            MatrixXd g = srng.rademacher_sketch(d, r);
            g -= cert.u_ * (cert.u_.transpose() * g);  // restrict probes to the complement
            MatrixXd w;
            taylor_exp_half_apply(*defl, g, w, m);
            double t_est = w.squaredNorm();
            if (!(t_est > 0.0)) throw Error("estimator-failure", "nonpositive trace estimate");
            cert.log_t_hat_ = std::log(t_est);
            cert.sketch_w_ = std::move(w);
            cert.sketch_eps_ = gamma;
        }
    }

    cert.tau_hat_ = solve_tau_head_tail(cert.lambda_, cert.log_t_hat_, k_req);
    return cert;
}

double DualCertificate::quadform(const VectorXd& v) const {
    if (isotropic_) return static_cast<double>(k_) / static_cast<double>(dim()) * v.squaredNorm();
    VectorXd proj = u_.transpose() * v;
    double q = 0.0;
    for (Index j = 0; j < lambda_.size(); ++j)
        q += std::exp(std::min(tau_hat_, lambda_[j]) - tau_hat_) * proj[j] * proj[j];
    if (comp_basis_) {
        VectorXd vc = comp_basis_->transpose() * v;
        for (Index i = 0; i < vc.size(); ++i) q += std::exp((*comp_eigs_)[i] - tau_hat_) * vc[i] * vc[i];
    } else if (sketch_w_) {
        q += std::exp(-tau_hat_) * (sketch_w_->transpose() * v).squaredNorm();
    }
    return q;
}

MatrixXd DualCertificate::dense() const {
    const Index d = dim();
    if (d > kDenseOracleDim) throw Error("no-dense-form", "certificate dimension exceeds oracle limit");
    if (isotropic_)
        return static_cast<double>(k_) / static_cast<double>(d) * MatrixXd::Identity(d, d);
    VectorXd c(lambda_.size());
    for (Index j = 0; j < lambda_.size(); ++j) c[j] = std::exp(std::min(tau_hat_, lambda_[j]) - tau_hat_);
    MatrixXd y = u_ * c.asDiagonal() * u_.transpose();
    if (comp_basis_) {
        VectorXd ce = (comp_eigs_->array() - tau_hat_).exp();
        y += *comp_basis_ * ce.asDiagonal() * comp_basis_->transpose();
    } else if (base_ && base_->has_dense() && u_.cols() < d) {
        // Oracle view of a sketch-path certificate: the represented remainder
        // is the exact exponential of the deflated operator; only tau carries
        // the estimation error.
        MatrixXd e = orthonormal_complement(u_);
        MatrixXd comp = (1.0 - scale_delta_) * (e.transpose() * base_->dense() * e);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (comp + comp.transpose()));
        VectorXd ce = (es.eigenvalues().array() - tau_hat_).exp();
        MatrixXd eb = e * es.eigenvectors();
        y += eb * ce.asDiagonal() * eb.transpose();
    }
    return y;
}

std::vector<double> dual_quadform(const DualCertificate& cert, const MatrixXd& vectors, double eps,
                                  double delta, Rng& rng) {
    const Index n = vectors.rows(), d = vectors.cols();
    if (d != cert.dim()) throw Error("dimension-mismatch", "dual_quadform vector dimension");
    std::vector<double> out(static_cast<size_t>(n), 0.0);

    if (cert.isotropic_) {
        double c = static_cast<double>(cert.k_) / static_cast<double>(d);
        for (Index i = 0; i < n; ++i) out[static_cast<size_t>(i)] = c * vectors.row(i).squaredNorm();
        return out;
    }

    VectorXd coef(cert.lambda_.size());
    for (Index j = 0; j < cert.lambda_.size(); ++j)
        coef[j] = std::exp(std::min(cert.tau_hat_, cert.lambda_[j]) - cert.tau_hat_);
    MatrixXd pu = vectors * cert.u_;  // n x k
    for (Index i = 0; i < n; ++i)
        out[static_cast<size_t>(i)] = (pu.row(i).transpose().array().square() * coef.array()).sum();

    if (cert.comp_basis_) {
        VectorXd cw = (cert.comp_eigs_->array() - cert.tau_hat_).exp();
        MatrixXd pc = vectors * *cert.comp_basis_;  // n x (d-k)
        for (Index i = 0; i < n; ++i)
            out[static_cast<size_t>(i)] += (pc.row(i).transpose().array().square() * cw.array()).sum();
        return out;
    }
    if (cert.u_.cols() == d) return out;  // no complement

    // Sketch path: one shared polynomial sketch for the whole batch.
    if (!cert.base_) throw Error("estimator-failure", "certificate lost its base operator");
    double scale = 1.0 - cert.scale_delta_;
    double defl_lam = scale * cert.lam_max_;
    if (defl_lam / 2.0 > 650.0) throw Error("estimator-failure", "quadform sketch would overflow");
    TraceExpOptions topt;
    Index m = taylor_degree(defl_lam, eps / 3.0, topt.degree_constant);
    Index r = static_cast<Index>(
        std::ceil(9.0 * std::log(2.0 * static_cast<double>(n) * static_cast<double>(d) / delta) / (eps * eps)));
    if (static_cast<double>(r) * static_cast<double>(d) > 3.2e7)
        throw Error("estimator-failure", "quadform sketch exceeds memory budget");
    DeflatedOp defl(cert.base_, cert.u_, scale);
    MatrixXd g = rng.rademacher_sketch(d, r);
    g -= cert.u_ * (cert.u_.transpose() * g);
    double et = std::exp(-cert.tau_hat_);
    constexpr Index kBlock = 256;
    MatrixXd w;
    for (Index j0 = 0; j0 < r; j0 += kBlock) {
        Index b = std::min(kBlock, r - j0);
        MatrixXd block = g.middleCols(j0, b);
        taylor_exp_half_apply(defl, block, w, m);
        MatrixXd vw = vectors * w;  // n x b
        for (Index i = 0; i < n; ++i) out[static_cast<size_t>(i)] += et * vw.row(i).squaredNorm();
    }
    return out;
}

}  // namespace ldme
