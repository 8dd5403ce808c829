#include <cmath>

#include "ldme/mmw.hpp"

namespace ldme {

namespace {

double kyfan_norm(const MatrixXd& g, Index k) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
    VectorXd lam = es.eigenvalues().reverse();
    return lam.head(std::min<Index>(k, lam.size())).sum();
}

}  // namespace

MmwState::MmwState(Index d, Index k, double eta, double delta_acc, double delta, Index horizon, Rng rng)
    : k_(std::min(k, d)), eta_(eta), delta_acc_(delta_acc), delta_(delta),
      horizon_(std::max<Index>(horizon, 1)), rng_(rng) {
    if (!(eta > 0.0)) throw Error("invalid-argument", "MmwState requires eta > 0");
    s_accum = std::make_shared<OpSum>(d, 1.0);  // post-shift aggregate starts at I
    // Yhat_0 is the exact uniform action; approx_project short-circuits pure shifts.
    Rng r0 = rng_.child(0);
    certs_.push_back(std::make_shared<DualCertificate>(
        approx_project(s_accum, 1.0, 1.0, k_, delta_acc_, delta_ / static_cast<double>(horizon_), r0)));
}

std::shared_ptr<const DualCertificate> mmw_approx_step(MmwState& state, std::shared_ptr<const LinOp> gain,
                                                       const ApproxProjectOptions& opts) {
    if (gain->dim() != state.d()) throw Error("dimension-mismatch", "mmw gain dimension");

    MmwStepRecord rec;
    if (state.last_gain_) {
        // Sampled Loewner monotonicity check: v^T G_t v <= v^T G_{t-1} v.
        Rng mrng = state.rng_.child(2000000 + static_cast<std::uint64_t>(state.t_));
        for (int probe = 0; probe < 4; ++probe) {
            VectorXd v = mrng.normal_vector(state.d());
            double cur = v.dot(gain->apply_vec(v));
            double prev = v.dot(state.last_gain_->apply_vec(v));
            if (cur > prev + 1e-7 * std::max(1.0, std::abs(prev))) {
                rec.monotonicity_warning = true;
                break;
            }
        }
    }

    state.s_accum->add_term(state.eta_, gain);
    state.last_gain_ = gain;
    state.t_ += 1;

    double lam_max = static_cast<double>(state.t_) + 1.0;  // spectrum of I + eta sum G_s is in [1, t+1] after t gains
    if (state.tighter_lam_max && state.s_accum->has_dense()) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(state.s_accum->dense(), Eigen::EigenvaluesOnly);
        lam_max = std::min(lam_max, es.eigenvalues().maxCoeff() * (1.0 + 1e-9));
    }
    double per_step_delta = state.delta_ / static_cast<double>(state.horizon_);

    std::shared_ptr<const DualCertificate> cert;
    Error last_err("estimator-failure", "unreached");
    for (int attempt = 0; attempt < 3; ++attempt) {
        try {
            Rng crng = state.rng_.child(1000000 + 16 * static_cast<std::uint64_t>(state.t_) +
                                        static_cast<std::uint64_t>(attempt));
            cert = std::make_shared<DualCertificate>(approx_project(
                state.s_accum, lam_max, 1.0, state.k_, state.delta_acc_, per_step_delta, crng, opts));
            break;
        } catch (const Error& e) {
            if (e.code() != "estimator-failure") throw;
            last_err = e;
        }
    }
    if (!cert) throw last_err;

    state.certs_.push_back(cert);
    state.history_.push_back(rec);
    return cert;
}

ExactMmwResult mmw_exact_run(const std::vector<MatrixXd>& gains, Index k, double eta) {
    if (gains.empty()) throw Error("invalid-argument", "mmw_exact_run needs at least one gain");
    const Index d = gains.front().rows();
    if (d > kDenseOracleDim) throw Error("invalid-argument", "mmw_exact_run is a dense oracle (d <= 512)");

    for (const auto& g : gains) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
        if (eta * es.eigenvalues().maxCoeff() > 0.5 + 1e-9)
            throw Error("step-size-violation", "eta * ||G_t||_op exceeds 1/2");
        if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff()))
            throw Error("not-psd", "mmw gain is not positive semidefinite");
    }

    ExactMmwResult res;
    const auto n_steps = static_cast<Index>(gains.size());
    MatrixXd s = std::log(static_cast<double>(k) / static_cast<double>(d)) * MatrixXd::Identity(d, d);
    MatrixXd sum_g = MatrixXd::Zero(d, d);

    for (Index t = 0; t < n_steps; ++t) {
        res.actions.push_back(exact_project(s, k).y);
        res.report.inner_products.push_back((gains[static_cast<size_t>(t)].cwiseProduct(res.actions.back())).sum());
        s += eta * gains[static_cast<size_t>(t)];
        sum_g += gains[static_cast<size_t>(t)];
    }

    double tt = static_cast<double>(n_steps);
    res.report.lhs = kyfan_norm(sum_g, k) / tt;
    double inner_sum = 0.0;
    for (double ip : res.report.inner_products) inner_sum += ip;
    res.report.rhs = 2.0 / tt * inner_sum +
                     static_cast<double>(k) * std::log(static_cast<double>(d)) / (eta * tt);
    res.report.slack = res.report.rhs - res.report.lhs;
    return res;
}

RegretReport regret_audit(const MmwState& state, const std::vector<MatrixXd>& gains) {
    const Index d = state.d();
    if (d > kDenseOracleDim) throw Error("invalid-argument", "regret_audit is a dense oracle (d <= 512)");
    const auto n_steps = static_cast<Index>(gains.size());
    if (n_steps == 0 || n_steps > state.t()) throw Error("invalid-argument", "regret_audit gain count");

    RegretReport rep;
    double inner_sum = 0.0;
    for (Index t = 0; t < n_steps; ++t) {
        MatrixXd y = state.certs()[static_cast<size_t>(t)]->dense();
        double ip = (gains[static_cast<size_t>(t)].cwiseProduct(y)).sum();
        rep.inner_products.push_back(ip);
        inner_sum += ip;
    }
    double tt = static_cast<double>(n_steps);
    double k = static_cast<double>(state.k());
    rep.lhs = kyfan_norm(gains.back(), state.k());  // G_T := G_{T-1}
    rep.rhs = 2.0 / tt * inner_sum + k * std::log(static_cast<double>(d)) / (state.eta() * tt) +
              k * state.delta_acc() / state.eta();
    rep.slack = rep.rhs - rep.lhs;
    return rep;
}

}  // namespace ldme
