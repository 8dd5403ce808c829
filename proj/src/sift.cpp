#include <algorithm>
#include <cmath>

#include "ldme/sift.hpp"

namespace ldme {

SiftConfig SiftConfig::make(double alpha, double delta) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error("invalid-argument", "SiftConfig alpha outside (0,1]");
    SiftConfig cfg;
    cfg.alpha = alpha;
    cfg.delta = delta;
    cfg.k = static_cast<Index>(std::ceil(4.0 / alpha));
    cfg.list_size = static_cast<Index>(std::ceil(2.0 / alpha * std::log(2.0 / delta)));
    return cfg;
}

VectorXd sift_scores(const Dataset& data, const WeightVector& w, const MatrixXd& v,
                     const MatrixXd& sigma_k, bool* pinv_used, Index* rank_out) {
    const Index n = data.n(), k = v.cols();
    if (sigma_k.rows() != k || sigma_k.cols() != k)
        throw Error("dimension-mismatch", "sift_scores Sigma_k shape");

    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sigma_k + sigma_k.transpose()));
    VectorXd sig = es.eigenvalues();
    double smax = sig.maxCoeff();
    if (!(smax > 0.0)) throw Error("whitening-singular", "Sigma_k has no positive spectrum");
    double floor = 1e-10 * smax;

    std::vector<Index> keep;
    for (Index j = 0; j < k; ++j)
        if (sig[j] > floor) keep.push_back(j);
    if (pinv_used) *pinv_used = static_cast<Index>(keep.size()) < k;
    if (rank_out) *rank_out = static_cast<Index>(keep.size());

    MatrixXd wdirs(k, static_cast<Index>(keep.size()));
    VectorXd inv_sqrt(static_cast<Index>(keep.size()));
    for (size_t c = 0; c < keep.size(); ++c) {
        wdirs.col(static_cast<Index>(c)) = es.eigenvectors().col(keep[c]);
        inv_sqrt[static_cast<Index>(c)] = 1.0 / std::sqrt(sig[keep[c]]);
    }

    VectorXd mu = weighted_mean(data, w);
    MatrixXd proj = data.points * v;            // n x k
    proj.rowwise() -= (mu.transpose() * v);
    MatrixXd white = (proj * wdirs) * inv_sqrt.asDiagonal();  // n x rank
    VectorXd tau(n);
    for (Index i = 0; i < n; ++i) tau[i] = white.row(i).squaredNorm();
    return tau;
}

WeightVector downweight(const WeightVector& w, const VectorXd& tau) {
    const Index n = w.size();
    if (tau.size() != n) throw Error("dimension-mismatch", "downweight score length");
    if (!(w.mass() > 0.0)) throw Error("degenerate-weights", "downweight on all-zero weights");
    if ((tau.array() < 0.0).any()) throw Error("invalid-argument", "downweight requires nonnegative scores");

    double tau_max = -1.0;
    for (Index i = 0; i < n; ++i)
        if (w[i] > 0.0 && tau[i] > tau_max) tau_max = tau[i];  // strict > keeps the smallest maximizer
    if (!(tau_max > 0.0)) throw Error("invalid-argument", "downweight: scores vanish on the support");

    VectorXd next(n);
    for (Index i = 0; i < n; ++i) next[i] = (1.0 - tau[i] / tau_max) * w[i];
    return WeightVector(next.cwiseMax(0.0));
}

bool is_safe(const VectorXd& tau, const WeightVector& w, std::span<const Index> s_idx) {
    double ws = w.mass_on(s_idx);
    double wt = w.mass();
    if (!(ws > 0.0) || !(wt > 0.0)) return false;
    KahanSum s_side, t_side;
    for (Index i : s_idx) s_side.add(w[i] * tau[i]);
    for (Index i = 0; i < w.size(); ++i) t_side.add(w[i] * tau[i]);
    return s_side.value() / ws <= 0.5 * t_side.value() / wt;
}

bool is_saturated(const WeightVector& w, std::span<const Index> s_idx, double alpha) {
    if (!w.respects_cap()) return false;
    return w.mass_on(s_idx) >= alpha * std::sqrt(std::max(w.mass(), 0.0)) - 1e-12;
}

EstimateList run_sift(const Dataset& data, const SiftConfig& cfg, Rng& rng, SiftTrace* trace,
                      RunStats* stats) {
    const Index n = data.n(), d = data.d();
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw Error("invalid-argument", "alpha outside (0,1]");
    if (cfg.alpha * static_cast<double>(n) < 1.0)
        throw Error("invalid-argument", "alpha * n < 1: no inliers possible");

    const Index k_eff = std::min<Index>(cfg.k, d);
    auto pts = std::make_shared<const MatrixXd>(data.points);
    WeightVector w = WeightVector::uniform(n);
    double beta = w.mass();

    const std::vector<Index>* s_idx = data.truth ? &data.truth->inlier_indices : nullptr;

    EigenBasis basis;
    Rng prng = rng.child(1);
    Rng srng = rng.child(2);

    for (Index iter = 0;; ++iter) {
        if (iter > n) throw Error("non-termination", "SIFT exceeded its n-iteration cap");

        CovOperator cov = make_cov_operator(pts, w, true);
        double lam_bound = 1e-12;
        for (Index i = 0; i < n; ++i)
            if (w[i] > 0.0) lam_bound = std::max(lam_bound, (data.points.row(i).transpose() - cov.center()).squaredNorm());

        Rng it_rng = prng.child(static_cast<std::uint64_t>(iter));
        basis = power_iterate(cov, k_eff, cfg.power_eps, cfg.delta / (2.0 * static_cast<double>(n)),
                              lam_bound, 1e-12, it_rng);
        if (stats) ++stats->spectrum_calls;

        double lambda_k = basis.k() < k_eff ? 0.0 : basis.rayleigh[basis.k() - 1];
        bool terminate = !(lambda_k >= cfg.termination_c / std::sqrt(beta));

        SiftIterationRecord rec;
        rec.mass = beta;
        rec.lambda_k = lambda_k;
        rec.terminated = terminate;
        if (s_idx) {
            rec.mass_s = w.mass_on(*s_idx);
            rec.saturated = is_saturated(w, *s_idx, cfg.alpha);
            if (stats && !*rec.saturated) ++stats->saturation_violations;
        }

        if (terminate) {
            if (trace) trace->iterations.push_back(rec);
            break;
        }

        bool pinv = false;
        Index rank = 0;
        MatrixXd sigma_k = basis.rayleigh.asDiagonal();  // V is Ritz-rotated: V^T Cov V is diagonal
        VectorXd tau = sift_scores(data, w, basis.v, sigma_k, &pinv, &rank);
        rec.whitening_rank = rank;
        if (trace && pinv) trace->whitening_pinv_used = true;

        double wsum = 0.0;
        for (Index i = 0; i < n; ++i) wsum += w[i] * tau[i];
        rec.score_mean = wsum / beta;
        rec.score_max = tau.maxCoeff();
        if (s_idx) {
            rec.safe = is_safe(tau, w, *s_idx);
            if (stats && !*rec.safe) ++stats->safety_violations;
        }
        if (trace) trace->iterations.push_back(rec);

        w = downweight(w, tau);
        beta = w.mass();
        if (stats) ++stats->sift_iterations;
        if (!(beta > 0.0)) throw Error("degenerate-weights", "SIFT removed all weight");
    }

    // Emit the sampled list in the final frame.
    VectorXd mu = weighted_mean(data, w);
    auto ctx = std::make_shared<BasisContext>();
    ctx->v = basis.v;
    VectorXd mu_fixed = mu - basis.v * (basis.v.transpose() * mu);

    EstimateList list;
    list.alpha_effective = {cfg.alpha};
    for (Index s = 0; s < cfg.list_size; ++s) {
        Index i = static_cast<Index>(srng.below(static_cast<std::uint64_t>(n)));
        Candidate c;
        c.y = basis.v.transpose() * data.points.row(i).transpose();
        c.mu_fixed = mu_fixed;
        c.context = ctx;
        c.mean = mu_fixed + ctx->lift(*c.y);
        c.cluster_id = 0;
        c.algorithm = "sift";
        list.candidates.push_back(std::move(c));
    }
    return list;
}

}  // namespace ldme
