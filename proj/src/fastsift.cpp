#include <algorithm>
#include <cmath>

#include "ldme/fastsift.hpp"

namespace ldme {

namespace {

constexpr double kLamMinFloor = 1e-12;

double spectrum_bound(const MatrixXd& points, const WeightVector& w, const VectorXd& center) {
    double b = kLamMinFloor;
    for (Index i = 0; i < points.rows(); ++i)
        if (w[i] > 0.0) b = std::max(b, (points.row(i).transpose() - center).squaredNorm());
    return b;
}

// Weighted-score tally and mass for a candidate K, evaluated in log space so
// huge K just underflows to zero weight.
struct KEval {
    double mass = 0.0;
    double score_mass = 0.0;
    VectorXd w;
};

KEval eval_K(const WeightVector& w, const VectorXd& tau, double tau_max, double k) {
    const Index n = w.size();
    KEval out;
    out.w = VectorXd::Zero(n);
    KahanSum mass, score;
    for (Index i = 0; i < n; ++i) {
        double wi = w[i];
        if (wi <= 0.0) continue;
        double ratio = tau[i] / tau_max;
        double nw = 0.0;
        if (ratio < 1.0) {
            double lw = std::log(wi) + k * std::log1p(-ratio);
            nw = std::exp(lw);
        }
        out.w[i] = nw;
        mass.add(nw);
        score.add(nw * tau[i]);
    }
    out.mass = mass.value();
    out.score_mass = score.value();
    return out;
}

MatrixXd append_orthonormal(const MatrixXd& b, const MatrixXd& v) {
    const Index d = v.rows();
    MatrixXd joined(d, b.cols() + v.cols());
    if (b.cols() > 0) joined.leftCols(b.cols()) = b;
    joined.rightCols(v.cols()) = v;
    Eigen::HouseholderQR<MatrixXd> qr(joined);
    Index keep = std::min<Index>(joined.cols(), d);
    MatrixXd q = qr.householderQ() * MatrixXd::Identity(d, keep);
    // Drop columns beyond the numerical rank of the stack.
    MatrixXd r = qr.matrixQR().topLeftCorner(keep, joined.cols()).triangularView<Eigen::Upper>();
    Index rank = 0;
    double rmax = r.diagonal().cwiseAbs().maxCoeff();
    for (Index j = 0; j < keep; ++j)
        if (std::abs(r(j, j)) > 1e-10 * std::max(rmax, 1.0)) ++rank;
    return q.leftCols(std::max<Index>(rank, std::min<Index>(b.cols(), d)));
}

}  // namespace

MinKResult find_min_K(const WeightVector& w, const VectorXd& tau, double threshold, double beta_bar,
                      std::uint64_t k_max) {
    if (!(threshold > 0.0)) throw Error("invalid-argument", "find_min_K threshold must be positive");
    if ((tau.array() < 0.0).any()) throw Error("invalid-argument", "find_min_K needs nonnegative scores");
    double tau_max = 0.0;
    for (Index i = 0; i < w.size(); ++i)
        if (w[i] > 0.0) tau_max = std::max(tau_max, tau[i]);
    if (!(tau_max > 0.0)) throw Error("invalid-argument", "find_min_K: scores vanish on the support");

    auto satisfied = [&](std::uint64_t k) {
        KEval e = eval_K(w, tau, tau_max, static_cast<double>(k));
        return e.mass <= beta_bar / 2.0 || e.score_mass <= threshold;
    };

    if (!satisfied(k_max)) throw Error("K-overflow", "no K within the R^2 cap satisfies the exit test");

    std::uint64_t lo = 1, hi = k_max;
    while (lo < hi) {
        std::uint64_t mid = lo + (hi - lo) / 2;
        if (satisfied(mid))
            hi = mid;
        else
            lo = mid + 1;
    }
    KEval e = eval_K(w, tau, tau_max, static_cast<double>(lo));
    return MinKResult{lo, WeightVector(e.w)};
}

CaseResult decrease_kf_norm(const std::shared_ptr<const MatrixXd>& points, const WeightVector& w_in,
                            double gamma, double delta, const FastSiftParams& params, Rng& rng,
                            const std::vector<Index>* truth_s, RunStats* stats) {
    const Index d = points->cols();
    const Index k = std::min<Index>(params.k(), d);
    const Index n_steps = static_cast<Index>(std::ceil(425.0 * std::log(std::max<double>(2.0, static_cast<double>(d)))));
    const double sub_delta = delta / (3.0 * static_cast<double>(n_steps + 1));

    WeightVector w = w_in;
    const double beta_bar = w.mass();
    if (!(gamma > 0.0)) throw Error("invalid-argument", "decrease_kf_norm needs a positive Ky Fan estimate");

    // rho: 1.05-approximation of the unnormalized covariance operator norm.
    CovOperator cov0 = make_cov_operator(points, w, false);
    double bound0 = spectrum_bound(*points, w, cov0.center());
    Rng rho_rng = rng.child(3);
    EigenBasis top1 = power_iterate(cov0, 1, 0.05, sub_delta, bound0, kLamMinFloor, rho_rng);
    if (stats) ++stats->spectrum_calls;
    double rho = top1.rayleigh[0];
    if (!(rho > 0.0)) throw Error("invalid-argument", "decrease_kf_norm on a zero covariance");
    double eta = 1.0 / (2.1 * rho);

    MmwState mmw(d, k, eta, params.mmw_delta_acc, delta / 3.0, n_steps, rng.child(5));

    const double kmax_real = std::min(params.radius_bound * params.radius_bound, 4.5e15);
    const auto k_cap = static_cast<std::uint64_t>(std::max(1.0, std::ceil(kmax_real)));

    Index steps = 0;
    CaseResult out{CaseTag::KyFanHalved, w, {}};
    for (Index t = 0; t < n_steps; ++t) {
        steps = t + 1;
        CovOperator cov = make_cov_operator(points, w, true);
        double bound = spectrum_bound(*points, w, cov.center());
        Rng prng = rng.child(1000000 + 2 * static_cast<std::uint64_t>(t));
        EigenBasis basis = power_iterate(cov, k, 0.05, sub_delta, bound, kLamMinFloor, prng);
        if (stats) ++stats->spectrum_calls;

        double lam1 = basis.rayleigh[0];
        double lamk = basis.k() < k ? 0.0 : basis.rayleigh[basis.k() - 1];
        if (lam1 >= 3.5 * lamk) {
            out = CaseResult{CaseTag::OperatorNormDrop, w, basis.v};
            if (stats) stats->max_dkf_steps = std::max<long>(stats->max_dkf_steps, steps);
            return out;
        }

        const DualCertificate& cert = mmw.current_certificate();
        MatrixXd centered = *points;
        centered.rowwise() -= cov.center().transpose();
        Rng qrng = rng.child(1000001 + 2 * static_cast<std::uint64_t>(t));
        std::vector<double> tau_v = dual_quadform(cert, centered, params.score_eps, sub_delta, qrng);
        VectorXd tau = Eigen::Map<VectorXd>(tau_v.data(), static_cast<Index>(tau_v.size()));

        double score_mass = 0.0;
        for (Index i = 0; i < w.size(); ++i) score_mass += w[i] * tau[i];

        if (score_mass > gamma * beta_bar / 12.0) {
            if (truth_s && stats && !is_safe(tau, w, *truth_s)) ++stats->safety_violations;
            MinKResult mk = find_min_K(w, tau, gamma * beta_bar / 12.0, beta_bar, k_cap);
            w = mk.w;
            if (truth_s && stats && !is_saturated(w, *truth_s, params.alpha)) ++stats->saturation_violations;
            if (w.mass() <= beta_bar / 2.0) {
                out = CaseResult{CaseTag::MassHalved, w, {}};
                if (stats) stats->max_dkf_steps = std::max<long>(stats->max_dkf_steps, steps);
                return out;
            }
        }

        auto gain = std::make_shared<CovOperator>(make_cov_operator(points, w, false));
        mmw_approx_step(mmw, gain);
        if (!mmw.history().empty()) {
            double post_score_mass = 0.0;  // estimated <G_t, Yhat_t> under the removed weights
            for (Index i = 0; i < w.size(); ++i) post_score_mass += w[i] * tau[i];
            mmw.history().back().gain_inner = post_score_mass;
            if (stats && mmw.history().back().monotonicity_warning) ++stats->monotonicity_warnings;
        }
    }

    if (stats) stats->max_dkf_steps = std::max<long>(stats->max_dkf_steps, steps);
    out = CaseResult{CaseTag::KyFanHalved, w, {}};
    return out;
}

std::variant<WeightVector, GoodTuple> bicriteria_filter(const MatrixXd& points, double delta,
                                                        const WeightVector& w_in,
                                                        const FastSiftParams& params, Rng& rng,
                                                        const std::vector<Index>* truth_s,
                                                        RunStats* stats) {
    const Index d = points.cols();
    const Index k = std::min<Index>(params.k(), d);
    const double beta_bar = w_in.mass();
    const double r2 = params.radius_bound * params.radius_bound;
    const Index m_cap = static_cast<Index>(std::ceil(5.0 * std::log(std::max(2.0, r2 / 100.0))));
    const double sub_delta = delta / static_cast<double>(std::max<Index>(m_cap, 1));
    const Index n_steps = static_cast<Index>(std::ceil(425.0 * std::log(std::max<double>(2.0, static_cast<double>(d)))));
    const double power_delta = sub_delta / (3.0 * static_cast<double>(n_steps + 1));

    WeightVector w = w_in;
    MatrixXd b(d, 0);

    for (Index pass = 0;; ++pass) {
        if (pass > m_cap) throw Error("loop-cap", "BicriteriaFilter exceeded its 5 log(R^2/100) cap");
        if (stats) stats->max_bicriteria_passes = std::max<long>(stats->max_bicriteria_passes, pass + 1);

        if (w.mass() <= beta_bar / 2.0) return w;

        // Refresh the working copy: project all points onto the complement of B.
        auto proj = std::make_shared<MatrixXd>(points);
        if (b.cols() > 0) *proj -= (points * b) * b.transpose();
        auto cproj = std::static_pointer_cast<const MatrixXd>(proj);

        CovOperator cov = make_cov_operator(cproj, w, true);
        double bound = spectrum_bound(*cproj, w, cov.center());
        Rng prng = rng.child(7000 + static_cast<std::uint64_t>(pass));
        EigenBasis basis = power_iterate(cov, k, 0.05, power_delta, bound, kLamMinFloor, prng);
        if (stats) ++stats->spectrum_calls;
        double gamma = basis.rayleigh.sum();

        if (gamma < params.kyfan_exit_coeff * static_cast<double>(k) / std::sqrt(w.mass())) {
            return GoodTuple{append_orthonormal(b, basis.v), w};
        }

        Rng drng = rng.child(9000 + static_cast<std::uint64_t>(pass));
        CaseResult res = decrease_kf_norm(cproj, w, gamma, sub_delta, params, drng, truth_s, stats);
        switch (res.tag) {
            case CaseTag::MassHalved:
                return res.w;
            case CaseTag::OperatorNormDrop:
                w = res.w;
                b = append_orthonormal(b, res.v);
                break;
            case CaseTag::KyFanHalved:
                w = res.w;
                break;
        }
    }
}

GoodTuple produce_good_tuple(const Dataset& data, double delta, const FastSiftParams& params, Rng& rng,
                             RunStats* stats) {
    const double alpha = params.alpha;
    double call_delta = delta / (2.0 * std::max(1.0, std::log2(1.0 / alpha)));
    WeightVector w = WeightVector::uniform(data.n());
    const std::vector<Index>* truth_s = data.truth ? &data.truth->inlier_indices : nullptr;

    for (long call = 0;; ++call) {
        if (stats) stats->max_pgt_calls = std::max<long>(stats->max_pgt_calls, call + 1);
        if (w.mass() < alpha * alpha * (1.0 - 1e-9))
            throw Error("saturation-violated", "weight mass fell below alpha^2 without a good tuple");
        Rng brng = rng.child(40 + static_cast<std::uint64_t>(call));
        auto res = bicriteria_filter(data.points, call_delta, w, params, brng, truth_s, stats);
        if (std::holds_alternative<GoodTuple>(res)) return std::get<GoodTuple>(std::move(res));
        w = std::get<WeightVector>(std::move(res));
    }
}

namespace {

EstimateList fast_sift_impl(const Dataset& data_fast, const Dataset& data_slow, double delta,
                            const FastSiftParams& params, Rng& rng, RunStats* stats, bool faster) {
    GoodTuple tuple = produce_good_tuple(data_fast, delta / 2.0, params, rng, stats);
    const MatrixXd& b = tuple.b;

    VectorXd mu_w = weighted_mean(data_fast, tuple.w);
    VectorXd mu_fast = mu_w - b * (b.transpose() * mu_w);

    EstimateList out;
    out.alpha_effective = {params.alpha};

    if (!faster) {
        Dataset slow_b;
        slow_b.points = data_slow.points * b;  // SIFT runs in B's coordinate system
        if (data_slow.truth) {
            DatasetTruth t = *data_slow.truth;
            t.mu_star = b.transpose() * data_slow.truth->mu_star;
            slow_b.truth = std::move(t);
        }
        SiftConfig cfg = SiftConfig::make(params.alpha, delta / 2.0);
        Rng srng = rng.child(77);
        EstimateList inner = run_sift(slow_b, cfg, srng, nullptr, stats);

        for (const Candidate& c : inner.candidates) {
            Candidate lifted;
            auto ctx = std::make_shared<BasisContext>();
            ctx->b = b;
            ctx->v = c.context->v;
            lifted.context = ctx;
            lifted.y = c.y;
            lifted.mu_fixed = mu_fast + b * *c.mu_fixed;
            lifted.mean = *lifted.mu_fixed + ctx->lift(*lifted.y);
            lifted.algorithm = "fast";
            out.candidates.push_back(std::move(lifted));
        }
        return out;
    }

    const auto list_size = static_cast<Index>(
        std::ceil(2.0 / params.alpha * std::log(4.0 / (delta * params.alpha))));
    auto ctx = std::make_shared<BasisContext>();
    ctx->b = b;
    ctx->v = MatrixXd::Identity(b.cols(), b.cols());
    Rng srng = rng.child(78);
    for (Index s = 0; s < list_size; ++s) {
        Index i = static_cast<Index>(srng.below(static_cast<std::uint64_t>(data_slow.n())));
        Candidate c;
        c.context = ctx;
        c.y = b.transpose() * data_slow.points.row(i).transpose();
        c.mu_fixed = mu_fast;
        c.mean = mu_fast + ctx->lift(*c.y);
        c.algorithm = "faster";
        out.candidates.push_back(std::move(c));
    }
    return out;
}

}  // namespace

EstimateList fast_sift(const Dataset& data_fast, const Dataset& data_slow, double delta,
                       const FastSiftParams& params, Rng& rng, RunStats* stats) {
    return fast_sift_impl(data_fast, data_slow, delta, params, rng, stats, false);
}

EstimateList faster_sift(const Dataset& data_fast, const Dataset& data_slow, double delta,
                         const FastSiftParams& params, Rng& rng, RunStats* stats) {
    return fast_sift_impl(data_fast, data_slow, delta, params, rng, stats, true);
}

}  // namespace ldme
