#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "ldme/pipeline.hpp"

namespace ldme {

std::vector<std::vector<Index>> cluster_by_projection(const VectorXd& values, double threshold) {
    const Index n = values.size();
    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::sort(order.begin(), order.end(), [&](Index a, Index b) {
        return values[a] < values[b] || (values[a] == values[b] && a < b);
    });

    std::vector<std::vector<Index>> classes;
    for (Index pos = 0; pos < n; ++pos) {
        Index i = order[static_cast<size_t>(pos)];
        if (pos == 0 || values[i] - values[order[static_cast<size_t>(pos - 1)]] > threshold)
            classes.emplace_back();
        classes.back().push_back(i);
    }
    for (auto& c : classes) std::sort(c.begin(), c.end());
    return classes;
}

std::vector<std::vector<Index>> preprocess(const Dataset& data, double alpha, double delta, Rng& rng) {
    const Index n = data.n();
    if (n < 2) throw Error("invalid-argument", "preprocess needs n >= 2");
    VectorXd g = rng.normal_vector(data.d());
    VectorXd v = data.points * g;
    double nn = static_cast<double>(n);
    double threshold = 4.0 * std::sqrt(nn * std::log(nn / delta));
    auto classes = cluster_by_projection(v, threshold);

    auto min_size = static_cast<Index>(std::llround(alpha * nn));
    std::vector<std::vector<Index>> keep;
    for (auto& c : classes)
        if (static_cast<Index>(c.size()) >= std::max<Index>(min_size, 1)) keep.push_back(std::move(c));
    return keep;
}

EstimateList postprocess(const EstimateList& list, const MatrixXd& slow_points, double alpha) {
    for (const Candidate& c : list.candidates)
        if (!c.decomposed()) throw Error("undecomposed-list", "postprocess requires decomposed candidates");
    EstimateList out;
    out.alpha_effective = list.alpha_effective;
    if (list.candidates.empty()) return out;

    const double close2 = 32.0 / alpha;
    const double sep2 = 128.0 / alpha;
    const double np = static_cast<double>(slow_points.rows());
    const double support_min = np * alpha / 2.0;

    // Project the slow set once per distinct frame.
    std::vector<const BasisContext*> frames;
    std::vector<MatrixXd> slow_proj;
    auto frame_slot = [&](const BasisContext* ctx) {
        for (size_t f = 0; f < frames.size(); ++f)
            if (frames[f] == ctx) return f;
        frames.push_back(ctx);
        slow_proj.push_back(ctx->project_rows(slow_points));
        return frames.size() - 1;
    };

    struct Entry {
        size_t idx;
        size_t frame;
        long support;
    };
    std::vector<Entry> entries;
    for (size_t i = 0; i < list.candidates.size(); ++i) {
        const Candidate& c = list.candidates[i];
        size_t f = frame_slot(c.context.get());
        const MatrixXd& sp = slow_proj[f];
        long support = 0;
        for (Index j = 0; j < sp.rows(); ++j)
            if ((sp.row(j).transpose() - *c.y).squaredNorm() <= close2) ++support;
        if (static_cast<double>(support) >= support_min) entries.push_back({i, f, support});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.support > b.support || (a.support == b.support && a.idx < b.idx);
    });

    std::vector<size_t> chosen;
    for (const Entry& e : entries) {
        const Candidate& c = list.candidates[e.idx];
        bool separated = true;
        for (size_t cidx : chosen) {
            const Candidate& other = list.candidates[cidx];
            double dist2 = (other.context == c.context)
                               ? (*other.y - *c.y).squaredNorm()
                               : (other.mean - c.mean).squaredNorm();
            if (dist2 < sep2) {
                separated = false;
                break;
            }
        }
        if (separated) chosen.push_back(e.idx);
    }
    std::sort(chosen.begin(), chosen.end());
    for (size_t cidx : chosen) out.candidates.push_back(list.candidates[cidx]);
    return out;
}

std::vector<Index> reserve_slow_indices(const Dataset& data, double alpha, double delta, Rng& rng,
                                        double c_slow) {
    const Index n = data.n();
    double nn = static_cast<double>(n);
    double radius = 4.0 * nn * nn * nn * nn / (delta * delta);
    auto want = static_cast<Index>(std::ceil(c_slow * std::log(std::max(radius, 2.0)) / (alpha * alpha)));
    Index m = std::min<Index>(want, n / 2);

    Rng srng = rng.child(0x510F);
    auto sample_without_replacement = [&](std::vector<Index> pool, Index count) {
        std::vector<Index> picked;
        for (Index s = 0; s < count && !pool.empty(); ++s) {
            size_t j = static_cast<size_t>(srng.below(pool.size()));
            picked.push_back(pool[j]);
            pool[j] = pool.back();
            pool.pop_back();
        }
        std::sort(picked.begin(), picked.end());
        return picked;
    };

    if (!data.truth) {
        std::vector<Index> all(static_cast<size_t>(n));
        std::iota(all.begin(), all.end(), Index{0});
        return sample_without_replacement(std::move(all), m);
    }

    // Stratified: keep the inlier fraction of the slow set at alpha exactly.
    auto mask = index_mask(n, data.truth->inlier_indices);
    std::vector<Index> in_pool, out_pool;
    for (Index i = 0; i < n; ++i) (mask[static_cast<size_t>(i)] ? in_pool : out_pool).push_back(i);
    auto m_in = static_cast<Index>(std::llround(alpha * static_cast<double>(m)));
    auto picked_in = sample_without_replacement(std::move(in_pool), m_in);
    auto picked_out = sample_without_replacement(std::move(out_pool), m - m_in);
    picked_in.insert(picked_in.end(), picked_out.begin(), picked_out.end());
    std::sort(picked_in.begin(), picked_in.end());
    return picked_in;
}

EstimateList sample_postprocess(const Dataset& data, double alpha, double delta, Rng& rng) {
    const Index n = data.n(), d = data.d();
    if (!(alpha > 0.0 && alpha <= 0.5)) throw Error("invalid-argument", "sample_postprocess alpha");
    auto n_samples = static_cast<Index>(std::ceil(36.0 * std::log(2.0 / delta) / alpha));
    auto c = static_cast<Index>(std::ceil(9.0 * std::log(1.0 / (alpha * delta))));

    std::vector<Index> sampled(static_cast<size_t>(n_samples));
    for (auto& i : sampled) i = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));

    MatrixXd g = rng.rademacher_sketch(d, c);
    MatrixXd sk(n_samples, c);
    for (Index s = 0; s < n_samples; ++s) sk.row(s) = data.points.row(sampled[static_cast<size_t>(s)]) * g;

    const double close2 = 8.8 * static_cast<double>(d);
    const double sep2 = 35.2 * static_cast<double>(d);
    const double support_min = alpha * static_cast<double>(n_samples) / 3.0;

    std::vector<Index> chosen;
    for (Index s = 0; s < n_samples; ++s) {
        long support = 0;
        for (Index t = 0; t < n_samples; ++t)
            if ((sk.row(s) - sk.row(t)).squaredNorm() <= close2) ++support;
        if (static_cast<double>(support) < support_min) continue;
        bool separated = true;
        for (Index cidx : chosen)
            if ((sk.row(s) - sk.row(cidx)).squaredNorm() < sep2) {
                separated = false;
                break;
            }
        if (separated) chosen.push_back(s);
    }

    EstimateList out;
    out.alpha_effective = {alpha};
    for (Index s : chosen) {
        Candidate cand;
        cand.mean = data.points.row(sampled[static_cast<size_t>(s)]).transpose();
        cand.algorithm = "sample";
        out.candidates.push_back(std::move(cand));
    }
    return out;
}

EstimateList list_decodable_mean_estimation(const Dataset& data, std::vector<Index> slow_indices,
                                            double alpha, double delta, EstimateMode mode, Rng& rng,
                                            RunStats* stats, const PipelineOptions& opts) {
    if (!(alpha > 0.0 && alpha <= 0.5)) throw Error("invalid-argument", "alpha outside (0, 1/2]");
    data.validate();

    if (mode == EstimateMode::Slow) {
        SiftConfig cfg = SiftConfig::make(alpha, delta);
        Rng srng = rng.child(1);
        return run_sift(data, cfg, srng, nullptr, stats);
    }

    if (alpha <= 1.0 / (opts.trivial_regime_c * static_cast<double>(data.d()))) {
        Rng srng = rng.child(2);
        return sample_postprocess(data, alpha, delta, srng);
    }

    if (slow_indices.empty()) {
        Rng rrng = rng.child(3);
        slow_indices = reserve_slow_indices(data, alpha, delta, rrng, opts.slow_reserve_c);
    }

    auto slow_mask = index_mask(data.n(), slow_indices);
    std::vector<Index> fast_idx;
    for (Index i = 0; i < data.n(); ++i)
        if (!slow_mask[static_cast<size_t>(i)]) fast_idx.push_back(i);

    Dataset t_all = data.slice(fast_idx);
    Dataset t_slow = data.slice(slow_indices);
    const double n_t = static_cast<double>(t_all.n());
    const double radius_bound = 4.0 * n_t * n_t * n_t * n_t / (delta * delta);

    Rng prng = rng.child(4);
    auto clusters = preprocess(t_all, alpha, delta / 2.0, prng);

    EstimateList out;
    for (size_t j = 0; j < clusters.size(); ++j) {
        const auto& cluster = clusters[j];
        double alpha_j = std::min(1.0, alpha * n_t / static_cast<double>(cluster.size()));
        Dataset t_j = t_all.slice(cluster);

        FastSiftParams params;
        params.alpha = alpha_j;
        params.delta = delta * alpha / 2.0;
        params.radius_bound = radius_bound;

        Rng crng = rng.child(100 + static_cast<std::uint64_t>(j));
        EstimateList l_j = (mode == EstimateMode::Fast)
                               ? fast_sift(t_j, t_slow, params.delta, params, crng, stats)
                               : faster_sift(t_j, t_slow, params.delta, params, crng, stats);
        EstimateList merged = postprocess(l_j, t_slow.points, alpha_j);
        if (static_cast<double>(merged.size()) > 2.0 / alpha_j) continue;  // drop oversized lists
        for (Candidate& c : merged.candidates) {
            c.cluster_id = static_cast<Index>(j);
            out.candidates.push_back(std::move(c));
        }
        while (out.alpha_effective.size() <= j) out.alpha_effective.push_back(0.0);
        out.alpha_effective[j] = alpha_j;
    }
    return out;
}

}  // namespace ldme
