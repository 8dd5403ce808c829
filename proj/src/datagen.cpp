#include <algorithm>
#include <cmath>

#include "ldme/datagen.hpp"

namespace ldme {

void InstanceSpec::validate() const {
    if (d < 1 || n < 1) throw Error("invalid-argument", "instance requires d >= 1 and n >= 1");
    if (!(alpha > 0.0 && alpha <= 0.5)) throw Error("invalid-argument", "instance alpha outside (0, 1/2]");
    if (std::llround(alpha * static_cast<double>(n)) < 1)
        throw Error("invalid-argument", "alpha * n < 1: no inliers possible");
    if (mu_star.size() != 0 && mu_star.size() != d) throw Error("invalid-argument", "mu_star dimension");
}

Dataset gen_instance(const InstanceSpec& spec, Rng& rng) {
    spec.validate();
    const Index n = spec.n, d = spec.d;
    const auto n_in = static_cast<Index>(std::llround(spec.alpha * static_cast<double>(n)));
    const Index n_out = n - n_in;

    VectorXd mu = spec.mu_star.size() == d ? spec.mu_star : VectorXd::Zero(d);

    Dataset data;
    data.points.resize(n, d);

    Rng in_rng = rng.child(1);
    for (Index i = 0; i < n_in; ++i) {
        switch (spec.inlier_model) {
            case InlierModel::Gaussian:
                data.points.row(i) = (mu + spec.inlier_sigma * in_rng.normal_vector(d)).transpose();
                break;
            case InlierModel::PointMass:
                data.points.row(i) = mu.transpose();
                break;
            case InlierModel::BoundedSupport: {
                // uniform in the ball of radius inlier_sigma
                VectorXd dir = in_rng.normal_vector(d);
                dir.normalize();
                double r = spec.inlier_sigma * std::pow(in_rng.uniform(), 1.0 / static_cast<double>(d));
                data.points.row(i) = (mu + r * dir).transpose();
                break;
            }
        }
    }

    Rng out_rng = rng.child(2);
    const double radius = spec.outlier_radius > 0.0 ? spec.outlier_radius : 50.0 / std::sqrt(spec.alpha);
    switch (spec.outlier_model) {
        case OutlierModel::FarClusters: {
            Index count = spec.cluster_count > 0
                              ? spec.cluster_count
                              : std::max<Index>(1, static_cast<Index>(std::llround((1.0 - spec.alpha) / spec.alpha)));
            MatrixXd centers(count, d);
            for (Index c = 0; c < count; ++c) {
                VectorXd dir = out_rng.normal_vector(d);
                dir.normalize();
                centers.row(c) = (mu + radius * dir).transpose();
            }
            for (Index i = 0; i < n_out; ++i) {
                Index c = i % count;  // balanced clusters
                data.points.row(n_in + i) =
                    centers.row(c) + (spec.outlier_spread * out_rng.normal_vector(d)).transpose();
            }
            break;
        }
        case OutlierModel::MirrorMean: {
            VectorXd dir = out_rng.normal_vector(d);
            dir.normalize();
            VectorXd fake = mu + radius * dir;  // outliers mirror inlier-like draws about a fake center
            for (Index i = 0; i < n_out; ++i) {
                VectorXd x = mu + spec.inlier_sigma * out_rng.normal_vector(d);
                data.points.row(n_in + i) = (2.0 * fake - x).transpose();
            }
            break;
        }
        case OutlierModel::ColinearLine: {
            VectorXd dir = out_rng.normal_vector(d);
            dir.normalize();
            for (Index i = 0; i < n_out; ++i) {
                double t = radius * (2.0 * out_rng.uniform() - 1.0);
                data.points.row(n_in + i) =
                    (mu + t * dir + 0.1 * spec.outlier_spread * out_rng.normal_vector(d)).transpose();
            }
            break;
        }
        case OutlierModel::UniformBall: {
            for (Index i = 0; i < n_out; ++i) {
                VectorXd dir = out_rng.normal_vector(d);
                dir.normalize();
                double r = radius * std::pow(out_rng.uniform(), 1.0 / static_cast<double>(d));
                data.points.row(n_in + i) = (mu + r * dir).transpose();
            }
            break;
        }
    }

    DatasetTruth truth;
    truth.mu_star = mu;
    truth.alpha = spec.alpha;
    for (Index i = 0; i < n_in; ++i) truth.inlier_indices.push_back(i);
    data.truth = std::move(truth);

    // Rescale inlier deviations once if the empirical second-moment check
    // fails; desk-scale n cannot lean on asymptotic concentration.
    double val = check_assumption(data);
    if (val > 1.0) {
        double s = 1.0 / std::sqrt(val);
        for (Index i = 0; i < n_in; ++i)
            data.points.row(i) = (mu + s * (data.points.row(i).transpose() - mu)).transpose();
    }
    data.validate();
    return data;
}

double check_assumption(const Dataset& data) {
    if (!data.truth) throw Error("no-truth", "check_assumption requires ground truth");
    const auto& t = *data.truth;
    const Index d = data.d();
    if (d > kDenseOracleDim) throw Error("invalid-argument", "check_assumption is a dense oracle (d <= 512)");
    MatrixXd m = MatrixXd::Zero(d, d);
    for (Index i : t.inlier_indices) {
        VectorXd dev = data.points.row(i).transpose() - t.mu_star;
        m.noalias() += dev * dev.transpose();
    }
    m /= static_cast<double>(t.inlier_indices.size());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

ListMetrics eval_list(const EstimateList& list, const DatasetTruth& truth) {
    if (list.candidates.empty()) throw Error("empty-list", "eval_list on an empty list");
    ListMetrics m;
    m.list_size = list.size();
    m.min_error = kInf;
    for (const Candidate& c : list.candidates)
        m.min_error = std::min(m.min_error, (c.mean - truth.mu_star).norm());
    m.normalized_error = std::sqrt(truth.alpha) * m.min_error;
    return m;
}

InlierModel inlier_model_from_string(const std::string& s) {
    if (s == "gaussian") return InlierModel::Gaussian;
    if (s == "point-mass") return InlierModel::PointMass;
    if (s == "bounded-support") return InlierModel::BoundedSupport;
    throw Error("invalid-argument", "unknown inlier model: " + s);
}

OutlierModel outlier_model_from_string(const std::string& s) {
    if (s == "far-clusters") return OutlierModel::FarClusters;
    if (s == "mirror-mean") return OutlierModel::MirrorMean;
    if (s == "colinear-line") return OutlierModel::ColinearLine;
    if (s == "random-uniform-in-ball") return OutlierModel::UniformBall;
    throw Error("invalid-argument", "unknown outlier model: " + s);
}

std::string to_string(InlierModel m) {
    switch (m) {
        case InlierModel::Gaussian: return "gaussian";
        case InlierModel::PointMass: return "point-mass";
        case InlierModel::BoundedSupport: return "bounded-support";
    }
    return "?";
}

std::string to_string(OutlierModel m) {
    switch (m) {
        case OutlierModel::FarClusters: return "far-clusters";
        case OutlierModel::MirrorMean: return "mirror-mean";
        case OutlierModel::ColinearLine: return "colinear-line";
        case OutlierModel::UniformBall: return "random-uniform-in-ball";
    }
    return "?";
}

}  // namespace ldme
