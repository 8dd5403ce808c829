// ldme command-line driver: generate instances, run estimators, audit
// invariants, benchmark modes, and run the dense oracle suite.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "ldme/datagen.hpp"
#include "ldme/io.hpp"
#include "ldme/mmw.hpp"
#include "ldme/pipeline.hpp"

using namespace ldme;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitValidation = 2;

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

EstimateMode mode_from_string(const std::string& s) {
    if (s == "slow") return EstimateMode::Slow;
    if (s == "fast") return EstimateMode::Fast;
    if (s == "faster") return EstimateMode::Faster;
    throw Error("invalid-argument", "unknown mode: " + s);
}

// "far-clusters:9" / "mirror-mean" style outlier flag
void parse_outliers(const std::string& s, InstanceSpec& spec) {
    auto colon = s.find(':');
    spec.outlier_model = outlier_model_from_string(s.substr(0, colon));
    if (colon != std::string::npos)
        spec.cluster_count = static_cast<Index>(std::stoll(s.substr(colon + 1)));
}

void parse_inliers(const std::string& s, InstanceSpec& spec) {
    auto colon = s.find(':');
    spec.inlier_model = inlier_model_from_string(s.substr(0, colon));
    if (colon != std::string::npos) spec.inlier_sigma = std::stod(s.substr(colon + 1));
}

struct EstimateOutcome {
    EstimateList list;
    RunStats stats;
    io::ResultMetrics metrics;
};

EstimateOutcome run_estimate(const Dataset& data, const std::vector<Index>& slow_indices, double alpha,
                             double delta, EstimateMode mode, std::uint64_t seed, bool timing) {
    EstimateOutcome out;
    Rng rng(seed);
    double t0 = now_ms();
    out.list = list_decodable_mean_estimation(data, slow_indices, alpha, delta, mode, rng, &out.stats);
    double t1 = now_ms();
    out.metrics.list_size = out.list.size();
    out.metrics.iterations = out.stats.sift_iterations;
    out.metrics.spectrum_calls = out.stats.spectrum_calls;
    out.metrics.wall_ms = timing ? (t1 - t0) : 0.0;
    if (data.truth && out.list.size() > 0)
        out.metrics.min_error = eval_list(out.list, *data.truth).min_error;
    return out;
}

int cmd_gen(const InstanceSpec& spec_in, double delta, const std::string& out_dir) {
    InstanceSpec spec = spec_in;
    spec.validate();
    Rng rng(spec.seed);
    Dataset data = gen_instance(spec, rng);
    Rng srng = rng.child(1001);
    auto slow = reserve_slow_indices(data, spec.alpha, delta, srng);
    io::write_instance(out_dir, data, spec, slow);
    std::cout << "wrote " << out_dir << " (n=" << data.n() << ", d=" << data.d()
              << ", assumption=" << check_assumption(data) << ")\n";
    return kExitOk;
}

int cmd_estimate(const std::string& in_dir, const std::string& mode_str, double delta,
                 std::uint64_t seed, const std::string& out_path, bool timing) {
    auto [data, manifest] = io::read_instance(in_dir);
    EstimateMode mode = mode_from_string(mode_str);
    EstimateOutcome out = run_estimate(data, manifest.slow_indices, manifest.alpha, delta, mode, seed, timing);

    io::ResultConfig cfg;
    cfg.command = "estimate";
    cfg.mode = mode_str;
    cfg.alpha = manifest.alpha;
    cfg.delta = delta;
    cfg.seed = seed;
    cfg.input = in_dir;
    io::write_result(out_path, cfg, out.list, out.metrics);
    std::cout << "list_size=" << out.metrics.list_size << " min_error=" << out.metrics.min_error
              << " spectrum_calls=" << out.metrics.spectrum_calls << "\n";
    return kExitOk;
}

int cmd_audit(const std::string& in_dir, const std::string& mode_str, double delta, std::uint64_t seed,
              const std::string& out_path) {
    auto [data, manifest] = io::read_instance(in_dir);
    if (!data.truth) {
        std::cerr << "audit requires an instance with ground truth\n";
        return kExitValidation;
    }
    EstimateMode mode = mode_from_string(mode_str);

    RunStats stats;
    SiftTrace trace;
    Rng rng(seed);
    EstimateList list;
    if (mode == EstimateMode::Slow) {
        SiftConfig cfg = SiftConfig::make(manifest.alpha, delta);
        Rng srng = rng.child(1);
        list = run_sift(data, cfg, srng, &trace, &stats);
    } else {
        list = list_decodable_mean_estimation(data, manifest.slow_indices, manifest.alpha, delta, mode,
                                              rng, &stats);
    }

    const double n_t = static_cast<double>(data.n());
    const double radius = 4.0 * std::pow(n_t, 4) / (delta * delta);
    const long dkf_cap =
        static_cast<long>(std::ceil(425.0 * std::log(std::max(2.0, static_cast<double>(data.d())))));
    const long bicriteria_cap =
        static_cast<long>(std::ceil(5.0 * std::log(std::max(2.0, radius * radius / 100.0))));
    const long pgt_cap = static_cast<long>(std::floor(2.0 * std::log2(1.0 / manifest.alpha))) + 1;

    bool caps_ok = stats.max_dkf_steps <= dkf_cap && stats.max_bicriteria_passes <= bicriteria_cap &&
                   stats.max_pgt_calls <= pgt_cap;
    bool clean = stats.saturation_violations == 0 && stats.safety_violations == 0 && caps_ok;

    ordered_json j;
    j["config"]["mode"] = mode_str;
    j["config"]["alpha"] = manifest.alpha;
    j["config"]["delta"] = delta;
    j["config"]["seed"] = seed;
    j["config"]["input"] = in_dir;
    j["config"]["version"] = io::kLibraryVersion;
    j["violations"]["saturation"] = stats.saturation_violations;
    j["violations"]["safety"] = stats.safety_violations;
    j["warnings"]["monotonicity"] = stats.monotonicity_warnings;
    j["caps"]["dkf_steps"] = stats.max_dkf_steps;
    j["caps"]["dkf_cap"] = dkf_cap;
    j["caps"]["bicriteria_passes"] = stats.max_bicriteria_passes;
    j["caps"]["bicriteria_cap"] = bicriteria_cap;
    j["caps"]["pgt_calls"] = stats.max_pgt_calls;
    j["caps"]["pgt_cap"] = pgt_cap;
    j["iterations"] = static_cast<long>(trace.iterations.size());
    j["list_size"] = list.size();
    j["clean"] = clean;
    std::string text = j.dump(2) + "\n";
    if (out_path.empty())
        std::cout << text;
    else {
        std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
        f << text;
    }
    return clean ? kExitOk : kExitViolation;
}

struct BenchJob {
    Index d;
    double alpha;
    std::uint64_t seed;
    std::string mode;
};

int cmd_bench(const std::vector<Index>& ds, const std::vector<double>& alphas,
              const std::vector<std::string>& modes, int seeds, double nfactor, double delta,
              std::uint64_t base_seed, const std::string& out_path, bool timing) {
    std::vector<BenchJob> jobs;
    for (Index d : ds)
        for (double alpha : alphas)
            for (const std::string& mode : modes)
                for (int s = 0; s < seeds; ++s)
                    jobs.push_back({d, alpha, base_seed + static_cast<std::uint64_t>(s), mode});

    std::vector<ordered_json> rows(jobs.size());
    std::mutex next_mutex;
    size_t next = 0;
    std::exception_ptr first_error;

    auto run_job = [&](size_t j) {
        const BenchJob& job = jobs[j];
        InstanceSpec spec;
        spec.d = job.d;
        spec.n = static_cast<Index>(std::llround(nfactor * static_cast<double>(job.d) / job.alpha));
        spec.alpha = job.alpha;
        spec.seed = splitmix64(job.seed ^ (static_cast<std::uint64_t>(job.d) << 20) ^
                               static_cast<std::uint64_t>(job.alpha * 1e6));
        Rng grng(spec.seed);
        Dataset data = gen_instance(spec, grng);
        Rng srng = grng.child(1001);
        auto slow = reserve_slow_indices(data, spec.alpha, delta, srng);
        EstimateOutcome out =
            run_estimate(data, slow, job.alpha, delta, mode_from_string(job.mode), job.seed, timing);
        ordered_json row;
        row["d"] = job.d;
        row["alpha"] = job.alpha;
        row["mode"] = job.mode;
        row["seed"] = job.seed;
        row["min_error"] = out.metrics.min_error;
        row["list_size"] = out.metrics.list_size;
        row["spectrum_calls"] = out.metrics.spectrum_calls;
        row["wall_ms"] = out.metrics.wall_ms;
        rows[j] = std::move(row);
    };

    auto worker = [&] {
        for (;;) {
            size_t j;
            {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (next >= jobs.size() || first_error) return;
                j = next++;
            }
            try {
                run_job(j);
            } catch (...) {
                std::lock_guard<std::mutex> lock(next_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("LDME_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap > 0) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
    }
    hw = std::min<unsigned>(hw, static_cast<unsigned>(jobs.size()));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < hw; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    // aggregate per (d, alpha, mode); sequential, deterministic
    ordered_json agg = ordered_json::array();
    for (Index d : ds)
        for (double alpha : alphas)
            for (const std::string& mode : modes) {
                std::vector<double> errs, walls;
                std::vector<long> sizes, calls;
                for (const auto& row : rows)
                    if (row["d"].get<Index>() == d && row["alpha"].get<double>() == alpha &&
                        row["mode"].get<std::string>() == mode) {
                        errs.push_back(row["min_error"].get<double>());
                        walls.push_back(row["wall_ms"].get<double>());
                        sizes.push_back(row["list_size"].get<long>());
                        calls.push_back(row["spectrum_calls"].get<long>());
                    }
                if (errs.empty()) continue;
                std::sort(errs.begin(), errs.end());
                ordered_json a;
                a["d"] = d;
                a["alpha"] = alpha;
                a["mode"] = mode;
                a["runs"] = static_cast<long>(errs.size());
                a["median_min_error"] = errs[errs.size() / 2];
                a["max_min_error"] = errs.back();
                a["max_list_size"] = *std::max_element(sizes.begin(), sizes.end());
                a["total_spectrum_calls"] = std::accumulate(calls.begin(), calls.end(), 0L);
                a["total_wall_ms"] = std::accumulate(walls.begin(), walls.end(), 0.0);
                std::cout << "d=" << d << " alpha=" << alpha << " mode=" << mode
                          << " median_err=" << a["median_min_error"] << " max_err=" << a["max_min_error"]
                          << " max_list=" << a["max_list_size"]
                          << " spectrum_calls=" << a["total_spectrum_calls"] << "\n";
                agg.push_back(std::move(a));
            }

    ordered_json out;
    out["config"]["command"] = "bench";
    out["config"]["seeds"] = seeds;
    out["config"]["delta"] = delta;
    out["config"]["seed"] = base_seed;
    out["config"]["nfactor"] = nfactor;
    out["config"]["version"] = io::kLibraryVersion;
    out["aggregate"] = std::move(agg);
    out["runs"] = rows;
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::binary | std::ios::trunc);
        f << out.dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_oracle(std::uint64_t seed, int trials) {
    Rng rng(seed);
    int failures = 0;
    auto report = [&](const std::string& name, bool ok, const std::string& detail) {
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << (detail.empty() ? "" : " (" + detail + ")")
                  << "\n";
        if (!ok) ++failures;
    };

    {  // Fantope projection: hand values + approx-vs-exact trace-norm error
        MatrixXd s = VectorXd{{10.0, 0.0, 0.0}}.asDiagonal();
        MatrixXd y = exact_project(s, 2).y;
        bool hand = std::abs(y(0, 0) - 1.0) <= 1e-9 && std::abs(y(1, 1) - 0.5) <= 1e-9;
        int hits = 0;
        for (int t = 0; t < trials; ++t) {
            Rng r = rng.child(100 + t);
            MatrixXd q = r.normal_matrix(20, 20);
            MatrixXd psd = q * q.transpose() / 20.0;
            auto op = std::make_shared<DenseOp>(psd);
            Rng cr = rng.child(200 + t);
            DualCertificate cert = approx_project(op, psd.trace(), 1e-12, 3, 0.05, 0.05, cr);
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(cert.dense() - exact_project(psd, 3).y,
                                                       Eigen::EigenvaluesOnly);
            if (es.eigenvalues().cwiseAbs().sum() <= 3 * 0.05) ++hits;
        }
        report("fantope projection", hand && hits >= trials * 9 / 10,
               std::to_string(hits) + "/" + std::to_string(trials) + " within k*Delta");
    }
    {  // Power sandwich
        int hits = 0;
        for (int t = 0; t < trials; ++t) {
            Rng r = rng.child(300 + t);
            MatrixXd q = r.normal_matrix(30, 30);
            MatrixXd psd = q * q.transpose() / 30.0;
            DenseOp op(psd);
            Rng pr = rng.child(400 + t);
            EigenBasis basis = power_iterate(op, 5, 0.05, 0.01, psd.trace(), 1e-12, pr);
            if (verify_sandwich(psd, basis, 0.05).ok) ++hits;
        }
        report("power sandwich", hits >= trials * 9 / 10,
               std::to_string(hits) + "/" + std::to_string(trials));
    }
    {  // MMW regret audit
        int hits = 0;
        for (int t = 0; t < trials; ++t) {
            Rng r = rng.child(500 + t);
            MatrixXd q = r.normal_matrix(15, 15);
            MatrixXd g0 = q * q.transpose() / 15.0;
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(g0, Eigen::EigenvaluesOnly);
            double eta = 1.0 / (2.1 * es.eigenvalues().maxCoeff());
            std::vector<MatrixXd> gains;
            for (int s2 = 0; s2 < 8; ++s2) gains.push_back((1.0 - 0.05 * s2) * g0);
            Rng mr = rng.child(600 + t);
            MmwState state(15, 3, eta, 1.0 / 200.0, 0.05, 8, mr);
            for (const auto& g : gains) mmw_approx_step(state, std::make_shared<DenseOp>(g));
            if (regret_audit(state, gains).slack >= 0.0) ++hits;
        }
        report("mmw regret", hits == trials, std::to_string(hits) + "/" + std::to_string(trials));
    }
    return failures == 0 ? kExitOk : kExitViolation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"list-decodable mean estimation toolkit"};
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic instance");
    InstanceSpec spec;
    std::string outliers = "far-clusters", inliers = "gaussian:0.5", out_dir = "instance";
    double gen_delta = 0.05;
    gen->add_option("--d", spec.d, "dimension")->required();
    gen->add_option("--n", spec.n, "point count")->required();
    gen->add_option("--alpha", spec.alpha, "inlier fraction")->required();
    gen->add_option("--seed", spec.seed, "seed")->default_val(0);
    gen->add_option("--outliers", outliers, "outlier model, e.g. far-clusters:9");
    gen->add_option("--inliers", inliers, "inlier model, e.g. gaussian:0.5");
    gen->add_option("--radius", spec.outlier_radius, "outlier placement radius (0 = default)");
    gen->add_option("--spread", spec.outlier_spread, "outlier cluster spread");
    gen->add_option("--delta", gen_delta, "failure budget used for the slow-sample split");
    gen->add_option("--out", out_dir, "output directory");

    // estimate
    auto* est = app.add_subcommand("estimate", "run an estimator on an instance");
    std::string est_in, est_mode = "fast", est_out = "result.json";
    double est_delta = 0.05;
    std::uint64_t est_seed = 1;
    bool est_timing = false;
    est->add_option("--in", est_in, "instance directory")->required();
    est->add_option("--mode", est_mode, "slow | fast | faster");
    est->add_option("--delta", est_delta, "failure probability budget");
    est->add_option("--seed", est_seed, "estimator seed");
    est->add_option("--out", est_out, "result path");
    est->add_flag("--timing", est_timing, "record wall time (results no longer byte-reproducible)");

    // audit
    auto* aud = app.add_subcommand("audit", "instrumented run with invariant checks");
    std::string aud_in, aud_mode = "slow", aud_out;
    double aud_delta = 0.05;
    std::uint64_t aud_seed = 1;
    aud->add_option("--in", aud_in, "instance directory")->required();
    aud->add_option("--mode", aud_mode, "slow | fast | faster");
    aud->add_option("--delta", aud_delta, "failure probability budget");
    aud->add_option("--seed", aud_seed, "estimator seed");
    aud->add_option("--out", aud_out, "report path (stdout when empty)");

    // bench
    auto* ben = app.add_subcommand("bench", "seed-grid comparison of the modes");
    std::vector<Index> ben_d{10, 20};
    std::vector<double> ben_alpha{0.1, 0.2};
    std::vector<std::string> ben_modes{"slow", "fast", "faster"};
    int ben_seeds = 5;
    double ben_nfactor = 10.0, ben_delta = 0.05;
    std::uint64_t ben_seed = 1;
    std::string ben_out = "bench.json";
    bool ben_timing = false;
    ben->add_option("--d", ben_d, "dimensions")->delimiter(',');
    ben->add_option("--alpha", ben_alpha, "inlier fractions")->delimiter(',');
    ben->add_option("--modes", ben_modes, "modes to compare")->delimiter(',');
    ben->add_option("--seeds", ben_seeds, "seeds per cell");
    ben->add_option("--nfactor", ben_nfactor, "n = nfactor * d / alpha");
    ben->add_option("--delta", ben_delta, "failure probability budget");
    ben->add_option("--seed", ben_seed, "base seed");
    ben->add_option("--out", ben_out, "report path");
    ben->add_flag("--timing", ben_timing, "record wall times");

    // oracle
    auto* ora = app.add_subcommand("oracle", "dense-oracle verification suite");
    std::uint64_t ora_seed = 3;
    int ora_trials = 20;
    ora->add_option("--seed", ora_seed, "seed");
    ora->add_option("--trials", ora_trials, "trials per check");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (gen->parsed()) {
            parse_outliers(outliers, spec);
            parse_inliers(inliers, spec);
            return cmd_gen(spec, gen_delta, out_dir);
        }
        if (est->parsed()) return cmd_estimate(est_in, est_mode, est_delta, est_seed, est_out, est_timing);
        if (aud->parsed()) return cmd_audit(aud_in, aud_mode, aud_delta, aud_seed, aud_out);
        if (ben->parsed())
            return cmd_bench(ben_d, ben_alpha, ben_modes, ben_seeds, ben_nfactor, ben_delta, ben_seed,
                             ben_out, ben_timing);
        if (ora->parsed()) return cmd_oracle(ora_seed, ora_trials);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}
