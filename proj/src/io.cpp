#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "ldme/io.hpp"

static_assert(std::endian::native == std::endian::little, "points.bin assumes a little-endian host");

namespace ldme::io {

using ordered_json = nlohmann::ordered_json;

const char* kLibraryVersion = "ldme 0.1.0";

namespace {
constexpr char kMagic[5] = {'L', 'D', 'M', 'E', '1'};
}

void write_points(const std::filesystem::path& path, const MatrixXd& points) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("io-error", "cannot open " + path.string() + " for writing");
    f.write(kMagic, sizeof(kMagic));
    std::uint64_t n = static_cast<std::uint64_t>(points.rows()), d = static_cast<std::uint64_t>(points.cols());
    f.write(reinterpret_cast<const char*>(&n), 8);
    f.write(reinterpret_cast<const char*>(&d), 8);
    for (Index i = 0; i < points.rows(); ++i)
        for (Index j = 0; j < points.cols(); ++j) {
            double v = points(i, j);
            f.write(reinterpret_cast<const char*>(&v), 8);
        }
    if (!f) throw Error("io-error", "short write to " + path.string());
}

MatrixXd read_points(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("io-error", "cannot open " + path.string());
    char magic[5];
    f.read(magic, 5);
    if (!f || std::memcmp(magic, kMagic, 5) != 0) throw Error("io-error", "bad magic in " + path.string());
    std::uint64_t n = 0, d = 0;
    f.read(reinterpret_cast<char*>(&n), 8);
    f.read(reinterpret_cast<char*>(&d), 8);
    if (!f || n == 0 || d == 0 || n > (1ULL << 32) || d > (1ULL << 24))
        throw Error("io-error", "implausible dimensions in " + path.string());
    MatrixXd m(static_cast<Index>(n), static_cast<Index>(d));
    for (std::uint64_t i = 0; i < n; ++i)
        for (std::uint64_t j = 0; j < d; ++j) {
            double v;
            f.read(reinterpret_cast<char*>(&v), 8);
            m(static_cast<Index>(i), static_cast<Index>(j)) = v;
        }
    if (!f) throw Error("io-error", "short read from " + path.string());
    return m;
}

namespace {

ordered_json vector_to_json(const VectorXd& v) {
    ordered_json a = ordered_json::array();
    for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

VectorXd vector_from_json(const ordered_json& a) {
    VectorXd v(static_cast<Index>(a.size()));
    for (size_t i = 0; i < a.size(); ++i) v[static_cast<Index>(i)] = a[i].get<double>();
    return v;
}

ordered_json spec_to_json(const InstanceSpec& s) {
    ordered_json j;
    j["d"] = s.d;
    j["n"] = s.n;
    j["alpha"] = s.alpha;
    j["seed"] = s.seed;
    j["inlier_model"] = to_string(s.inlier_model);
    j["inlier_sigma"] = s.inlier_sigma;
    j["outlier_model"] = to_string(s.outlier_model);
    j["cluster_count"] = s.cluster_count;
    j["outlier_radius"] = s.outlier_radius;
    j["outlier_spread"] = s.outlier_spread;
    return j;
}

InstanceSpec spec_from_json(const ordered_json& j) {
    InstanceSpec s;
    s.d = j.at("d").get<Index>();
    s.n = j.at("n").get<Index>();
    s.alpha = j.at("alpha").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.inlier_model = inlier_model_from_string(j.at("inlier_model").get<std::string>());
    s.inlier_sigma = j.at("inlier_sigma").get<double>();
    s.outlier_model = outlier_model_from_string(j.at("outlier_model").get<std::string>());
    s.cluster_count = j.at("cluster_count").get<Index>();
    s.outlier_radius = j.at("outlier_radius").get<double>();
    s.outlier_spread = j.at("outlier_spread").get<double>();
    return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("io-error", "cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw Error("io-error", "short write to " + path.string());
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
    ordered_json j;
    j["n"] = m.n;
    j["d"] = m.d;
    j["alpha"] = m.alpha;
    j["seed"] = m.seed;
    j["mu_star"] = vector_to_json(m.mu_star);
    j["inlier_indices"] = m.inlier_indices;
    j["slow_indices"] = m.slow_indices;
    j["spec"] = spec_to_json(m.spec);
    write_text(path, j.dump(2) + "\n");
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error("io-error", "cannot open " + path.string());
    ordered_json j = ordered_json::parse(f, nullptr, true);
    Manifest m;
    m.n = j.at("n").get<Index>();
    m.d = j.at("d").get<Index>();
    m.alpha = j.at("alpha").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.mu_star = vector_from_json(j.at("mu_star"));
    m.inlier_indices = j.at("inlier_indices").get<std::vector<Index>>();
    m.slow_indices = j.at("slow_indices").get<std::vector<Index>>();
    m.spec = spec_from_json(j.at("spec"));
    return m;
}

void write_instance(const std::filesystem::path& dir, const Dataset& data, const InstanceSpec& spec,
                    const std::vector<Index>& slow_indices) {
    std::filesystem::create_directories(dir);
    write_points(dir / "points.bin", data.points);
    Manifest m;
    m.n = data.n();
    m.d = data.d();
    m.alpha = spec.alpha;
    m.seed = spec.seed;
    if (data.truth) {
        m.mu_star = data.truth->mu_star;
        m.inlier_indices = data.truth->inlier_indices;
    }
    m.slow_indices = slow_indices;
    m.spec = spec;
    write_manifest(dir / "manifest.json", m);
}

std::pair<Dataset, Manifest> read_instance(const std::filesystem::path& dir) {
    Manifest m = read_manifest(dir / "manifest.json");
    Dataset data;
    data.points = read_points(dir / "points.bin");
    if (data.points.rows() != m.n || data.points.cols() != m.d)
        throw Error("io-error", "manifest disagrees with points.bin dimensions");
    if (!m.inlier_indices.empty()) {
        DatasetTruth t;
        t.mu_star = m.mu_star;
        t.inlier_indices = m.inlier_indices;
        t.alpha = m.alpha;
        data.truth = std::move(t);
    }
    return {std::move(data), std::move(m)};
}

std::string result_to_json(const ResultConfig& cfg, const EstimateList& list, const ResultMetrics& metrics) {
    ordered_json j;
    j["config"]["command"] = cfg.command;
    j["config"]["mode"] = cfg.mode;
    j["config"]["alpha"] = cfg.alpha;
    j["config"]["delta"] = cfg.delta;
    j["config"]["seed"] = cfg.seed;
    j["config"]["input"] = cfg.input;
    j["config"]["version"] = kLibraryVersion;
    ordered_json cands = ordered_json::array();
    for (const Candidate& c : list.candidates) cands.push_back(vector_to_json(c.mean));
    j["candidates"] = std::move(cands);
    j["metrics"]["min_error"] = metrics.min_error;
    j["metrics"]["list_size"] = metrics.list_size;
    j["metrics"]["iterations"] = metrics.iterations;
    j["metrics"]["spectrum_calls"] = metrics.spectrum_calls;
    j["metrics"]["wall_ms"] = metrics.wall_ms;
    return j.dump(2) + "\n";
}

void write_result(const std::filesystem::path& path, const ResultConfig& cfg, const EstimateList& list,
                  const ResultMetrics& metrics) {
    write_text(path, result_to_json(cfg, list, metrics));
}

}  // namespace ldme::io
