// ldme: instance and result file formats.
//
// points.bin: magic "LDME1", little-endian u64 n, u64 d, then n*d
// little-endian f64 row-major. manifest.json carries the truth block and the
// slow-sample split; result.json embeds the config, candidates and metrics.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ldme/datagen.hpp"
#include "ldme/estimates.hpp"

namespace ldme::io {

struct Manifest {
    Index n = 0;
    Index d = 0;
    double alpha = 0.0;
    std::uint64_t seed = 0;
    VectorXd mu_star;
    std::vector<Index> inlier_indices;
    std::vector<Index> slow_indices;
    InstanceSpec spec;
};

void write_points(const std::filesystem::path& path, const MatrixXd& points);
MatrixXd read_points(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

/// Instance directory = points.bin + manifest.json.
void write_instance(const std::filesystem::path& dir, const Dataset& data, const InstanceSpec& spec,
                    const std::vector<Index>& slow_indices);
std::pair<Dataset, Manifest> read_instance(const std::filesystem::path& dir);

struct ResultMetrics {
    double min_error = -1.0;  // -1 when the instance carries no ground truth
    Index list_size = 0;
    long iterations = 0;
    long spectrum_calls = 0;
    double wall_ms = 0.0;  // 0 unless timing was requested (results stay byte-identical)
};

/// Serialized verbatim into every result file.
struct ResultConfig {
    std::string command;
    std::string mode;
    double alpha = 0.0;
    double delta = 0.0;
    std::uint64_t seed = 0;
    std::string input;
};

std::string result_to_json(const ResultConfig& cfg, const EstimateList& list, const ResultMetrics& metrics);
void write_result(const std::filesystem::path& path, const ResultConfig& cfg, const EstimateList& list,
                  const ResultMetrics& metrics);

extern const char* kLibraryVersion;

}  // namespace ldme::io
