#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "s3/pipeline.hpp"

namespace s3::cli {

struct RunConfig {
    std::filesystem::path data;
    std::filesystem::path layout;
    std::filesystem::path prior;
    std::filesystem::path kinds;
    std::filesystem::path out = "s3_out";
    /// 0 picks the default: 50 cross-sectional, 100 longitudinal.
    int subsets = 0;
    int generations = 35;
    int population = 150;
    double p_crossover = 0.85;
    double p_mutation = 0.07;
    double pi_sel = 0.6;
    std::uint64_t seed = 1;
    /// 0 leaves the OpenMP default.
    int threads = 0;
    bool row_subsampling = false;
    std::size_t extension_cap = kDefaultExtensionCap;

    PipelineOptions pipeline(int default_subsets) const;
    nlohmann::json to_json() const;
};

/// Reads a JSON config; relative paths resolve against the file's directory.
/// Unknown keys and wrong types throw ConfigError.
RunConfig read_config(const std::filesystem::path& path);

/// Throws ConfigError on missing inputs or out-of-range parameters.
void validate(const RunConfig& config, bool needs_layout);

}  // namespace s3::cli
