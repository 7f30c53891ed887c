#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "run_config.hpp"
#include "s3/dataset.hpp"
#include "s3/longitudinal.hpp"
#include "s3/pipeline.hpp"

namespace s3::cli {

/// Which model a run directory holds; decides how subsets are rebuilt.
enum class RunModel { cross_sectional, baseline, transition };

std::string to_string(RunModel model);
RunModel run_model_from_string(const std::string& name);

/// Writes manifest.json, pareto.json, stability CSVs and SVGs, mean_bic.csv,
/// graph.dot and effects.csv into `dir`.
void write_run(const std::filesystem::path& dir, const PipelineResult& result, const RunConfig& config,
               RunModel model, const std::string& command);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// A run directory reloaded with subset data and models rebuilt from the
/// original inputs.
struct LoadedRun {
    nlohmann::json manifest;
    RunModel model = RunModel::cross_sectional;
    std::vector<std::string> labels;
    ConstraintMask mask;
    Dataset full;
    std::vector<SubsetRun> runs;
};

std::vector<std::string> manifest_labels(const nlohmann::json& manifest);
ConstraintMask manifest_mask(const nlohmann::json& manifest, const std::vector<std::string>& labels);

LoadedRun load_run(const std::filesystem::path& dir);

/// Reads effects.csv back as (source, target) -> annotation value.
std::vector<EffectEstimate> read_effects_csv(const std::filesystem::path& path, const std::vector<std::string>& labels);

}  // namespace s3::cli
