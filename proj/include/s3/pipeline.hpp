#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "s3/dataset.hpp"
#include "s3/effects.hpp"
#include "s3/graph.hpp"
#include "s3/nsga2.hpp"
#include "s3/stability.hpp"

namespace s3 {

struct PipelineOptions {
    int n_subsets = 50;
    SearchParams search;
    double pi_sel = 0.6;
    std::size_t extension_cap = kDefaultExtensionCap;
    /// Run subset searches with the OpenMP kernel.
    bool parallel = true;
};

struct PipelineResult {
    std::vector<std::string> labels;
    ConstraintMask mask;
    std::vector<SubsetRun> runs;
    StabilityGraph edge;
    StabilityGraph path;
    std::map<int, double> mean_bic;
    Thresholds thresholds;
    std::vector<RelevantStructure> relevant;
    std::vector<EffectEstimate> effects;
    AnnotatedCausalGraph graph;
    std::vector<std::string> notes;
};

/// Searches, stability graphs, thresholds, relevant structures, the annotated
/// graph and effects for relevant causal paths and directed graph edges.
PipelineResult run_pipeline(const Dataset& full, std::span<const Subsample> subsets, const ConstraintMask& mask,
                            const PipelineOptions& options);

/// Cross-sectional run: row subsets drawn from a stream derived from the
/// search seed, then run_pipeline.
PipelineResult s3c_run(const Dataset& data, const ConstraintMask& mask, const PipelineOptions& options);

/// Stream index for subsampling, kept apart from per-subset search seeds.
inline constexpr std::uint64_t kSubsampleStream = 0xffffffff00000001ULL;

}  // namespace s3
