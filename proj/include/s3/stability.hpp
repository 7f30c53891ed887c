#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "s3/dataset.hpp"
#include "s3/graph.hpp"
#include "s3/nsga2.hpp"
#include "s3/rng.hpp"
#include "s3/sem.hpp"

namespace s3 {

/// One data subset: the sampled unit indices (rows, or subjects for
/// longitudinal data) and the data the search is scored on.
struct Subsample {
    std::vector<int> units;
    Dataset data;
};

/// floor(n / 2) distinct indices out of [0, n), ascending, for each subset.
std::vector<std::vector<int>> subsample_indices(int n, int n_subsets, Rng& rng);

/// Row subsets of size floor(n / 2) drawn without replacement. Throws
/// DegenerateData when floor(n / 2) < p + 2.
std::vector<Subsample> subsample(const Dataset& data, int n_subsets, Rng& rng);

struct SubsetRun {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    std::vector<int> units;
    bool ok = false;
    std::string error;
    SampleMoments moments;
    ParetoSet models;
};

/// One NSGA-II search per subset, seeded with derive_seed(params.seed, i).
/// Subsets whose data cannot be scored are recorded as failed; more than
/// 10% failures (or no subsets at all) throws SearchFailure. The OpenMP
/// kernel runs subsets in parallel; results never depend on thread count.
std::vector<SubsetRun> run_searches(std::span<const Subsample> subsets, const ConstraintMask& mask,
                                    const SearchParams& params);
std::vector<SubsetRun> run_searches_serial(std::span<const Subsample> subsets, const ConstraintMask& mask,
                                           const SearchParams& params);

enum class StructureKind { edge, causal_path };

std::string to_string(StructureKind kind);

/// Selection probability curves indexed by complexity 0 .. n(n-1)/2. Edge
/// keys are unordered pairs stored as (a, b) with a < b; causal-path keys
/// are ordered pairs.
struct StabilityGraph {
    StructureKind kind = StructureKind::edge;
    int n_nodes = 0;
    std::map<Arc, std::vector<double>> curves;
    /// Complexity levels with no model; their probabilities are interpolated.
    std::vector<bool> imputed;
    std::vector<int> model_counts;

    int max_complexity() const { return n_nodes * (n_nodes - 1) / 2; }
    double probability(const Arc& key, int complexity) const { return curves.at(key).at(complexity); }
};

/// Fraction of CPDAGs at each complexity with any edge between a pair.
StabilityGraph edge_stability(std::span<const SubsetRun> runs, int n_nodes);
/// Fraction of CPDAGs at each complexity with a directed path a ~> b.
StabilityGraph causal_path_stability(std::span<const SubsetRun> runs, int n_nodes);

/// Linear interpolation between populated neighbours; levels outside the
/// populated range copy the nearest populated level.
void fill_gaps(std::vector<double>& curve, const std::vector<bool>& populated);

/// Mean BIC of the models at each populated complexity.
std::map<int, double> mean_bic_by_complexity(std::span<const SubsetRun> runs);
/// Smallest complexity attaining the minimal mean BIC.
int argmin_mean_bic(const std::map<int, double>& means);
int compute_pi_bic(std::span<const SubsetRun> runs);

struct Thresholds {
    double pi_sel = 0.6;
    int pi_bic = 0;
};

struct RelevantStructure {
    Arc key;
    double reliability = 0.0;
    StructureKind kind = StructureKind::edge;
};

/// Highest probability over complexities 0 .. pi_bic.
double reliability(const std::vector<double>& curve, int pi_bic);

/// Structures whose reliability is positive and at least pi_sel, in key order,
/// edges first.
std::vector<RelevantStructure> relevant_structures(const StabilityGraph& edges, const StabilityGraph& paths,
                                                   const Thresholds& thresholds);

struct AnnotatedEdge {
    int from = 0;
    int to = 0;
    bool directed = false;
    double reliability = 0.0;
    std::optional<double> effect;
};

struct AnnotatedCausalGraph {
    int n_nodes = 0;
    std::vector<AnnotatedEdge> edges;
    /// Skipped orientations and orientation conflicts.
    std::vector<std::string> notes;

    std::vector<NodeSet> directed_parent_sets() const;
};

/// Visualization procedure: connect relevant edges, orient those fixed by the
/// mask, then orient along relevant causal paths in order of descending
/// reliability, skipping orientations that would close a directed cycle.
AnnotatedCausalGraph assemble_graph(std::span<const RelevantStructure> relevant_edges,
                                    std::span<const RelevantStructure> relevant_paths, const ConstraintMask& mask);

std::string to_dot(const AnnotatedCausalGraph& graph, std::span<const std::string> labels);

/// Long-form CSV: kind,from,to,complexity,probability,imputed.
void write_stability_csv(const std::filesystem::path& path, const StabilityGraph& sg,
                         std::span<const std::string> labels);
StabilityGraph read_stability_csv(const std::filesystem::path& path, std::span<const std::string> labels);

/// Line chart of every curve with the relevant region shaded.
std::string stability_svg(const StabilityGraph& sg, std::span<const std::string> labels, const Thresholds& thresholds);

/// Shortest decimal with at most two fractional digits, e.g. "1", "0.71".
std::string format_short(double value);

}  // namespace s3
