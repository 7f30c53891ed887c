#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "s3/graph.hpp"
#include "s3/longitudinal.hpp"
#include "s3/rng.hpp"
#include "s3/stability.hpp"

namespace s3 {

/// Arcs of a longitudinal SEM. Baseline arcs index the p variables of slice
/// 0; transition arcs index 2p nodes, `_prev` nodes 0..p-1 then `_cur` nodes
/// p..2p-1.
struct LongitudinalStructure {
    std::vector<std::string> variables;
    int slices = 0;
    std::vector<Arc> baseline_arcs;
    std::vector<Arc> transition_arcs;

    int p() const { return static_cast<int>(variables.size()); }
};

struct GroundTruthModel {
    LongitudinalStructure structure;
    std::map<Arc, double> baseline_weights;
    std::map<Arc, double> transition_weights;
    /// Per variable.
    std::vector<double> noise_sd;

    Dag baseline_dag() const;
    Dag transition_dag() const;
};

/// Four variables X1..X4 over three slices. Within a slice X2 -> X1,
/// X3 -> X1 and X1 -> X4; across slices every variable drives its own next
/// value and X4 drives the next X2.
LongitudinalStructure reference_structure();

/// Weights drawn from +-Uniform[min_weight, max_weight]; unit noise.
GroundTruthModel random_parameterization(const LongitudinalStructure& structure, Rng& rng,
                                         double min_weight = 0.3, double max_weight = 1.0);

/// Slice 0 from the baseline SEM, every later slice from the transition SEM
/// given the previous slice. Columns are slice-major (see full_layout).
LongitudinalDataset generate_data(const GroundTruthModel& model, int subjects, Rng& rng);

/// Ground-truth equivalence classes under the given masks.
std::pair<Cpdag, Cpdag> true_cpdag(const GroundTruthModel& model, const ConstraintMask& baseline_mask,
                                   const ConstraintMask& transition_mask);

/// Forbidden intra-slice arcs as transition-mask prior indices.
ConstraintMask reference_transition_mask(const LongitudinalStructure& structure, std::span<const Arc> prior = {});

struct RocCurve {
    /// (fpr, tpr), sorted, from (0, 0) to (1, 1).
    std::vector<std::pair<double, double>> points;
    double auc = 0.0;
};

/// Sweeps pi_sel over 0, 0.01, ..., 1 with pi_bic fixed and classifies every
/// structure by the relevant-structure rule against the truth: an edge is
/// positive when the pair is adjacent, a causal path when a directed path
/// exists. With `admissible`, only structures possible under that mask are
/// scored. AUC is the trapezoid area.
RocCurve roc_and_auc(const StabilityGraph& sg, const Cpdag& truth, int pi_bic,
                     const ConstraintMask* admissible = nullptr);

/// Pointwise mean of same-shaped stability graphs. Throws ShapeMismatch.
StabilityGraph averaging_scheme(std::span<const StabilityGraph> graphs);

/// Ground truth as JSON text: variables, slices, weighted arcs, noise.
std::string model_to_json(const GroundTruthModel& model);
GroundTruthModel model_from_json(const std::string& text);

}  // namespace s3
