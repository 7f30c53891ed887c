#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "s3/dataset.hpp"
#include "s3/graph.hpp"
#include "s3/pipeline.hpp"

namespace s3 {

/// Where each (variable, slice) lives in the wide data matrix; -1 marks a
/// variable that is not observed at that slice.
struct SliceLayout {
    std::vector<std::string> variables;
    int slices = 0;
    /// column[v][t]
    std::vector<std::vector<int>> column;

    int p() const { return static_cast<int>(variables.size()); }
    bool present(int v, int t) const { return column[v][t] >= 0; }
};

/// Layout with every variable at every slice, columns slice-major
/// (variable v of slice t at t * p + v).
SliceLayout full_layout(std::vector<std::string> variables, int slices);

/// Parses {"variables": [...], "slices": T, "column_pattern": "<var>_t<k>",
/// "presence": {var: [slices]}} against a CSV header. Slices are numbered
/// from 0. Throws ShapeMismatch when a listed column is missing.
SliceLayout read_layout(const std::filesystem::path& path, std::span<const std::string> header);

/// s subjects in rows, p * T columns.
struct LongitudinalDataset {
    SliceLayout layout;
    Eigen::MatrixXd values;
    /// Per variable.
    std::vector<ColumnKind> kinds;

    int subjects() const { return static_cast<int>(values.rows()); }
    int p() const { return layout.p(); }
    int slices() const { return layout.slices; }
    LongitudinalDataset select_subjects(std::span<const int> subjects) const;
};

/// Throws ShapeMismatch when the layout references missing or duplicate
/// columns, DegenerateData on non-finite values.
LongitudinalDataset make_longitudinal(SliceLayout layout, Eigen::MatrixXd values,
                                      std::vector<ColumnKind> kinds = {});

LongitudinalDataset load_longitudinal(const std::filesystem::path& csv, const std::filesystem::path& layout,
                                      const std::filesystem::path& sidecar = {});

/// Two-slice data: node order is every `_prev` node, then every `_cur` node.
/// A variable has a `_prev` node when observed at slices 0 .. T-2 and a
/// `_cur` node when observed at slices 1 .. T-1.
struct TransitionFrame {
    std::vector<std::string> names;
    std::vector<ColumnKind> kinds;
    Eigen::MatrixXd values;
    /// Variable index of each node, and whether it is a `_cur` node.
    std::vector<int> variable;
    std::vector<bool> current;

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
    Dataset to_dataset() const;
};

/// One row per subject and consecutive slice pair (t, t+1), subject-major.
/// Throws ShapeMismatch when T < 2.
TransitionFrame reshape(const LongitudinalDataset& data);

/// The s x p data of slice 0, restricted to variables observed there.
Dataset baseline_slice(const LongitudinalDataset& data);

/// A forbidden intra-slice arc between variable names. "*" matches every variable.
struct PriorArc {
    std::string from;
    std::string to;
};

/// {"forbidden": [["A", "B"], ...]}.
std::vector<PriorArc> read_prior(const std::filesystem::path& path);

/// Mask over the variables of one slice with the prior arcs forbidden.
ConstraintMask intra_mask(std::span<const std::string> variables, std::span<const PriorArc> prior);

/// Forbids every arc into a `_prev` node and the prior arcs among `_cur`
/// nodes. Names may carry a `_cur` suffix; a `_prev` suffix or an unknown
/// variable throws InvalidPrior.
ConstraintMask transition_mask(const TransitionFrame& frame, std::span<const PriorArc> prior);
/// Full-presence form over 2p nodes (prev 0..p-1, cur p..2p-1); prior arcs
/// are (from, to) variable indices.
ConstraintMask transition_mask(int p, std::span<const Arc> prior = {});

struct LongitudinalOptions {
    PipelineOptions pipeline;
    /// Subsample subjects, then reshape. False subsamples reshaped rows.
    bool subject_subsampling = true;
};

struct LongitudinalResult {
    PipelineResult baseline;
    PipelineResult transition;
};

PipelineResult s3l_baseline(const LongitudinalDataset& data, std::span<const PriorArc> prior,
                            const LongitudinalOptions& options);
PipelineResult s3l_transition(const LongitudinalDataset& data, std::span<const PriorArc> prior,
                              const LongitudinalOptions& options);
LongitudinalResult s3l_run(const LongitudinalDataset& data, std::span<const PriorArc> prior,
                           const LongitudinalOptions& options);

}  // namespace s3
