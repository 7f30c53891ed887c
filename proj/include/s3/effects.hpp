#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "s3/dataset.hpp"
#include "s3/graph.hpp"
#include "s3/stability.hpp"

namespace s3 {

/// Coefficient of x in the regression of y on {x} and pa(x), computed from
/// `cov` alone; 0 when y is a parent of x. Throws DegenerateData when the
/// regressor covariance is singular.
double causal_effect(const Dag& dag, const Eigen::MatrixXd& cov, int x, int y);

/// causal_effect over every mask-respecting extension of `cpdag`, in
/// enumeration order.
std::vector<double> ida_multiset(const Cpdag& cpdag, const Eigen::MatrixXd& cov, const ConstraintMask& mask, int x,
                                 int y, std::size_t cap = kDefaultExtensionCap);

/// Middle value, or the mean of the two middle values. Throws EmptyMultiset.
double median(std::vector<double> values);

struct EffectEstimate {
    int source = 0;
    int target = 0;
    double median = 0.0;
    /// Absent when either endpoint is discrete.
    std::optional<double> standardized;
    std::size_t n_values = 0;
    int complexity_used = 0;
    /// True when no model had complexity pi_bic and the nearest populated
    /// complexity was used instead.
    bool fallback = false;
};

/// Concatenates ida_multiset over the complexity-pi_bic CPDAGs of every
/// subset (each on its own subset covariance, in subset order) for each
/// pair, and summarizes it. Standard deviations come from `full`.
std::vector<EffectEstimate> aggregate_effects(std::span<const SubsetRun> runs, int pi_bic, std::span<const Arc> pairs,
                                              const Dataset& full, const ConstraintMask& mask,
                                              std::size_t cap = kDefaultExtensionCap);

/// CSV with columns source,target,median,standardized,n_values.
std::string effects_csv(std::span<const EffectEstimate> effects, std::span<const std::string> labels);
void write_effects_csv(const std::filesystem::path& path, std::span<const EffectEstimate> effects,
                       std::span<const std::string> labels);

}  // namespace s3
