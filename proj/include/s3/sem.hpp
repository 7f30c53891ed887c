#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "s3/dataset.hpp"
#include "s3/graph.hpp"

namespace s3 {

/// Sample covariance together with what every fit needs from it.
struct SampleMoments {
    Eigen::MatrixXd cov;
    double log_det = 0.0;
    std::size_t n = 0;

    int dim() const { return static_cast<int>(cov.rows()); }
};

/// Unbiased covariance (divisor n - 1) without any validation.
Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& values);

/// covariance_matrix, then throws DegenerateData when
/// n < p + 2, any variance is zero, or the condition number exceeds 1e12.
Eigen::MatrixXd sample_covariance(const Dataset& data);
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& values);

SampleMoments sample_moments(const Dataset& data);
/// Validates `cov` the same way sample_covariance does.
SampleMoments sample_moments(Eigen::MatrixXd cov, std::size_t n);

struct FitResult {
    double chi_square = 0.0;
    int complexity = 0;
    double bic = 0.0;
    /// coefficients[v] lists (parent, weight) in increasing parent order.
    std::vector<std::vector<std::pair<int, double>>> coefficients;
    std::vector<double> residual_variances;

    bool degenerate() const { return chi_square == std::numeric_limits<double>::infinity(); }
};

/// Maximum-likelihood fit of a linear-Gaussian SEM with the structure of
/// `dag`. The likelihood factorizes over nodes, so each node is regressed on
/// its parents using `cov` alone.
///
///   chi_square = (n - 1) * [ln|Sigma| + tr(S Sigma^-1) - ln|S| - p]
///   bic        = chi_square + k ln(n),  k = number of arcs
///
/// Throws DegenerateData when a parent submatrix is singular.
FitResult fit_dag_ml(const Dag& dag, const SampleMoments& moments);
FitResult fit_dag_ml(const Dag& dag, const Eigen::MatrixXd& cov, std::size_t n);

struct Score {
    double chi_square = 0.0;
    int complexity = 0;
    double bic = 0.0;
};

/// Objectives only, without building coefficient tables. Degenerate
/// structures score +inf rather than throwing.
Score score_dag(const Dag& dag, const SampleMoments& moments);

/// Sigma = (I - B)^-1 Psi (I - B)^-T.
Eigen::MatrixXd implied_covariance(const FitResult& fit);

/// ln|Sigma| + tr(S Sigma^-1) - ln|S| - p.
double ml_discrepancy(const Eigen::MatrixXd& sample, const Eigen::MatrixXd& implied);

/// Elementwise fit_dag_ml with degenerate members scored +inf. Duplicate
/// structures are fitted once. The OpenMP kernel fits distinct structures
/// in parallel; the serial version is the reference it is tested against.
std::vector<FitResult> score_population(std::span<const Dag> dags, const SampleMoments& moments);
std::vector<FitResult> score_population_serial(std::span<const Dag> dags, const SampleMoments& moments);

}  // namespace s3
