#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace s3 {

enum class ColumnKind { continuous, discrete };

/// Complete, column-named numeric data. Discrete columns are stored as
/// standardized midranks so that every column enters the covariance pipeline
/// as a continuous surrogate.
struct Dataset {
    std::vector<std::string> names;
    std::vector<ColumnKind> kinds;
    Eigen::MatrixXd values;

    int rows() const { return static_cast<int>(values.rows()); }
    int cols() const { return static_cast<int>(values.cols()); }
    bool continuous(int column) const { return kinds[column] == ColumnKind::continuous; }

    Dataset select_rows(std::span<const int> rows) const;
    /// Column standard deviations (divisor n - 1).
    Eigen::VectorXd std_devs() const;
};

/// Validates and normalizes raw columns. Throws DegenerateData on non-finite
/// entries or zero-variance columns, ShapeMismatch on inconsistent sizes.
Dataset make_dataset(std::vector<std::string> names, std::vector<ColumnKind> kinds, Eigen::MatrixXd values);
Dataset make_dataset(std::vector<std::string> names, Eigen::MatrixXd values);

/// Midranks (ties share the mean rank), standardized to mean 0 and unit variance.
Eigen::VectorXd standardized_midranks(const Eigen::VectorXd& column);

struct Table {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

/// Numeric CSV with a header row. Throws DegenerateData on unparsable or
/// missing cells.
Table read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, std::span<const std::string> header, const Eigen::MatrixXd& values);

/// Sidecar JSON of the form {"columns": {"name": "discrete" | "continuous"}}.
/// Unlisted columns are continuous.
std::map<std::string, ColumnKind> read_column_kinds(const std::filesystem::path& path);

Dataset load_dataset(const std::filesystem::path& csv, const std::filesystem::path& sidecar = {});

}  // namespace s3
