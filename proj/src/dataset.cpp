#include "s3/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "s3/error.hpp"

namespace s3 {

Dataset Dataset::select_rows(std::span<const int> rows) const {
    Dataset out{names, kinds, Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), values.cols())};
    for (std::size_t i = 0; i < rows.size(); ++i) out.values.row(static_cast<Eigen::Index>(i)) = values.row(rows[i]);
    return out;
}

Eigen::VectorXd Dataset::std_devs() const {
    const Eigen::RowVectorXd mean = values.colwise().mean();
    const Eigen::MatrixXd centered = values.rowwise() - mean;
    const double denom = std::max<Eigen::Index>(values.rows() - 1, 1);
    return (centered.colwise().squaredNorm() / denom).array().sqrt().transpose();
}

Eigen::VectorXd standardized_midranks(const Eigen::VectorXd& column) {
    const auto n = column.size();
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return column[a] < column[b]; });
    Eigen::VectorXd ranks(n);
    for (Eigen::Index i = 0; i < n;) {
        Eigen::Index j = i;
        while (j + 1 < n && column[order[j + 1]] == column[order[i]]) ++j;
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Eigen::Index k = i; k <= j; ++k) ranks[order[k]] = mid;
        i = j + 1;
    }
    const double mean = ranks.mean();
    const double sd = std::sqrt((ranks.array() - mean).square().sum() / std::max<Eigen::Index>(n - 1, 1));
    if (sd == 0.0) return Eigen::VectorXd::Zero(n);
    return (ranks.array() - mean) / sd;
}

Dataset make_dataset(std::vector<std::string> names, std::vector<ColumnKind> kinds, Eigen::MatrixXd values) {
    if (names.size() != static_cast<std::size_t>(values.cols()) || kinds.size() != names.size()) {
        throw ShapeMismatch("column names, kinds and values disagree in width");
    }
    if (!values.allFinite()) throw DegenerateData("data contains missing or non-finite values");
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
        if (kinds[c] == ColumnKind::discrete) values.col(c) = standardized_midranks(values.col(c));
        const double lo = values.col(c).minCoeff();
        const double hi = values.col(c).maxCoeff();
        if (values.rows() < 2 || lo == hi) {
            throw DegenerateData("column '" + names[c] + "' has zero variance");
        }
    }
    return Dataset{std::move(names), std::move(kinds), std::move(values)};
}

Dataset make_dataset(std::vector<std::string> names, Eigen::MatrixXd values) {
    std::vector<ColumnKind> kinds(names.size(), ColumnKind::continuous);
    return make_dataset(std::move(names), std::move(kinds), std::move(values));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r\"");
        const auto e = cell.find_last_not_of(" \t\r\"");
        cells.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

Table read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DegenerateData("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DegenerateData(path.string() + " is empty");
    Table table;
    table.header = split_line(line);
    std::vector<std::vector<double>> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_line(line);
        if (cells.size() != table.header.size()) {
            throw DegenerateData(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                 std::to_string(table.header.size()) + " cells");
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(c, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != c.size() || !std::isfinite(v)) {
                throw DegenerateData(path.string() + ":" + std::to_string(line_no) + ": missing or invalid value '" +
                                     c + "'");
            }
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < rows[r].size(); ++c) table.values(r, c) = rows[r][c];
    }
    return table;
}

void write_csv(const std::filesystem::path& path, std::span<const std::string> header, const Eigen::MatrixXd& values) {
    std::ofstream out(path);
    for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
    out << '\n';
    char buf[64];
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", values(r, c));
            out << (c ? "," : "") << buf;
        }
        out << '\n';
    }
}

std::map<std::string, ColumnKind> read_column_kinds(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DegenerateData("cannot open " + path.string());
    const auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw DegenerateData(path.string() + " is not a JSON object");
    std::map<std::string, ColumnKind> kinds;
    if (!doc.contains("columns")) return kinds;
    for (const auto& [name, kind] : doc.at("columns").items()) {
        const auto k = kind.get<std::string>();
        if (k == "discrete") {
            kinds[name] = ColumnKind::discrete;
        } else if (k == "continuous") {
            kinds[name] = ColumnKind::continuous;
        } else {
            throw DegenerateData("unknown column kind '" + k + "' for " + name);
        }
    }
    return kinds;
}

Dataset load_dataset(const std::filesystem::path& csv, const std::filesystem::path& sidecar) {
    auto table = read_csv(csv);
    std::vector<ColumnKind> kinds(table.header.size(), ColumnKind::continuous);
    if (!sidecar.empty()) {
        const auto declared = read_column_kinds(sidecar);
        for (std::size_t c = 0; c < table.header.size(); ++c) {
            if (auto it = declared.find(table.header[c]); it != declared.end()) kinds[c] = it->second;
        }
    }
    return make_dataset(std::move(table.header), std::move(kinds), std::move(table.values));
}

}  // namespace s3
