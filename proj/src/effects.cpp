#include "s3/effects.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "s3/error.hpp"

namespace s3 {

double causal_effect(const Dag& dag, const Eigen::MatrixXd& cov, int x, int y) {
    const int n = dag.size();
    if (x == y || x < 0 || y < 0 || x >= n || y >= n) throw std::invalid_argument("bad effect endpoints");
    if (cov.rows() != n || cov.cols() != n) throw ShapeMismatch("covariance does not match the graph");
    const NodeSet pa = dag.parents(x);
    if ((pa >> y) & 1U) return 0.0;

    std::vector<int> regressors{x};
    for (int v = 0; v < n; ++v) {
        if ((pa >> v) & 1U) regressors.push_back(v);
    }
    const auto k = static_cast<Eigen::Index>(regressors.size());
    Eigen::MatrixXd sxx(k, k);
    Eigen::VectorXd sxy(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        sxy(i) = cov(regressors[i], y);
        for (Eigen::Index j = 0; j < k; ++j) sxx(i, j) = cov(regressors[i], regressors[j]);
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sxx);
    if (llt.info() != Eigen::Success) throw DegenerateData("singular regressor covariance");
    const Eigen::VectorXd beta = llt.solve(sxy);
    if (!beta.allFinite()) throw DegenerateData("singular regressor covariance");
    return beta(0);
}

std::vector<double> ida_multiset(const Cpdag& cpdag, const Eigen::MatrixXd& cov, const ConstraintMask& mask, int x,
                                 int y, std::size_t cap) {
    std::vector<double> out;
    for (const Dag& dag : enumerate_extensions(cpdag, mask, cap)) out.push_back(causal_effect(dag, cov, x, y));
    return out;
}

double median(std::vector<double> values) {
    if (values.empty()) throw EmptyMultiset("no effect values to summarize");
    const std::size_t mid = values.size() / 2;
    std::nth_element(values.begin(), values.begin() + mid, values.end());
    const double upper = values[mid];
    if (values.size() % 2 == 1) return upper;
    const double lower = *std::max_element(values.begin(), values.begin() + mid);
    return 0.5 * (lower + upper);
}

namespace {

int choose_complexity(std::span<const SubsetRun> runs, int pi_bic) {
    std::vector<int> populated;
    for (const auto& run : runs) {
        if (!run.ok) continue;
        for (const auto& m : run.models) populated.push_back(m.dag.arc_count());
    }
    if (populated.empty()) throw EmptyMultiset("no subset produced any model");
    return *std::min_element(populated.begin(), populated.end(), [pi_bic](int a, int b) {
        const int da = std::abs(a - pi_bic);
        const int db = std::abs(b - pi_bic);
        return da != db ? da < db : a < b;
    });
}

}  // namespace

std::vector<EffectEstimate> aggregate_effects(std::span<const SubsetRun> runs, int pi_bic, std::span<const Arc> pairs,
                                              const Dataset& full, const ConstraintMask& mask, std::size_t cap) {
    if (pairs.empty()) return {};
    if (full.cols() != mask.size()) throw ShapeMismatch("dataset and mask disagree on the number of variables");
    const int complexity = choose_complexity(runs, pi_bic);

    // values[subset][pair]
    std::vector<std::vector<std::vector<double>>> values(runs.size(),
                                                         std::vector<std::vector<double>>(pairs.size()));
    std::exception_ptr failure;
    const auto count = static_cast<std::ptrdiff_t>(runs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto& run = runs[i];
        if (!run.ok) continue;
        try {
            for (const auto& model : run.models) {
                if (model.dag.arc_count() != complexity) continue;
                for (const Dag& dag : enumerate_extensions(model.cpdag, mask, cap)) {
                    for (std::size_t k = 0; k < pairs.size(); ++k) {
                        values[i][k].push_back(causal_effect(dag, run.moments.cov, pairs[k].from, pairs[k].to));
                    }
                }
            }
        } catch (...) {
#pragma omp critical(s3_aggregate_effects)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    const Eigen::VectorXd sd = full.std_devs();
    std::vector<EffectEstimate> out;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        std::vector<double> all;
        for (const auto& per_subset : values) all.insert(all.end(), per_subset[k].begin(), per_subset[k].end());
        EffectEstimate e;
        e.source = pairs[k].from;
        e.target = pairs[k].to;
        e.n_values = all.size();
        e.median = median(std::move(all));
        e.complexity_used = complexity;
        e.fallback = complexity != pi_bic;
        if (full.continuous(e.source) && full.continuous(e.target)) {
            e.standardized = e.median * sd(e.source) / sd(e.target);
        }
        out.push_back(e);
    }
    return out;
}

std::string effects_csv(std::span<const EffectEstimate> effects, std::span<const std::string> labels) {
    auto label = [&](int v) { return v < static_cast<int>(labels.size()) ? labels[v] : "X" + std::to_string(v); };
    auto number = [](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    std::ostringstream out;
    out << "source,target,median,standardized,n_values\n";
    for (const auto& e : effects) {
        out << label(e.source) << ',' << label(e.target) << ',' << number(e.median) << ','
            << (e.standardized ? number(*e.standardized) : "NA") << ',' << e.n_values << '\n';
    }
    return out.str();
}

void write_effects_csv(const std::filesystem::path& path, std::span<const EffectEstimate> effects,
                       std::span<const std::string> labels) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << effects_csv(effects, labels);
}

}  // namespace s3
