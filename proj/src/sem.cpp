#include "s3/sem.hpp"

#include <bit>
#include <cmath>
#include <map>

#include "s3/error.hpp"

namespace s3 {
namespace {

constexpr double kMaxCondition = 1e12;
constexpr double kInf = std::numeric_limits<double>::infinity();

using SmallMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxNodes, kMaxNodes>;
using SmallVector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxNodes, 1>;

void validate_covariance(const Eigen::MatrixXd& cov, std::size_t n) {
    const auto p = static_cast<std::size_t>(cov.rows());
    if (cov.rows() != cov.cols()) throw ShapeMismatch("covariance matrix is not square");
    if (p > static_cast<std::size_t>(kMaxNodes)) throw ShapeMismatch("too many variables");
    if (n < p + 2) {
        throw DegenerateData("need at least p + 2 = " + std::to_string(p + 2) + " rows, have " + std::to_string(n));
    }
    for (Eigen::Index i = 0; i < cov.rows(); ++i) {
        if (!(cov(i, i) > 0.0)) throw DegenerateData("variable " + std::to_string(i) + " has zero variance");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > kMaxCondition) throw DegenerateData("covariance matrix is numerically singular");
}

// Regression of `node` on `parents`: fills weights and returns the residual variance.
double regress(const Eigen::MatrixXd& cov, int node, NodeSet parents, SmallVector& weights, int* index) {
    const int k = std::popcount(parents);
    int m = 0;
    for (NodeSet s = parents; s; s &= s - 1) index[m++] = std::countr_zero(s);
    if (k == 0) {
        weights.resize(0);
        return cov(node, node);
    }
    SmallMatrix spp(k, k);
    SmallVector spy(k);
    for (int i = 0; i < k; ++i) {
        spy[i] = cov(index[i], node);
        for (int j = 0; j < k; ++j) spp(i, j) = cov(index[i], index[j]);
    }
    Eigen::LLT<SmallMatrix> llt(spp);
    if (llt.info() != Eigen::Success) throw DegenerateData("singular parent covariance");
    weights = llt.solve(spy);
    const double resid = cov(node, node) - spy.dot(weights);
    if (!(resid > 1e-12 * cov(node, node))) throw DegenerateData("residual variance vanishes");
    return resid;
}

double chi_square_from(double sum_log_resid, const SampleMoments& m) {
    const double chi = (static_cast<double>(m.n) - 1.0) * (sum_log_resid - m.log_det);
    return chi < 0.0 ? 0.0 : chi;
}

}  // namespace

Eigen::MatrixXd covariance_matrix(const Eigen::MatrixXd& values) {
    const Eigen::RowVectorXd mean = values.colwise().mean();
    const Eigen::MatrixXd centered = values.rowwise() - mean;
    return (centered.adjoint() * centered) / std::max<double>(static_cast<double>(values.rows()) - 1, 1);
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& values) {
    Eigen::MatrixXd cov = covariance_matrix(values);
    validate_covariance(cov, static_cast<std::size_t>(values.rows()));
    return cov;
}

Eigen::MatrixXd sample_covariance(const Dataset& data) { return sample_covariance(data.values); }

SampleMoments sample_moments(Eigen::MatrixXd cov, std::size_t n) {
    validate_covariance(cov, n);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw DegenerateData("covariance matrix is not positive definite");
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    return SampleMoments{std::move(cov), log_det, n};
}

SampleMoments sample_moments(const Dataset& data) {
    return sample_moments(sample_covariance(data), static_cast<std::size_t>(data.rows()));
}

FitResult fit_dag_ml(const Dag& dag, const SampleMoments& moments) {
    const int p = dag.size();
    if (p != moments.dim()) throw ShapeMismatch("DAG and covariance disagree on the number of variables");
    FitResult fit;
    fit.complexity = dag.arc_count();
    fit.coefficients.resize(p);
    fit.residual_variances.resize(p);
    SmallVector w;
    int index[kMaxNodes];
    double sum_log = 0.0;
    for (int v = 0; v < p; ++v) {
        const double resid = regress(moments.cov, v, dag.parents(v), w, index);
        fit.residual_variances[v] = resid;
        sum_log += std::log(resid);
        for (Eigen::Index i = 0; i < w.size(); ++i) fit.coefficients[v].emplace_back(index[i], w[i]);
    }
    // With least-squares weights tr(S Sigma^-1) = p exactly, and |I - B| = 1,
    // so the discrepancy reduces to sum(ln psi) - ln|S|.
    fit.chi_square = chi_square_from(sum_log, moments);
    fit.bic = fit.chi_square + fit.complexity * std::log(static_cast<double>(moments.n));
    return fit;
}

FitResult fit_dag_ml(const Dag& dag, const Eigen::MatrixXd& cov, std::size_t n) {
    return fit_dag_ml(dag, sample_moments(cov, n));
}

Score score_dag(const Dag& dag, const SampleMoments& moments) {
    Score s;
    s.complexity = dag.arc_count();
    SmallVector w;
    int index[kMaxNodes];
    double sum_log = 0.0;
    try {
        for (int v = 0; v < dag.size(); ++v) sum_log += std::log(regress(moments.cov, v, dag.parents(v), w, index));
    } catch (const DegenerateData&) {
        s.chi_square = kInf;
        s.bic = kInf;
        return s;
    }
    s.chi_square = chi_square_from(sum_log, moments);
    s.bic = s.chi_square + s.complexity * std::log(static_cast<double>(moments.n));
    return s;
}

Eigen::MatrixXd implied_covariance(const FitResult& fit) {
    const auto p = static_cast<Eigen::Index>(fit.residual_variances.size());
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index v = 0; v < p; ++v) {
        for (const auto& [parent, weight] : fit.coefficients[v]) b(v, parent) = weight;
    }
    const Eigen::MatrixXd ib = Eigen::MatrixXd::Identity(p, p) - b;
    const Eigen::MatrixXd inv = ib.inverse();
    const Eigen::VectorXd psi = Eigen::Map<const Eigen::VectorXd>(fit.residual_variances.data(), p);
    return inv * psi.asDiagonal() * inv.transpose();
}

double ml_discrepancy(const Eigen::MatrixXd& sample, const Eigen::MatrixXd& implied) {
    Eigen::LDLT<Eigen::MatrixXd> sig(implied);
    Eigen::LDLT<Eigen::MatrixXd> s(sample);
    const double log_sig = sig.vectorD().array().log().sum();
    const double log_s = s.vectorD().array().log().sum();
    const double trace = sig.solve(sample).trace();
    return log_sig + trace - log_s - static_cast<double>(sample.rows());
}

namespace {

FitResult degenerate_fit(const Dag& dag) {
    FitResult fit;
    fit.complexity = dag.arc_count();
    fit.chi_square = kInf;
    fit.bic = kInf;
    return fit;
}

FitResult fit_or_degenerate(const Dag& dag, const SampleMoments& moments) {
    try {
        return fit_dag_ml(dag, moments);
    } catch (const DegenerateData&) {
        return degenerate_fit(dag);
    }
}

// Index of the first occurrence of each distinct structure, and for every
// input the slot of its distinct representative.
struct Dedup {
    std::vector<std::size_t> unique;
    std::vector<std::size_t> slot;
};

Dedup dedup(std::span<const Dag> dags) {
    Dedup d;
    std::map<std::vector<NodeSet>, std::size_t> seen;
    d.slot.reserve(dags.size());
    for (std::size_t i = 0; i < dags.size(); ++i) {
        auto [it, inserted] = seen.emplace(dags[i].parent_sets(), d.unique.size());
        if (inserted) d.unique.push_back(i);
        d.slot.push_back(it->second);
    }
    return d;
}

}  // namespace

std::vector<FitResult> score_population_serial(std::span<const Dag> dags, const SampleMoments& moments) {
    const Dedup d = dedup(dags);
    std::vector<FitResult> distinct;
    distinct.reserve(d.unique.size());
    for (std::size_t u : d.unique) distinct.push_back(fit_or_degenerate(dags[u], moments));
    std::vector<FitResult> out;
    out.reserve(dags.size());
    for (std::size_t s : d.slot) out.push_back(distinct[s]);
    return out;
}

std::vector<FitResult> score_population(std::span<const Dag> dags, const SampleMoments& moments) {
    for (const Dag& g : dags) {
        if (g.size() != moments.dim()) throw ShapeMismatch("DAG and covariance disagree on the number of variables");
    }
    const Dedup d = dedup(dags);
    std::vector<FitResult> distinct(d.unique.size());
    const auto count = static_cast<std::ptrdiff_t>(d.unique.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::ptrdiff_t u = 0; u < count; ++u) distinct[u] = fit_or_degenerate(dags[d.unique[u]], moments);
    std::vector<FitResult> out;
    out.reserve(dags.size());
    for (std::size_t s : d.slot) out.push_back(distinct[s]);
    return out;
}

}  // namespace s3
