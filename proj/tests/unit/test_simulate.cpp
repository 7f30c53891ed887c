#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "s3/error.hpp"
#include "s3/simulate.hpp"

using namespace s3;

namespace {

// Covariance of the stacked slices from the joint linear SEM x = Bx + e.
Eigen::MatrixXd analytic_covariance(const GroundTruthModel& m) {
    const int p = m.structure.p();
    const int t = m.structure.slices;
    const int n = p * t;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
    for (const auto& [a, w] : m.baseline_weights) b(a.to, a.from) = w;
    for (int s = 1; s < t; ++s) {
        for (const auto& [a, w] : m.transition_weights) {
            const int from = a.from < p ? (s - 1) * p + a.from : s * p + (a.from - p);
            const int to = s * p + (a.to - p);
            b(to, from) = w;
        }
    }
    Eigen::VectorXd noise(n);
    for (int i = 0; i < n; ++i) noise(i) = m.noise_sd[i % p] * m.noise_sd[i % p];
    const Eigen::MatrixXd inv = (Eigen::MatrixXd::Identity(n, n) - b).inverse();
    return inv * noise.asDiagonal() * inv.transpose();
}

// Orientations of the truth skeleton that keep its colliders and the mask.
oracle::UnionGraph admissible_union(const Dag& truth, const ConstraintMask& mask) {
    const auto key = oracle::class_key(truth);
    const std::vector<std::pair<int, int>> edges(key.skeleton.begin(), key.skeleton.end());
    std::vector<Dag> members;
    for (unsigned code = 0; code < (1U << edges.size()); ++code) {
        oracle::Matrix m(truth.size(), std::vector<int>(truth.size(), 0));
        for (std::size_t i = 0; i < edges.size(); ++i) {
            const auto [a, b] = edges[i];
            ((code >> i) & 1U) ? m[b][a] = 1 : m[a][b] = 1;
        }
        if (!oracle::acyclic(m)) continue;
        const Dag g = oracle::to_dag(m);
        if (oracle::respects(g, mask) && oracle::class_key(g) == key) members.push_back(g);
    }
    return oracle::union_orientation(members);
}

StabilityGraph graph_with(StructureKind kind, int n, std::map<Arc, std::vector<double>> curves) {
    StabilityGraph sg;
    sg.kind = kind;
    sg.n_nodes = n;
    sg.curves = std::move(curves);
    sg.imputed.assign(n * (n - 1) / 2 + 1, false);
    sg.model_counts.assign(n * (n - 1) / 2 + 1, 1);
    return sg;
}

}  // namespace

TEST(ReferenceStructure, Shape) {
    const auto s = reference_structure();
    EXPECT_EQ(s.p(), 4);
    EXPECT_EQ(s.slices, 3);
    EXPECT_EQ(s.baseline_arcs.size(), 3U);
    for (const auto& a : s.transition_arcs) EXPECT_GE(a.to, 4);
}

TEST(RandomParameterization, WeightRange) {
    Rng rng(1);
    const auto s = reference_structure();
    int negative = 0;
    int total = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto m = random_parameterization(s, rng);
        for (const auto* w : {&m.baseline_weights, &m.transition_weights}) {
            for (const auto& [a, v] : *w) {
                EXPECT_GE(std::abs(v), 0.3);
                EXPECT_LE(std::abs(v), 1.0);
                negative += v < 0;
                ++total;
            }
        }
        for (double sd : m.noise_sd) EXPECT_EQ(sd, 1.0);
    }
    EXPECT_GE(total, 10000);
    EXPECT_NEAR(negative / static_cast<double>(total), 0.5, 0.03);

    Rng a(2);
    Rng b(2);
    EXPECT_EQ(random_parameterization(s, a).transition_weights, random_parameterization(s, b).transition_weights);
    LongitudinalStructure empty{{"A", "B"}, 2, {}, {}};
    EXPECT_TRUE(random_parameterization(empty, a).transition_weights.empty());
}

TEST(GenerateData, ShapeAndDeterminism) {
    Rng rng(3);
    const auto m = random_parameterization(reference_structure(), rng);
    Rng a(4);
    Rng b(4);
    const auto d = generate_data(m, 400, a);
    EXPECT_EQ(d.values.rows(), 400);
    EXPECT_EQ(d.values.cols(), 12);
    EXPECT_EQ(d.values, generate_data(m, 400, b).values);
}

TEST(GenerateData, ZeroWeightsGiveIndependentNoise) {
    Rng rng(5);
    auto m = random_parameterization(reference_structure(), rng);
    for (auto& [a, w] : m.baseline_weights) w = 0.0;
    for (auto& [a, w] : m.transition_weights) w = 0.0;
    const auto d = generate_data(m, 100000, rng);
    const Eigen::MatrixXd c = covariance_matrix(d.values);
    EXPECT_LT((c - Eigen::MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff(), 0.05);
}

TEST(GenerateData, CovarianceMatchesImpliedCovariance) {
    Rng rng(6);
    const auto m = random_parameterization(reference_structure(), rng);
    const auto d = generate_data(m, 100000, rng);
    const Eigen::MatrixXd c = covariance_matrix(d.values);
    const Eigen::MatrixXd expected = analytic_covariance(m);
    for (int i = 0; i < 12; ++i) {
        for (int j = 0; j < 12; ++j) EXPECT_LT(std::abs(c(i, j) - expected(i, j)), 0.05) << i << "," << j;
    }
}

TEST(TrueCpdag, MatchesEquivalenceOracle) {
    Rng rng(7);
    const auto m = random_parameterization(reference_structure(), rng);
    const std::vector<Arc> prior{{0, 1}, {0, 2}};
    for (const auto& pr : {std::vector<Arc>{}, prior}) {
        const ConstraintMask base = ConstraintMask(4, pr);
        const ConstraintMask trans = reference_transition_mask(m.structure, pr);
        const auto [b, t] = true_cpdag(m, base, trans);
        EXPECT_EQ(oracle::as_union(b), admissible_union(m.baseline_dag(), base));
        EXPECT_EQ(oracle::as_union(t), admissible_union(m.transition_dag(), trans));
        for (const auto& a : m.transition_dag().arcs()) {
            if (a.from < 4) EXPECT_TRUE(t.has_directed(a.from, a.to));
        }
    }
    LongitudinalStructure empty{{"A", "B"}, 2, {}, {}};
    Rng r(8);
    const auto e = random_parameterization(empty, r);
    const auto [b, t] = true_cpdag(e, ConstraintMask(2), transition_mask(2));
    EXPECT_TRUE(b.undirected_edges().empty() && b.directed_edges().empty());
    EXPECT_TRUE(t.undirected_edges().empty() && t.directed_edges().empty());
}

TEST(Roc, PerfectAndUninformative) {
    const Cpdag truth = dag_to_cpdag(Dag(3, std::vector<Arc>{{0, 1}}), ConstraintMask(3, std::vector<Arc>{{1, 0}}));
    auto perfect = graph_with(StructureKind::edge, 3,
                              {{{0, 1}, {1, 1, 1, 1}}, {{0, 2}, {0, 0, 0, 0}}, {{1, 2}, {0, 0.1, 0.2, 0.3}}});
    auto r = roc_and_auc(perfect, truth, 1);
    EXPECT_DOUBLE_EQ(r.auc, 1.0);
    EXPECT_EQ(r.points.front(), (std::pair<double, double>{0.0, 0.0}));
    EXPECT_EQ(r.points.back(), (std::pair<double, double>{1.0, 1.0}));

    auto flat = graph_with(StructureKind::edge, 3,
                           {{{0, 1}, {0.4, 0.4, 0.4, 0.4}}, {{0, 2}, {0.4, 0.4, 0.4, 0.4}}, {{1, 2}, {0.4, 0.4, 0.4, 0.4}}});
    EXPECT_DOUBLE_EQ(roc_and_auc(flat, truth, 2).auc, 0.5);

    std::map<Arc, std::vector<double>> paths;
    for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) {
            if (a != b) paths[{a, b}] = std::vector<double>(4, (a == 0 && b == 1) ? 0.9 : 0.2);
        }
    }
    EXPECT_DOUBLE_EQ(roc_and_auc(graph_with(StructureKind::causal_path, 3, paths), truth, 0).auc, 1.0);
}

TEST(Roc, PropertiesOnRandomCurves) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 4;
        const Dag g = oracle::random_dag(n, 0.4, rng);
        const Cpdag truth = dag_to_cpdag(g, ConstraintMask(n));
        std::map<Arc, std::vector<double>> edges;
        std::map<Arc, std::vector<double>> relabeled;
        const std::vector<int> perm{2, 0, 3, 1};
        std::vector<Arc> moved;
        for (const auto& a : g.arcs()) moved.push_back({perm[a.from], perm[a.to]});
        for (int a = 0; a < n; ++a) {
            for (int b = a + 1; b < n; ++b) {
                std::vector<double> curve(7);
                for (double& v : curve) v = std::round(u(rng) * 100) / 100;
                edges[{a, b}] = curve;
                relabeled[{std::min(perm[a], perm[b]), std::max(perm[a], perm[b])}] = curve;
            }
        }
        const auto r = roc_and_auc(graph_with(StructureKind::edge, n, edges), truth, 3);
        EXPECT_GE(r.auc, 0.0);
        EXPECT_LE(r.auc, 1.0);
        EXPECT_EQ(r.points.front(), (std::pair<double, double>{0.0, 0.0}));
        EXPECT_EQ(r.points.back(), (std::pair<double, double>{1.0, 1.0}));
        EXPECT_TRUE(std::is_sorted(r.points.begin(), r.points.end()));
        const Cpdag moved_truth = dag_to_cpdag(Dag(n, moved), ConstraintMask(n));
        EXPECT_DOUBLE_EQ(roc_and_auc(graph_with(StructureKind::edge, n, relabeled), moved_truth, 3).auc, r.auc);
    }
}

TEST(Averaging, Examples) {
    const auto zero = graph_with(StructureKind::edge, 2, {{{0, 1}, {0, 0}}});
    const auto one = graph_with(StructureKind::edge, 2, {{{0, 1}, {1, 1}}});
    const std::vector<StabilityGraph> pair{zero, one};
    EXPECT_EQ(averaging_scheme(pair).curves.at({0, 1}), (std::vector<double>{0.5, 0.5}));
    const std::vector<StabilityGraph> single{one};
    EXPECT_EQ(averaging_scheme(single).curves, one.curves);

    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<StabilityGraph> ten;
    for (int i = 0; i < 10; ++i) {
        std::map<Arc, std::vector<double>> c;
        for (int a = 0; a < 3; ++a) {
            for (int b = a + 1; b < 3; ++b) c[{a, b}] = {u(rng), u(rng), u(rng), u(rng)};
        }
        ten.push_back(graph_with(StructureKind::edge, 3, c));
    }
    const auto avg = averaging_scheme(ten);
    for (const auto& [key, curve] : avg.curves) {
        for (std::size_t j = 0; j < curve.size(); ++j) {
            long double sum = 0;
            for (int i = 9; i >= 0; --i) sum += ten[i].curves.at(key)[j];
            EXPECT_NEAR(curve[j], static_cast<double>(sum / 10), 1e-12);
        }
    }
    const auto other = graph_with(StructureKind::edge, 3, {});
    const std::vector<StabilityGraph> mismatch{zero, other};
    EXPECT_THROW(averaging_scheme(mismatch), ShapeMismatch);
    EXPECT_THROW(averaging_scheme({}), ShapeMismatch);
}

TEST(ModelJson, RoundTrip) {
    Rng rng(11);
    const auto m = random_parameterization(reference_structure(), rng);
    const auto back = model_from_json(model_to_json(m));
    EXPECT_EQ(back.structure.variables, m.structure.variables);
    EXPECT_EQ(back.structure.slices, m.structure.slices);
    EXPECT_EQ(back.baseline_weights, m.baseline_weights);
    EXPECT_EQ(back.transition_weights, m.transition_weights);
    EXPECT_EQ(back.noise_sd, m.noise_sd);
    EXPECT_THROW(model_from_json("{"), DegenerateData);
}
