#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "oracles.hpp"
#include "s3/error.hpp"
#include "s3/stability.hpp"

using namespace s3;

namespace {

ParetoModel model(const Dag& dag, const ConstraintMask& mask, double bic = 0.0) {
    FitResult fit;
    fit.complexity = dag.arc_count();
    fit.bic = bic;
    return {dag, dag_to_cpdag(dag, mask), fit};
}

SubsetRun run_of(std::vector<ParetoModel> models) {
    SubsetRun r;
    r.ok = true;
    r.models = std::move(models);
    return r;
}

Dag complete(int p) {
    std::vector<Arc> arcs;
    for (int a = 0; a < p; ++a) {
        for (int b = a + 1; b < p; ++b) arcs.push_back({a, b});
    }
    return Dag(p, arcs);
}

Dataset gaussian(int rows, int cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Dag g = oracle::random_dag(cols, 0.5, rng);
    std::map<Arc, double> w;
    for (const auto& a : g.arcs()) w[a] = 0.8;
    std::vector<std::string> names;
    for (int c = 0; c < cols; ++c) names.push_back("v" + std::to_string(c));
    return make_dataset(names, oracle::sem_sample(g, w, rows, rng));
}

// Probabilities from the front of every run that searches a small dataset.
std::vector<SubsetRun> searched_runs(const ConstraintMask& mask, std::uint64_t seed) {
    Rng rng(seed);
    const auto subsets = subsample(gaussian(200, mask.size(), seed), 6, rng);
    SearchParams params;
    params.generations = 15;
    params.population_size = 40;
    params.seed = seed;
    return run_searches(subsets, mask, params);
}

}  // namespace

TEST(Subsample, IndicesAreHalfAndDistinct) {
    Rng rng(1);
    const auto sets = subsample_indices(183, 20, rng);
    ASSERT_EQ(sets.size(), 20U);
    for (const auto& s : sets) {
        EXPECT_EQ(s.size(), 91U);
        EXPECT_EQ(std::set<int>(s.begin(), s.end()).size(), s.size());
        EXPECT_TRUE(std::is_sorted(s.begin(), s.end()));
        EXPECT_GE(s.front(), 0);
        EXPECT_LT(s.back(), 183);
    }
    EXPECT_NE(sets[0], sets[1]);

    Rng small(2);
    for (const auto& s : subsample_indices(4, 3, small)) {
        EXPECT_EQ(s.size(), 2U);
        for (int i : s) EXPECT_LT(i, 4);
    }
}

TEST(Subsample, DeterministicAndUniform) {
    Rng a(3);
    Rng b(3);
    EXPECT_EQ(subsample_indices(50, 5, a), subsample_indices(50, 5, b));
    Rng rng(4);
    std::vector<int> hits(10, 0);
    const int trials = 20000;
    for (const auto& s : subsample_indices(10, trials, rng)) {
        for (int i : s) ++hits[i];
    }
    for (int h : hits) EXPECT_NEAR(h / static_cast<double>(trials), 0.5, 0.02);
}

TEST(Subsample, RowsComeFromTheData) {
    const Dataset d = gaussian(183, 3, 5);
    Rng rng(5);
    const auto subsets = subsample(d, 4, rng);
    for (const auto& s : subsets) {
        ASSERT_EQ(s.data.rows(), 91);
        for (std::size_t i = 0; i < s.units.size(); ++i) {
            EXPECT_EQ(s.data.values.row(static_cast<Eigen::Index>(i)), d.values.row(s.units[i]));
        }
    }
    Rng again(5);
    EXPECT_THROW(subsample(gaussian(9, 3, 6), 2, again), DegenerateData);
}

TEST(RunSearches, CountsDeterminismAndFailures) {
    const ConstraintMask mask(3);
    Rng rng(7);
    const auto subsets = subsample(gaussian(120, 3, 7), 8, rng);
    SearchParams params;
    params.generations = 5;
    params.population_size = 20;
    const auto a = run_searches(subsets, mask, params);
    const auto b = run_searches_serial(subsets, mask, params);
    ASSERT_EQ(a.size(), 8U);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(a[i].ok);
        EXPECT_EQ(a[i].seed, derive_seed(params.seed, i));
        ASSERT_EQ(a[i].models.size(), b[i].models.size());
        for (std::size_t k = 0; k < a[i].models.size(); ++k) {
            EXPECT_EQ(a[i].models[k].dag, b[i].models[k].dag);
            EXPECT_EQ(a[i].models[k].fit.bic, b[i].models[k].fit.bic);
        }
    }
    EXPECT_THROW(run_searches({}, mask, params), SearchFailure);
    EXPECT_THROW(run_searches(subsets, ConstraintMask(4), params), ShapeMismatch);

    // Two of eight subsets lose all variance in one column.
    auto broken = subsets;
    for (int i : {0, 1}) broken[i].data.values.col(0).setConstant(1.0);
    EXPECT_THROW(run_searches(broken, mask, params), SearchFailure);
}

TEST(EdgeStability, Counting) {
    const ConstraintMask mask(3);
    const Dag ab(3, std::vector<Arc>{{0, 1}});
    const Dag bc(3, std::vector<Arc>{{1, 2}});
    const Dag chain(3, std::vector<Arc>{{0, 1}, {1, 2}});
    const Dag ac_b(3, std::vector<Arc>{{0, 2}, {1, 2}});
    std::vector<SubsetRun> runs{run_of({model(Dag(3), mask), model(ab, mask), model(chain, mask)}),
                                run_of({model(Dag(3), mask), model(ab, mask), model(ac_b, mask)}),
                                run_of({model(bc, mask), model(chain, mask)}),
                                run_of({model(ab, mask), model(chain, mask), model(complete(3), mask)})};
    const auto sg = edge_stability(runs, 3);
    EXPECT_EQ(sg.max_complexity(), 3);
    EXPECT_DOUBLE_EQ(sg.probability({0, 1}, 1), 0.75);
    EXPECT_DOUBLE_EQ(sg.probability({0, 1}, 2), 0.75);
    EXPECT_DOUBLE_EQ(sg.probability({1, 2}, 2), 1.0);
    EXPECT_DOUBLE_EQ(sg.probability({0, 2}, 0), 0.0);
    for (const auto& [key, curve] : sg.curves) EXPECT_DOUBLE_EQ(curve[3], 1.0);
    EXPECT_EQ(sg.model_counts, (std::vector<int>{2, 4, 4, 1}));

    const auto paths = causal_path_stability(runs, 3);
    for (const auto& [key, curve] : paths.curves) {
        EXPECT_DOUBLE_EQ(curve[0], 0.0);
        EXPECT_DOUBLE_EQ(curve[3], 0.0);
    }
    // Only the collider 0 -> 2 <- 1 has directed edges.
    EXPECT_DOUBLE_EQ(paths.probability({0, 2}, 2), 0.25);
    EXPECT_DOUBLE_EQ(paths.probability({0, 1}, 2), 0.0);
}

TEST(CausalPathStability, ForcedArcReachesOne) {
    const ConstraintMask mask(3, std::vector<Arc>{{1, 0}});
    std::vector<SubsetRun> runs{run_of({model(Dag(3), mask), model(complete(3), mask)})};
    const auto paths = causal_path_stability(runs, 3);
    EXPECT_DOUBLE_EQ(paths.probability({0, 1}, 3), 1.0);
    EXPECT_DOUBLE_EQ(paths.probability({1, 0}, 3), 0.0);
}

TEST(StabilityGraph, GapsAreInterpolated) {
    std::vector<double> curve{0.0, 0.0, 0.0, 0.6, 0.0, 0.0};
    fill_gaps(curve, {false, true, false, true, false, false});
    EXPECT_DOUBLE_EQ(curve[0], 0.0);
    EXPECT_DOUBLE_EQ(curve[2], 0.3);
    EXPECT_DOUBLE_EQ(curve[4], 0.6);
    EXPECT_DOUBLE_EQ(curve[5], 0.6);

    const ConstraintMask mask(3);
    std::vector<SubsetRun> runs{run_of({model(Dag(3), mask), model(complete(3), mask)})};
    const auto sg = edge_stability(runs, 3);
    EXPECT_EQ(sg.imputed, (std::vector<bool>{false, true, true, false}));
    EXPECT_NEAR(sg.probability({0, 1}, 1), 1.0 / 3.0, 1e-12);
}

TEST(StabilityGraph, FailedRunsAreExcluded) {
    const ConstraintMask mask(2);
    SubsetRun failed;
    failed.models = {model(Dag(2), mask)};
    std::vector<SubsetRun> runs{run_of({model(Dag(2, std::vector<Arc>{{0, 1}}), mask)}), failed};
    const auto sg = edge_stability(runs, 2);
    EXPECT_EQ(sg.model_counts[0], 0);
    EXPECT_EQ(sg.model_counts[1], 1);
}

TEST(StabilityGraph, EndpointPropertiesOnSearchedRuns) {
    for (std::uint64_t seed : {11U, 12U, 13U}) {
        const ConstraintMask mask(4, std::vector<Arc>{{1, 0}, {3, 2}});
        const auto runs = searched_runs(mask, seed);
        const auto edges = edge_stability(runs, 4);
        const auto paths = causal_path_stability(runs, 4);
        const int top = full_admissible_dag(mask).arc_count();
        for (const auto* sg : {&edges, &paths}) {
            for (const auto& [key, curve] : sg->curves) {
                for (double v : curve) {
                    EXPECT_GE(v, 0.0);
                    EXPECT_LE(v, 1.0);
                }
            }
        }
        for (const auto& [key, curve] : edges.curves) EXPECT_DOUBLE_EQ(curve[top], 1.0);
        for (const auto& [key, curve] : paths.curves) EXPECT_DOUBLE_EQ(curve[0], 0.0);
        EXPECT_DOUBLE_EQ(paths.probability({0, 1}, top), 1.0);
        EXPECT_DOUBLE_EQ(paths.probability({2, 3}, top), 1.0);
    }
}

TEST(Thresholds, ArgminMeanBic) {
    EXPECT_EQ(argmin_mean_bic({{0, 10.0}, {1, 4.0}, {2, 7.0}}), 1);
    EXPECT_EQ(argmin_mean_bic({{0, 1.0}, {1, 2.0}, {2, 3.0}}), 0);
    EXPECT_EQ(argmin_mean_bic({{0, 5.0}, {2, 3.0}, {3, 3.0}}), 2);
    EXPECT_THROW(argmin_mean_bic({}), SearchFailure);

    const ConstraintMask mask(2);
    const Dag one(2, std::vector<Arc>{{0, 1}});
    std::vector<SubsetRun> runs{run_of({model(Dag(2), mask, 10.0), model(one, mask, 2.0)}),
                                run_of({model(Dag(2), mask, 12.0), model(one, mask, 8.0)})};
    const auto means = mean_bic_by_complexity(runs);
    EXPECT_DOUBLE_EQ(means.at(0), 11.0);
    EXPECT_DOUBLE_EQ(means.at(1), 5.0);
    EXPECT_EQ(compute_pi_bic(runs), 1);
}

TEST(Thresholds, ReliabilityExamples) {
    const std::vector<double> curve{0.0, 0.2, 0.7, 1.0};
    EXPECT_DOUBLE_EQ(reliability(curve, 2), 0.7);
    EXPECT_DOUBLE_EQ(reliability(curve, 1), 0.2);

    StabilityGraph edges{StructureKind::edge, 2, {{{0, 1}, curve}}, {}, {}};
    StabilityGraph paths{StructureKind::causal_path, 2, {{{0, 1}, {0, 0, 0.1, 0.1}}, {{1, 0}, {0, 0, 0, 0}}}, {}, {}};
    auto rel = relevant_structures(edges, paths, {0.6, 2});
    ASSERT_EQ(rel.size(), 1U);
    EXPECT_DOUBLE_EQ(rel[0].reliability, 0.7);
    EXPECT_TRUE(relevant_structures(edges, paths, {0.6, 1}).empty());
    rel = relevant_structures(edges, paths, {0.0, 2});
    ASSERT_EQ(rel.size(), 2U);
    EXPECT_EQ(rel[1].kind, StructureKind::causal_path);
    EXPECT_EQ(rel[1].key, (Arc{0, 1}));
}

TEST(Thresholds, RelevanceIsMonotone) {
    const auto runs = searched_runs(ConstraintMask(4), 21);
    const auto edges = edge_stability(runs, 4);
    const auto paths = causal_path_stability(runs, 4);
    auto as_set = [](const std::vector<RelevantStructure>& v) {
        std::set<std::pair<int, Arc>> s;
        for (const auto& r : v) s.insert({static_cast<int>(r.kind), r.key});
        return s;
    };
    for (int pi_bic = 0; pi_bic <= 6; ++pi_bic) {
        for (double pi_sel = 0.0; pi_sel <= 1.0; pi_sel += 0.1) {
            const auto base = as_set(relevant_structures(edges, paths, {pi_sel, pi_bic}));
            for (const auto& r : relevant_structures(edges, paths, {pi_sel, pi_bic})) EXPECT_GE(r.reliability, pi_sel);
            const auto stricter = as_set(relevant_structures(edges, paths, {pi_sel + 0.1, pi_bic}));
            const auto smaller = as_set(relevant_structures(edges, paths, {pi_sel, std::max(0, pi_bic - 1)}));
            EXPECT_TRUE(std::includes(base.begin(), base.end(), stricter.begin(), stricter.end()));
            EXPECT_TRUE(std::includes(base.begin(), base.end(), smaller.begin(), smaller.end()));
        }
    }
}

TEST(AssembleGraph, Examples) {
    const ConstraintMask open(2);
    const std::vector<RelevantStructure> edge{{{0, 1}, 0.9, StructureKind::edge}};
    const std::vector<RelevantStructure> path{{{0, 1}, 0.7, StructureKind::causal_path}};
    auto g = assemble_graph(edge, path, open);
    ASSERT_EQ(g.edges.size(), 1U);
    EXPECT_TRUE(g.edges[0].directed);
    EXPECT_EQ(g.edges[0].from, 0);
    EXPECT_DOUBLE_EQ(g.edges[0].reliability, 0.9);

    g = assemble_graph(edge, {}, open);
    EXPECT_FALSE(g.edges[0].directed);

    // Node 1 may not cause anything.
    const ConstraintMask sink(2, std::vector<Arc>{{1, 0}});
    g = assemble_graph(edge, {}, sink);
    EXPECT_TRUE(g.edges[0].directed);
    EXPECT_EQ(g.edges[0].from, 0);
    EXPECT_EQ(g.edges[0].to, 1);
}

TEST(AssembleGraph, ConflictsAndCyclesAreNoted) {
    const ConstraintMask open(3);
    const std::vector<RelevantStructure> edge{{{0, 1}, 1.0, StructureKind::edge}};
    const std::vector<RelevantStructure> both{{{0, 1}, 0.8, StructureKind::causal_path},
                                              {{1, 0}, 0.7, StructureKind::causal_path}};
    auto g = assemble_graph(edge, both, open);
    EXPECT_EQ(g.edges[0].from, 0);
    ASSERT_EQ(g.notes.size(), 1U);
    EXPECT_NE(g.notes[0].find("conflict"), std::string::npos);

    const std::vector<RelevantStructure> triangle{{{0, 1}, 1.0, StructureKind::edge},
                                                  {{1, 2}, 1.0, StructureKind::edge},
                                                  {{0, 2}, 1.0, StructureKind::edge}};
    const std::vector<RelevantStructure> cycle{{{0, 1}, 0.9, StructureKind::causal_path},
                                               {{1, 2}, 0.8, StructureKind::causal_path},
                                               {{2, 0}, 0.7, StructureKind::causal_path}};
    g = assemble_graph(triangle, cycle, open);
    ASSERT_EQ(g.notes.size(), 1U);
    EXPECT_NE(g.notes[0].find("cycle"), std::string::npos);
    EXPECT_FALSE(g.edges[1].directed);
}

TEST(AssembleGraph, DirectedPartIsAcyclic) {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 300; ++trial) {
        const int p = 3 + trial % 4;
        std::vector<RelevantStructure> edges;
        std::vector<RelevantStructure> paths;
        std::uniform_real_distribution<double> u(0.6, 1.0);
        for (int a = 0; a < p; ++a) {
            for (int b = 0; b < p; ++b) {
                if (a < b && rng() % 2) edges.push_back({{a, b}, u(rng), StructureKind::edge});
                if (a != b && rng() % 3 == 0) paths.push_back({{a, b}, u(rng), StructureKind::causal_path});
            }
        }
        const auto mask = ConstraintMask(p, std::vector<Arc>{{0, 1}});
        const auto g = assemble_graph(edges, paths, mask);
        oracle::Matrix adj(p, std::vector<int>(p, 0));
        for (const auto& e : g.edges) {
            if (e.directed) adj[e.from][e.to] = 1;
        }
        EXPECT_TRUE(oracle::acyclic(adj));
        EXPECT_EQ(g.edges.size(), edges.size());
    }
}

TEST(Output, FormatShortAndDot) {
    EXPECT_EQ(format_short(1.0), "1");
    EXPECT_EQ(format_short(0.7149), "0.71");
    EXPECT_EQ(format_short(0.5), "0.5");
    EXPECT_EQ(format_short(-0.001), "0");
    EXPECT_EQ(format_short(std::numeric_limits<double>::quiet_NaN()), "NA");

    AnnotatedCausalGraph g;
    g.n_nodes = 3;
    g.edges = {{0, 1, true, 1.0, 0.71}, {1, 2, false, 0.65, std::nullopt}};
    const std::vector<std::string> labels{"pActivity", "fatigue", "x"};
    const std::string dot = to_dot(g, labels);
    EXPECT_NE(dot.find("\"pActivity\" -> \"fatigue\" [label=\"1/0.71\"]"), std::string::npos);
    EXPECT_NE(dot.find("\"fatigue\" -> \"x\" [dir=none, style=dashed, label=\"0.65\"]"), std::string::npos);
}

TEST(Output, CsvRoundTrip) {
    const auto runs = searched_runs(ConstraintMask(3), 41);
    const std::vector<std::string> labels{"a", "b", "c"};
    const auto dir = std::filesystem::path(::testing::TempDir());
    for (const auto& sg : {edge_stability(runs, 3), causal_path_stability(runs, 3)}) {
        const auto path = dir / ("s3_" + to_string(sg.kind) + ".csv");
        write_stability_csv(path, sg, labels);
        const auto back = read_stability_csv(path, labels);
        EXPECT_EQ(back.kind, sg.kind);
        EXPECT_EQ(back.curves, sg.curves);
        EXPECT_EQ(back.imputed, sg.imputed);
        const std::string svg = stability_svg(sg, labels, {0.6, 1});
        EXPECT_EQ(svg.rfind("<svg", 0), 0U);
    }
}
