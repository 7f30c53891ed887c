#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "s3/error.hpp"
#include "s3/graph.hpp"

using namespace s3;

namespace {

ConstraintMask random_mask(int n, double rate, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(rate);
    std::vector<Arc> forbidden;
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a != b && coin(rng)) forbidden.push_back({a, b});
        }
    }
    return ConstraintMask(n, forbidden);
}

}  // namespace

TEST(ConstraintMask, DiagonalAlwaysForbidden) {
    const ConstraintMask m(3);
    for (int v = 0; v < 3; ++v) EXPECT_TRUE(m.forbids(v, v));
    EXPECT_TRUE(m.unconstrained());
    EXPECT_EQ(m.admissible_pairs(), 3);
    const std::vector<Arc> f{{0, 1}};
    const ConstraintMask c(3, f);
    EXPECT_TRUE(c.forbids(0, 1));
    EXPECT_TRUE(c.allows(1, 0));
    EXPECT_FALSE(c.unconstrained());
    EXPECT_EQ(c.forbidden_arcs(), f);
}

TEST(IsAcyclic, Examples) {
    EXPECT_TRUE(is_acyclic(std::vector<Arc>{}, 3));
    EXPECT_FALSE(is_acyclic(std::vector<Arc>{{0, 1}, {1, 2}, {2, 0}}, 3));
    EXPECT_TRUE(is_acyclic(std::vector<Arc>{{0, 1}, {0, 2}, {1, 2}}, 3));
}

TEST(Dag, RejectsCyclesAndSelfLoops) {
    EXPECT_THROW(Dag(2, std::vector<Arc>{{0, 1}, {1, 0}}), std::invalid_argument);
    EXPECT_THROW(Dag(2, std::vector<Arc>{{1, 1}}), std::invalid_argument);
    EXPECT_THROW(Dag(2, std::vector<Arc>{{0, 2}}), std::invalid_argument);
}

TEST(Dag, TopologicalOrderRespectsArcs) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const Dag g = oracle::random_dag(7, 0.4, rng);
        const auto order = g.topological_order();
        std::vector<int> pos(7);
        for (int i = 0; i < 7; ++i) pos[order[i]] = i;
        for (const auto& a : g.arcs()) EXPECT_LT(pos[a.from], pos[a.to]);
    }
}

TEST(AllDags, CountsMatchKnownSequence) {
    EXPECT_EQ(oracle::all_dags(2).size(), 3U);
    EXPECT_EQ(oracle::all_dags(3).size(), 25U);
    EXPECT_EQ(oracle::all_dags(4).size(), 543U);
}

TEST(RepairToDag, TwoCycleKeepsEitherArc) {
    const ConstraintMask m(2);
    std::set<std::vector<Arc>> seen;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
        Rng rng(seed);
        seen.insert(repair_to_dag(std::vector<Arc>{{0, 1}, {1, 0}}, 2, m, rng).arcs());
    }
    EXPECT_EQ(seen, (std::set<std::vector<Arc>>{{{0, 1}}, {{1, 0}}}));
}

TEST(RepairToDag, DropsForbiddenArcs) {
    const ConstraintMask m(2, std::vector<Arc>{{0, 1}});
    Rng rng(1);
    EXPECT_EQ(repair_to_dag(std::vector<Arc>{{0, 1}}, 2, m, rng).arc_count(), 0);
}

TEST(RepairToDag, ProducesMaskRespectingSubsets) {
    std::mt19937_64 gen(11);
    Rng rng(3);
    std::bernoulli_distribution coin(0.4);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + trial % 6;
        const ConstraintMask mask = random_mask(n, 0.2, gen);
        std::vector<Arc> arcs;
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                if (a != b && coin(gen)) arcs.push_back({a, b});
            }
        }
        const Dag g = repair_to_dag(arcs, n, mask, rng);
        EXPECT_TRUE(oracle::acyclic(oracle::adjacency(g)));
        EXPECT_TRUE(oracle::respects(g, mask));
        for (const auto& a : g.arcs()) EXPECT_NE(std::find(arcs.begin(), arcs.end(), a), arcs.end());
    }
}

TEST(RepairToDag, IdentityOnValidInput) {
    std::mt19937_64 gen(2);
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        const Dag g = oracle::random_dag(6, 0.5, gen);
        EXPECT_EQ(repair_to_dag(g.arcs(), 6, ConstraintMask(6), rng), g);
    }
}

TEST(DagToCpdag, EmptyAndComplete) {
    EXPECT_EQ(dag_to_cpdag(Dag(4)).edge_count(), 0);
    std::vector<Arc> arcs;
    for (int a = 0; a < 5; ++a) {
        for (int b = a + 1; b < 5; ++b) arcs.push_back({a, b});
    }
    const Cpdag c = dag_to_cpdag(Dag(5, arcs));
    EXPECT_TRUE(c.directed_edges().empty());
    EXPECT_EQ(c.undirected_edges().size(), 10U);
}

TEST(DagToCpdag, ChainAndCollider) {
    const Cpdag chain = dag_to_cpdag(Dag(3, std::vector<Arc>{{0, 1}, {1, 2}}));
    EXPECT_TRUE(chain.has_undirected(0, 1));
    EXPECT_TRUE(chain.has_undirected(1, 2));
    const Cpdag collider = dag_to_cpdag(Dag(3, std::vector<Arc>{{0, 2}, {1, 2}}));
    EXPECT_TRUE(collider.has_directed(0, 2));
    EXPECT_TRUE(collider.has_directed(1, 2));
}

TEST(DagToCpdag, ForbiddenReversalStaysDirected) {
    const ConstraintMask m(2, std::vector<Arc>{{1, 0}});
    const Cpdag c = dag_to_cpdag(Dag(2, std::vector<Arc>{{0, 1}}), m);
    EXPECT_TRUE(c.has_directed(0, 1));
    EXPECT_THROW(dag_to_cpdag(Dag(2, std::vector<Arc>{{1, 0}}), m), ConstraintViolation);
}

class DagToCpdagOracle : public ::testing::TestWithParam<int> {};

TEST_P(DagToCpdagOracle, MatchesUnionOfEquivalenceClass) {
    const int n = GetParam();
    const auto dags = oracle::all_dags(n);
    std::map<oracle::ClassKey, std::vector<Dag>> classes;
    for (const auto& g : dags) classes[oracle::class_key(g)].push_back(g);
    for (const auto& [key, members] : classes) {
        const auto expected = oracle::union_orientation(members);
        for (const auto& g : members) EXPECT_EQ(oracle::as_union(dag_to_cpdag(g)), expected);
    }
}

TEST_P(DagToCpdagOracle, SameCpdagIffSameSkeletonAndColliders) {
    const int n = GetParam();
    const auto dags = oracle::all_dags(n);
    std::map<oracle::ClassKey, Cpdag> by_key;
    std::map<std::pair<std::vector<NodeSet>, std::vector<NodeSet>>, oracle::ClassKey> by_cpdag;
    for (const auto& g : dags) {
        const Cpdag c = dag_to_cpdag(g);
        const auto key = oracle::class_key(g);
        auto [it, inserted] = by_key.emplace(key, c);
        if (!inserted) EXPECT_EQ(it->second, c);
        auto [jt, fresh] = by_cpdag.emplace(std::pair(c.directed_parent_sets(), c.undirected_sets()), key);
        if (!fresh) EXPECT_EQ(jt->second, key);
    }
}

TEST_P(DagToCpdagOracle, ConstrainedMatchesUnionOfAdmissibleMembers) {
    const int n = GetParam();
    const auto dags = oracle::all_dags(n);
    std::map<oracle::ClassKey, std::vector<Dag>> classes;
    for (const auto& g : dags) classes[oracle::class_key(g)].push_back(g);
    std::mt19937_64 rng(17 + n);
    for (int trial = 0; trial < 40; ++trial) {
        const ConstraintMask mask = random_mask(n, 0.25, rng);
        for (const auto& [key, members] : classes) {
            std::vector<Dag> admissible;
            for (const auto& g : members) {
                if (oracle::respects(g, mask)) admissible.push_back(g);
            }
            if (admissible.empty()) continue;
            const auto expected = oracle::union_orientation(admissible);
            for (const auto& g : admissible) EXPECT_EQ(oracle::as_union(dag_to_cpdag(g, mask)), expected);
        }
    }
}

TEST_P(DagToCpdagOracle, ExtensionsAreTheAdmissibleClassMembers) {
    const int n = GetParam();
    const auto dags = oracle::all_dags(n);
    std::map<oracle::ClassKey, std::vector<Dag>> classes;
    for (const auto& g : dags) classes[oracle::class_key(g)].push_back(g);
    std::mt19937_64 rng(101 + n);
    for (int trial = 0; trial < 20; ++trial) {
        const ConstraintMask mask = trial == 0 ? ConstraintMask(n) : random_mask(n, 0.25, rng);
        for (const auto& [key, members] : classes) {
            std::vector<std::vector<Arc>> expected;
            const Dag* seed = nullptr;
            for (const auto& g : members) {
                if (!oracle::respects(g, mask)) continue;
                expected.push_back(g.arcs());
                if (!seed) seed = &g;
            }
            if (!seed) continue;
            std::sort(expected.begin(), expected.end());
            const Cpdag c = dag_to_cpdag(*seed, mask);
            std::vector<std::vector<Arc>> got;
            for (const auto& g : enumerate_extensions(c, mask, 1U << 20)) got.push_back(g.arcs());
            std::sort(got.begin(), got.end());
            EXPECT_EQ(got, expected);
        }
    }
}

INSTANTIATE_TEST_SUITE_P(SmallGraphs, DagToCpdagOracle, ::testing::Values(2, 3, 4));

TEST(EnumerateExtensions, Examples) {
    const ConstraintMask m2(2);
    const Cpdag edge(std::vector<NodeSet>{0, 0}, std::vector<NodeSet>{bit(1), bit(0)});
    const auto two = enumerate_extensions(edge, m2);
    ASSERT_EQ(two.size(), 2U);
    EXPECT_TRUE(two[0].has_arc(0, 1));
    EXPECT_TRUE(two[1].has_arc(1, 0));

    const Dag collider(3, std::vector<Arc>{{0, 2}, {1, 2}});
    const auto one = enumerate_extensions(dag_to_cpdag(collider), ConstraintMask(3));
    ASSERT_EQ(one.size(), 1U);
    EXPECT_EQ(one[0], collider);

    const Cpdag path(std::vector<NodeSet>(3, 0), std::vector<NodeSet>{bit(1), bit(0) | bit(2), bit(1)});
    const auto three = enumerate_extensions(path, ConstraintMask(3));
    EXPECT_EQ(three.size(), 3U);
    for (const auto& g : three) EXPECT_FALSE(g.has_arc(0, 1) && g.has_arc(2, 1));
}

TEST(EnumerateExtensions, CapAndInfeasibility) {
    std::vector<Arc> arcs;
    for (int a = 0; a < 5; ++a) {
        for (int b = a + 1; b < 5; ++b) arcs.push_back({a, b});
    }
    const Cpdag complete = dag_to_cpdag(Dag(5, arcs));
    EXPECT_EQ(enumerate_extensions(complete, ConstraintMask(5)).size(), 120U);
    EXPECT_THROW(enumerate_extensions(complete, ConstraintMask(5), 119), ExtensionCapExceeded);
    const Cpdag edge(std::vector<NodeSet>{0, 0}, std::vector<NodeSet>{bit(1), bit(0)});
    EXPECT_THROW(enumerate_extensions(edge, ConstraintMask(2, std::vector<Arc>{{0, 1}, {1, 0}})), NoExtension);
}

TEST(EnumerateExtensions, RoundTripContainsOriginal) {
    for (const auto& g : oracle::all_dags(4)) {
        const auto ext = enumerate_extensions(dag_to_cpdag(g), ConstraintMask(4), 1U << 20);
        EXPECT_NE(std::find(ext.begin(), ext.end(), g), ext.end());
    }
}

TEST(HasDirectedPath, Examples) {
    const Dag chain(3, std::vector<Arc>{{0, 1}, {1, 2}});
    EXPECT_TRUE(has_directed_path(chain, 0, 2));
    EXPECT_FALSE(has_directed_path(chain, 2, 0));
    const Cpdag undirected(std::vector<NodeSet>{0, 0}, std::vector<NodeSet>{bit(1), bit(0)});
    EXPECT_FALSE(has_directed_path(undirected, 0, 1));
    EXPECT_FALSE(has_directed_path(Dag(3), 0, 1));
}

TEST(HasDirectedPath, MatchesTransitiveClosure) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + trial % 5;
        const Dag g = oracle::random_dag(n, 0.45, rng);
        const auto reach = oracle::transitive_closure(oracle::adjacency(g));
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                if (a != b) EXPECT_EQ(has_directed_path(g, a, b), reach[a][b] == 1);
            }
        }
    }
}

TEST(HasDirectedPath, CpdagIgnoresUndirectedEdges) {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 3 + trial % 4;
        const Cpdag c = dag_to_cpdag(oracle::random_dag(n, 0.5, rng));
        oracle::Matrix directed(n, std::vector<int>(n, 0));
        for (const auto& a : c.directed_edges()) directed[a.from][a.to] = 1;
        const auto reach = oracle::transitive_closure(directed);
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                if (a != b) EXPECT_EQ(has_directed_path(c, a, b), reach[a][b] == 1);
            }
        }
    }
}

TEST(Dot, DirectedAndUndirectedEdges) {
    const std::vector<std::string> labels{"A", "B", "C"};
    const std::string dag = to_dot(Dag(3, std::vector<Arc>{{0, 1}}), labels);
    EXPECT_NE(dag.find("digraph G {"), std::string::npos);
    EXPECT_NE(dag.find("\"A\" -> \"B\";"), std::string::npos);
    const std::string cpdag = to_dot(dag_to_cpdag(Dag(3, std::vector<Arc>{{0, 1}})), labels);
    EXPECT_NE(cpdag.find("\"A\" -> \"B\" [dir=none];"), std::string::npos);
    EXPECT_EQ(default_labels(2), (std::vector<std::string>{"X0", "X1"}));
}
