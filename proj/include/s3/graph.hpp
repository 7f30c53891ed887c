#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "s3/rng.hpp"

namespace s3 {

/// Graphs are stored as per-node bitsets, which caps the node count.
inline constexpr int kMaxNodes = 64;
inline constexpr std::size_t kDefaultExtensionCap = 4096;

using NodeSet = std::uint64_t;

constexpr NodeSet bit(int v) { return NodeSet{1} << v; }

struct Arc {
    int from = 0;
    int to = 0;
    auto operator<=>(const Arc&) const = default;
};

/// Forbidden-arc matrix. forbids(a, a) is always true. Immutable once built.
class ConstraintMask {
public:
    ConstraintMask() = default;
    explicit ConstraintMask(int n);
    ConstraintMask(int n, std::span<const Arc> forbidden);

    int size() const { return n_; }
    bool forbids(int from, int to) const { return (out_[from] >> to) & 1U; }
    bool allows(int from, int to) const { return !forbids(from, to); }
    NodeSet forbidden_targets(int from) const { return out_[from]; }
    NodeSet allowed_parents(int to) const { return allowed_in_[to]; }

    /// True when nothing but self-loops is forbidden.
    bool unconstrained() const;
    /// Unordered pairs with at least one allowed orientation.
    int admissible_pairs() const;
    bool pair_admissible(int a, int b) const { return allows(a, b) || allows(b, a); }
    /// Off-diagonal forbidden arcs in lexicographic order.
    std::vector<Arc> forbidden_arcs() const;

    bool operator==(const ConstraintMask&) const = default;

private:
    int n_ = 0;
    std::vector<NodeSet> out_;
    std::vector<NodeSet> allowed_in_;
};

class Dag {
public:
    Dag() = default;
    explicit Dag(int n);
    /// Throws std::invalid_argument on self-loops, bad endpoints or cycles.
    Dag(int n, std::span<const Arc> arcs);
    static Dag from_parent_sets(std::vector<NodeSet> parents);

    int size() const { return static_cast<int>(parents_.size()); }
    NodeSet parents(int v) const { return parents_[v]; }
    NodeSet children(int v) const;
    bool has_arc(int from, int to) const { return (parents_[to] >> from) & 1U; }
    int arc_count() const;
    std::vector<Arc> arcs() const;
    const std::vector<NodeSet>& parent_sets() const { return parents_; }
    /// Kahn order, smallest index first among ready nodes.
    std::vector<int> topological_order() const;

    bool operator==(const Dag&) const = default;

private:
    std::vector<NodeSet> parents_;
};

/// Equivalence-class representation: compelled arcs plus reversible edges.
class Cpdag {
public:
    Cpdag() = default;
    explicit Cpdag(int n);
    Cpdag(std::vector<NodeSet> directed_parents, std::vector<NodeSet> undirected);
    static Cpdag from_dag(const Dag& dag);

    int size() const { return static_cast<int>(parents_.size()); }
    NodeSet parents(int v) const { return parents_[v]; }
    NodeSet children(int v) const;
    NodeSet neighbors(int v) const { return undirected_[v]; }
    NodeSet adjacent(int v) const { return parents_[v] | children(v) | undirected_[v]; }
    bool has_directed(int from, int to) const { return (parents_[to] >> from) & 1U; }
    bool has_undirected(int a, int b) const { return (undirected_[a] >> b) & 1U; }
    bool is_adjacent(int a, int b) const {
        return has_directed(a, b) || has_directed(b, a) || has_undirected(a, b);
    }
    std::vector<Arc> directed_edges() const;
    /// Undirected edges as (a, b) with a < b.
    std::vector<Arc> undirected_edges() const;
    int edge_count() const;
    const std::vector<NodeSet>& directed_parent_sets() const { return parents_; }
    const std::vector<NodeSet>& undirected_sets() const { return undirected_; }

    bool operator==(const Cpdag&) const = default;

private:
    std::vector<NodeSet> parents_;
    std::vector<NodeSet> undirected_;
};

bool is_acyclic(std::span<const Arc> arcs, int n);
bool is_acyclic(std::span<const NodeSet> parents);

/// Drops forbidden arcs, then breaks cycles by deleting a uniformly chosen arc
/// of the first cycle found until none remain.
Dag repair_to_dag(std::span<const Arc> arcs, int n, const ConstraintMask& mask, Rng& rng);
Dag repair_to_dag(std::vector<NodeSet> parents, const ConstraintMask& mask, Rng& rng);

/// Constrained DAG to CPDAG conversion: Chickering's compelled/reversible
/// labeling, then reversible edges whose reversal is forbidden are directed
/// and Meek's rules are applied to closure. Throws ConstraintViolation when
/// the DAG contains a forbidden arc.
Cpdag dag_to_cpdag(const Dag& dag, const ConstraintMask& mask);
Cpdag dag_to_cpdag(const Dag& dag);

/// Applies Meek rules R1-R4 until no edge changes.
Cpdag meek_closure(Cpdag pdag);

/// Reachability over directed edges only; undirected edges are not traversed.
bool has_directed_path(const Dag& g, int from, int to);
bool has_directed_path(const Cpdag& g, int from, int to);
/// Bitset of nodes reachable from `from` by a non-empty directed path.
NodeSet directed_descendants(std::span<const NodeSet> parents, int from);

/// v-structures a -> c <- b (a < b non-adjacent) of the directed part.
struct VStructure {
    int a = 0;
    int b = 0;
    int collider = 0;
    auto operator<=>(const VStructure&) const = default;
};
std::vector<VStructure> v_structures(const Dag& dag);

/// All mask-respecting consistent extensions in lexicographic orientation
/// order (for each undirected edge a-b with a < b, a->b is tried first).
std::vector<Dag> enumerate_extensions(const Cpdag& cpdag, const ConstraintMask& mask,
                                      std::size_t cap = kDefaultExtensionCap);

std::string to_dot(const Dag& dag, std::span<const std::string> labels = {});
std::string to_dot(const Cpdag& cpdag, std::span<const std::string> labels = {});

/// "X<i>" for every index without an explicit label.
std::vector<std::string> default_labels(int n);

}  // namespace s3
