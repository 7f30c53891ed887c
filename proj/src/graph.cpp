#include "s3/graph.hpp"

#include <algorithm>
#include <bit>
#include <sstream>
#include <stdexcept>

#include "s3/error.hpp"

namespace s3 {
namespace {

template <typename F>
void for_each_node(NodeSet set, F&& f) {
    for (; set != 0; set &= set - 1) f(std::countr_zero(set));
}

void check_size(int n) {
    if (n < 0 || n > kMaxNodes) {
        throw std::invalid_argument("node count must be in [0, 64]");
    }
}

std::vector<NodeSet> children_of(std::span<const NodeSet> parents) {
    std::vector<NodeSet> children(parents.size(), 0);
    for (std::size_t v = 0; v < parents.size(); ++v) {
        for_each_node(parents[v], [&](int u) { children[u] |= bit(static_cast<int>(v)); });
    }
    return children;
}

// First cycle met by an index-ordered DFS, as the list of its arcs.
std::vector<Arc> find_cycle(std::span<const NodeSet> parents) {
    const int n = static_cast<int>(parents.size());
    const auto children = children_of(parents);
    std::vector<int> color(n, 0);  // 0 white, 1 on stack, 2 done
    std::vector<int> stack;

    struct Frame {
        int node;
        NodeSet pending;
    };
    for (int root = 0; root < n; ++root) {
        if (color[root] != 0) continue;
        std::vector<Frame> frames{{root, children[root]}};
        color[root] = 1;
        stack.assign(1, root);
        while (!frames.empty()) {
            Frame& top = frames.back();
            if (top.pending == 0) {
                color[top.node] = 2;
                frames.pop_back();
                stack.pop_back();
                continue;
            }
            const int next = std::countr_zero(top.pending);
            top.pending &= top.pending - 1;
            if (color[next] == 1) {
                std::vector<Arc> cycle;
                auto it = std::find(stack.begin(), stack.end(), next);
                for (; it + 1 != stack.end(); ++it) cycle.push_back({*it, *(it + 1)});
                cycle.push_back({stack.back(), next});
                return cycle;
            }
            if (color[next] == 0) {
                color[next] = 1;
                stack.push_back(next);
                frames.push_back({next, children[next]});
            }
        }
    }
    return {};
}

std::vector<NodeSet> parents_from_arcs(std::span<const Arc> arcs, int n) {
    check_size(n);
    std::vector<NodeSet> parents(n, 0);
    for (const Arc& a : arcs) {
        if (a.from < 0 || a.to < 0 || a.from >= n || a.to >= n) {
            throw std::invalid_argument("arc endpoint out of range");
        }
        if (a.from == a.to) throw std::invalid_argument("self-loop");
        parents[a.to] |= bit(a.from);
    }
    return parents;
}

}  // namespace

// ---------------------------------------------------------------- ConstraintMask

ConstraintMask::ConstraintMask(int n) : ConstraintMask(n, std::span<const Arc>{}) {}

ConstraintMask::ConstraintMask(int n, std::span<const Arc> forbidden) : n_(n) {
    check_size(n);
    out_.assign(n, 0);
    for (int a = 0; a < n; ++a) out_[a] |= bit(a);
    for (const Arc& arc : forbidden) {
        if (arc.from < 0 || arc.to < 0 || arc.from >= n || arc.to >= n) {
            throw std::invalid_argument("forbidden arc endpoint out of range");
        }
        out_[arc.from] |= bit(arc.to);
    }
    allowed_in_.assign(n, 0);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (!forbids(a, b)) allowed_in_[b] |= bit(a);
        }
    }
}

bool ConstraintMask::unconstrained() const {
    for (int a = 0; a < n_; ++a) {
        if (out_[a] != bit(a)) return false;
    }
    return true;
}

int ConstraintMask::admissible_pairs() const {
    int count = 0;
    for (int a = 0; a < n_; ++a) {
        for (int b = a + 1; b < n_; ++b) count += pair_admissible(a, b) ? 1 : 0;
    }
    return count;
}

std::vector<Arc> ConstraintMask::forbidden_arcs() const {
    std::vector<Arc> arcs;
    for (int a = 0; a < n_; ++a) {
        for (int b = 0; b < n_; ++b) {
            if (a != b && forbids(a, b)) arcs.push_back({a, b});
        }
    }
    return arcs;
}

// ---------------------------------------------------------------- Dag

Dag::Dag(int n) {
    check_size(n);
    parents_.assign(n, 0);
}

Dag::Dag(int n, std::span<const Arc> arcs) : parents_(parents_from_arcs(arcs, n)) {
    if (!is_acyclic(parents_)) throw std::invalid_argument("arc set contains a cycle");
}

Dag Dag::from_parent_sets(std::vector<NodeSet> parents) {
    check_size(static_cast<int>(parents.size()));
    const NodeSet all = parents.size() == 64 ? ~NodeSet{0} : bit(static_cast<int>(parents.size())) - 1;
    for (std::size_t v = 0; v < parents.size(); ++v) {
        if ((parents[v] & ~all) != 0) throw std::invalid_argument("parent out of range");
        if ((parents[v] >> v) & 1U) throw std::invalid_argument("self-loop");
    }
    if (!is_acyclic(parents)) throw std::invalid_argument("parent sets contain a cycle");
    Dag dag;
    dag.parents_ = std::move(parents);
    return dag;
}

NodeSet Dag::children(int v) const {
    NodeSet out = 0;
    for (int w = 0; w < size(); ++w) {
        if (has_arc(v, w)) out |= bit(w);
    }
    return out;
}

int Dag::arc_count() const {
    int k = 0;
    for (NodeSet p : parents_) k += std::popcount(p);
    return k;
}

std::vector<Arc> Dag::arcs() const {
    std::vector<Arc> out;
    for (int a = 0; a < size(); ++a) {
        for (int b = 0; b < size(); ++b) {
            if (has_arc(a, b)) out.push_back({a, b});
        }
    }
    return out;
}

std::vector<int> Dag::topological_order() const {
    const int n = size();
    std::vector<int> order;
    order.reserve(n);
    NodeSet placed = 0;
    while (static_cast<int>(order.size()) < n) {
        for (int v = 0; v < n; ++v) {
            if (((placed >> v) & 1U) == 0 && (parents_[v] & ~placed) == 0) {
                placed |= bit(v);
                order.push_back(v);
                break;
            }
        }
    }
    return order;
}

// ---------------------------------------------------------------- Cpdag

Cpdag::Cpdag(int n) {
    check_size(n);
    parents_.assign(n, 0);
    undirected_.assign(n, 0);
}

Cpdag::Cpdag(std::vector<NodeSet> directed_parents, std::vector<NodeSet> undirected)
    : parents_(std::move(directed_parents)), undirected_(std::move(undirected)) {
    check_size(static_cast<int>(parents_.size()));
    if (parents_.size() != undirected_.size()) throw std::invalid_argument("size mismatch");
    for (int a = 0; a < size(); ++a) {
        for (int b = 0; b < size(); ++b) {
            if (has_undirected(a, b) != has_undirected(b, a)) {
                throw std::invalid_argument("undirected relation must be symmetric");
            }
            if (has_undirected(a, b) && (has_directed(a, b) || has_directed(b, a))) {
                throw std::invalid_argument("edge is both directed and undirected");
            }
        }
    }
}

Cpdag Cpdag::from_dag(const Dag& dag) {
    return Cpdag(dag.parent_sets(), std::vector<NodeSet>(dag.size(), 0));
}

NodeSet Cpdag::children(int v) const {
    NodeSet out = 0;
    for (int w = 0; w < size(); ++w) {
        if (has_directed(v, w)) out |= bit(w);
    }
    return out;
}

std::vector<Arc> Cpdag::directed_edges() const {
    std::vector<Arc> out;
    for (int a = 0; a < size(); ++a) {
        for (int b = 0; b < size(); ++b) {
            if (has_directed(a, b)) out.push_back({a, b});
        }
    }
    return out;
}

std::vector<Arc> Cpdag::undirected_edges() const {
    std::vector<Arc> out;
    for (int a = 0; a < size(); ++a) {
        for (int b = a + 1; b < size(); ++b) {
            if (has_undirected(a, b)) out.push_back({a, b});
        }
    }
    return out;
}

int Cpdag::edge_count() const {
    int k = 0;
    for (int v = 0; v < size(); ++v) k += std::popcount(parents_[v]) * 2 + std::popcount(undirected_[v]);
    return k / 2;
}

// ---------------------------------------------------------------- queries

bool is_acyclic(std::span<const NodeSet> parents) {
    const int n = static_cast<int>(parents.size());
    NodeSet placed = 0;
    for (int round = 0; round < n; ++round) {
        bool progressed = false;
        for (int v = 0; v < n; ++v) {
            if (((placed >> v) & 1U) == 0 && (parents[v] & ~placed) == 0) {
                placed |= bit(v);
                progressed = true;
            }
        }
        if (!progressed) break;
    }
    return std::popcount(placed) == n;
}

bool is_acyclic(std::span<const Arc> arcs, int n) {
    for (const Arc& a : arcs) {
        if (a.from == a.to) return false;
    }
    return is_acyclic(parents_from_arcs(arcs, n));
}

NodeSet directed_descendants(std::span<const NodeSet> parents, int from) {
    const auto children = children_of(parents);
    NodeSet seen = 0;
    NodeSet frontier = children[from];
    while (frontier != 0) {
        const int v = std::countr_zero(frontier);
        frontier &= frontier - 1;
        if ((seen >> v) & 1U) continue;
        seen |= bit(v);
        frontier |= children[v] & ~seen;
    }
    return seen;
}

bool has_directed_path(const Dag& g, int from, int to) {
    if (from == to) throw std::invalid_argument("path query needs distinct endpoints");
    return (directed_descendants(g.parent_sets(), from) >> to) & 1U;
}

bool has_directed_path(const Cpdag& g, int from, int to) {
    if (from == to) throw std::invalid_argument("path query needs distinct endpoints");
    return (directed_descendants(g.directed_parent_sets(), from) >> to) & 1U;
}

std::vector<VStructure> v_structures(const Dag& dag) {
    std::vector<VStructure> out;
    for (int c = 0; c < dag.size(); ++c) {
        const NodeSet pa = dag.parents(c);
        for_each_node(pa, [&](int a) {
            for_each_node(pa & ~(bit(a + 1) - 1), [&](int b) {
                if (!dag.has_arc(a, b) && !dag.has_arc(b, a)) out.push_back({a, b, c});
            });
        });
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------- repair

Dag repair_to_dag(std::vector<NodeSet> parents, const ConstraintMask& mask, Rng& rng) {
    if (static_cast<int>(parents.size()) != mask.size()) {
        throw std::invalid_argument("mask size does not match graph");
    }
    for (int v = 0; v < mask.size(); ++v) parents[v] &= mask.allowed_parents(v);
    for (;;) {
        const auto cycle = find_cycle(parents);
        if (cycle.empty()) break;
        std::uniform_int_distribution<std::size_t> pick(0, cycle.size() - 1);
        const Arc drop = cycle[pick(rng)];
        parents[drop.to] &= ~bit(drop.from);
    }
    return Dag::from_parent_sets(std::move(parents));
}

Dag repair_to_dag(std::span<const Arc> arcs, int n, const ConstraintMask& mask, Rng& rng) {
    return repair_to_dag(parents_from_arcs(arcs, n), mask, rng);
}

// ---------------------------------------------------------------- conversion

Cpdag meek_closure(Cpdag pdag) {
    const int n = pdag.size();
    std::vector<NodeSet> pa = pdag.directed_parent_sets();
    std::vector<NodeSet> und = pdag.undirected_sets();
    auto directed = [&](int a, int b) { return ((pa[b] >> a) & 1U) != 0; };
    auto adjacent = [&](int a, int b) {
        return directed(a, b) || directed(b, a) || ((und[a] >> b) & 1U) != 0;
    };
    auto children = [&](int a) {
        NodeSet out = 0;
        for (int w = 0; w < n; ++w) {
            if (directed(a, w)) out |= bit(w);
        }
        return out;
    };
    auto adjacency = [&](int a) { return pa[a] | children(a) | und[a]; };

    // Whether some rule forces a -> b for the undirected edge a - b.
    auto forced = [&](int a, int b) {
        // R1: c -> a - b, c and b non-adjacent.
        for (NodeSet s = pa[a]; s; s &= s - 1) {
            const int c = std::countr_zero(s);
            if (!adjacent(c, b)) return true;
        }
        // R2: a -> c -> b.
        if ((children(a) & pa[b]) != 0) return true;
        // R3: a - c -> b, a - d -> b, c and d non-adjacent.
        const NodeSet mid = und[a] & pa[b];
        for (NodeSet s = mid; s; s &= s - 1) {
            const int c = std::countr_zero(s);
            for (NodeSet t = s & (s - 1); t; t &= t - 1) {
                const int d = std::countr_zero(t);
                if (!adjacent(c, d)) return true;
            }
        }
        // R4: c -> d -> b with a adjacent to both c and d, c and b non-adjacent.
        const NodeSet adj_a = adjacency(a);
        for (NodeSet s = pa[b] & adj_a; s; s &= s - 1) {
            const int d = std::countr_zero(s);
            for (NodeSet t = pa[d] & adj_a; t; t &= t - 1) {
                const int c = std::countr_zero(t);
                if (c != b && !adjacent(c, b)) return true;
            }
        }
        return false;
    };

    bool changed = true;
    while (changed) {
        changed = false;
        for (int a = 0; a < n; ++a) {
            for (NodeSet s = und[a]; s; s &= s - 1) {
                const int b = std::countr_zero(s);
                if (forced(a, b)) {
                    und[a] &= ~bit(b);
                    und[b] &= ~bit(a);
                    pa[b] |= bit(a);
                    changed = true;
                }
            }
        }
    }
    return Cpdag(std::move(pa), std::move(und));
}

Cpdag dag_to_cpdag(const Dag& dag, const ConstraintMask& mask) {
    const int n = dag.size();
    if (mask.size() != n) throw std::invalid_argument("mask size does not match graph");
    for (int v = 0; v < n; ++v) {
        const NodeSet bad = dag.parents(v) & ~mask.allowed_parents(v);
        if (bad != 0) {
            throw ConstraintViolation("DAG contains forbidden arc " + std::to_string(std::countr_zero(bad)) +
                                      " -> " + std::to_string(v));
        }
    }

    const auto order = dag.topological_order();
    std::vector<int> pos(n);
    for (int i = 0; i < n; ++i) pos[order[i]] = i;

    // Edge ordering: by head in topological order, tails highest-first.
    std::vector<Arc> edges;
    for (int y : order) {
        std::vector<int> tails;
        for_each_node(dag.parents(y), [&](int x) { tails.push_back(x); });
        std::sort(tails.begin(), tails.end(), [&](int l, int r) { return pos[l] > pos[r]; });
        for (int x : tails) edges.push_back({x, y});
    }

    enum : std::uint8_t { kUnknown, kCompelled, kReversible };
    std::vector<std::uint8_t> label(static_cast<std::size_t>(n) * n, kUnknown);
    auto at = [&](int x, int y) -> std::uint8_t& { return label[static_cast<std::size_t>(x) * n + y]; };
    auto label_unknown_into = [&](int y, std::uint8_t value) {
        for_each_node(dag.parents(y), [&](int z) {
            if (at(z, y) == kUnknown) at(z, y) = value;
        });
    };

    for (const Arc& e : edges) {
        const int x = e.from;
        const int y = e.to;
        if (at(x, y) != kUnknown) continue;
        bool done = false;
        for (NodeSet s = dag.parents(x); s && !done; s &= s - 1) {
            const int w = std::countr_zero(s);
            if (at(w, x) != kCompelled) continue;
            if (!dag.has_arc(w, y)) {
                for_each_node(dag.parents(y), [&](int z) { at(z, y) = kCompelled; });
                done = true;
            } else {
                at(w, y) = kCompelled;
            }
        }
        if (done) continue;
        const NodeSet others = dag.parents(y) & ~bit(x) & ~dag.parents(x);
        if (others != 0) {
            at(x, y) = kCompelled;
            label_unknown_into(y, kCompelled);
        } else {
            at(x, y) = kReversible;
            label_unknown_into(y, kReversible);
        }
    }

    std::vector<NodeSet> pa(n, 0);
    std::vector<NodeSet> und(n, 0);
    bool forced_by_mask = false;
    for (const Arc& e : edges) {
        if (at(e.from, e.to) == kCompelled || mask.forbids(e.to, e.from)) {
            forced_by_mask |= at(e.from, e.to) != kCompelled;
            pa[e.to] |= bit(e.from);
        } else {
            und[e.from] |= bit(e.to);
            und[e.to] |= bit(e.from);
        }
    }
    Cpdag out(std::move(pa), std::move(und));
    if (forced_by_mask) out = meek_closure(std::move(out));

    for (const Arc& e : out.directed_edges()) {
        if (mask.forbids(e.from, e.to)) {
            throw ConstraintViolation("constraints are unsatisfiable within the equivalence class");
        }
    }
    return out;
}

Cpdag dag_to_cpdag(const Dag& dag) { return dag_to_cpdag(dag, ConstraintMask(dag.size())); }

// ---------------------------------------------------------------- enumeration

std::vector<Dag> enumerate_extensions(const Cpdag& cpdag, const ConstraintMask& mask, std::size_t cap) {
    const int n = cpdag.size();
    if (mask.size() != n) throw std::invalid_argument("mask size does not match graph");

    std::vector<NodeSet> parents = cpdag.directed_parent_sets();
    for (int v = 0; v < n; ++v) {
        if ((parents[v] & ~mask.allowed_parents(v)) != 0 || !is_acyclic(parents)) {
            throw NoExtension("directed part of the class is infeasible");
        }
    }
    const auto base_v = v_structures(Dag::from_parent_sets(parents));
    const auto edges = cpdag.undirected_edges();
    std::vector<Dag> out;

    auto creates_new_v = [&](int from, int to) {
        for (NodeSet s = parents[to] & ~bit(from); s; s &= s - 1) {
            const int u = std::countr_zero(s);
            if (cpdag.is_adjacent(u, from)) continue;
            const VStructure v{std::min(u, from), std::max(u, from), to};
            if (!std::binary_search(base_v.begin(), base_v.end(), v)) return true;
        }
        return false;
    };

    auto recurse = [&](auto&& self, std::size_t i) -> void {
        if (i == edges.size()) {
            out.push_back(Dag::from_parent_sets(parents));
            if (out.size() > cap) {
                throw ExtensionCapExceeded("equivalence class has more than " + std::to_string(cap) + " members");
            }
            return;
        }
        const Arc e = edges[i];
        for (const Arc& o : {Arc{e.from, e.to}, Arc{e.to, e.from}}) {
            if (mask.forbids(o.from, o.to)) continue;
            if ((directed_descendants(parents, o.to) >> o.from) & 1U) continue;
            if (creates_new_v(o.from, o.to)) continue;
            parents[o.to] |= bit(o.from);
            self(self, i + 1);
            parents[o.to] &= ~bit(o.from);
        }
    };
    recurse(recurse, 0);

    if (out.empty()) throw NoExtension("no consistent extension respects the constraints");
    return out;
}

// ---------------------------------------------------------------- export

std::vector<std::string> default_labels(int n) {
    std::vector<std::string> labels;
    for (int i = 0; i < n; ++i) labels.push_back("X" + std::to_string(i));
    return labels;
}

namespace {

std::string quoted(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

std::string dot_body(int n, std::span<const std::string> labels, const std::vector<Arc>& directed,
                     const std::vector<Arc>& undirected) {
    const auto fallback = default_labels(n);
    auto name = [&](int v) { return quoted(v < static_cast<int>(labels.size()) ? labels[v] : fallback[v]); };
    std::ostringstream os;
    os << "digraph G {\n";
    for (int v = 0; v < n; ++v) os << "  " << name(v) << ";\n";
    for (const Arc& a : directed) os << "  " << name(a.from) << " -> " << name(a.to) << ";\n";
    for (const Arc& a : undirected) os << "  " << name(a.from) << " -> " << name(a.to) << " [dir=none];\n";
    os << "}\n";
    return os.str();
}

}  // namespace

std::string to_dot(const Dag& dag, std::span<const std::string> labels) {
    return dot_body(dag.size(), labels, dag.arcs(), {});
}

std::string to_dot(const Cpdag& cpdag, std::span<const std::string> labels) {
    return dot_body(cpdag.size(), labels, cpdag.directed_edges(), cpdag.undirected_edges());
}

}  // namespace s3
