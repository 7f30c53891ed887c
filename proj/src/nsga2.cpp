#include "s3/nsga2.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "s3/error.hpp"

namespace s3 {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ParentSetsHash {
    std::size_t operator()(const std::vector<NodeSet>& v) const {
        std::uint64_t h = v.size();
        for (NodeSet x : v) h = mix64(h ^ x);
        return static_cast<std::size_t>(h);
    }
};

}  // namespace

void SearchParams::validate() const {
    if (generations < 0) throw ConfigError("generations must be non-negative");
    if (population_size < 4 || population_size % 2 != 0) {
        throw ConfigError("population size must be even and at least 4");
    }
    if (!(p_crossover >= 0.0 && p_crossover <= 1.0) || !(p_mutation >= 0.0 && p_mutation <= 1.0)) {
        throw ConfigError("operator probabilities must lie in [0, 1]");
    }
}

bool dominates(const Objectives& a, const Objectives& b) {
    if (!std::isfinite(a.chi_square)) return false;
    const bool no_worse = a.chi_square <= b.chi_square && a.complexity <= b.complexity;
    const bool better = a.chi_square < b.chi_square || a.complexity < b.complexity;
    return no_worse && better;
}

// ---------------------------------------------------------------- Chromosome

Chromosome::Chromosome(const ConstraintMask& mask)
    : mask_(&mask), bits_(static_cast<std::size_t>(mask.size()) * std::max(mask.size() - 1, 0), 0) {}

Chromosome Chromosome::from_dag(const Dag& dag, const ConstraintMask& mask) {
    if (dag.size() != mask.size()) throw std::invalid_argument("mask size does not match graph");
    Chromosome c(mask);
    for (const Arc& a : dag.arcs()) c.set(c.position(a.from, a.to), true);
    return c;
}

std::size_t Chromosome::position(int from, int to) const {
    const int n = nodes();
    return static_cast<std::size_t>(from) * (n - 1) + static_cast<std::size_t>(to < from ? to : to - 1);
}

Arc Chromosome::arc_at(std::size_t i) const {
    const int n = nodes();
    const int from = static_cast<int>(i / (n - 1));
    const int r = static_cast<int>(i % (n - 1));
    return {from, r < from ? r : r + 1};
}

void Chromosome::set(std::size_t i, bool value) {
    const Arc a = arc_at(i);
    if (value && mask_->forbids(a.from, a.to)) return;
    bits_[i] = value ? 1 : 0;
}

std::vector<NodeSet> Chromosome::parent_sets() const {
    std::vector<NodeSet> parents(nodes(), 0);
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) {
            const Arc a = arc_at(i);
            parents[a.to] |= bit(a.from);
        }
    }
    return parents;
}

std::pair<Chromosome, Dag> Chromosome::repaired(Rng& rng) const {
    Dag dag = repair_to_dag(parent_sets(), *mask_, rng);
    return {from_dag(dag, *mask_), std::move(dag)};
}

// ---------------------------------------------------------------- sorting

std::vector<std::vector<std::size_t>> fast_nondominated_sort(std::span<const Objectives> obj) {
    const std::size_t n = obj.size();
    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> counts(n, 0);
    std::vector<std::vector<std::size_t>> fronts(1);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(obj[p], obj[q])) {
                dominated[p].push_back(q);
            } else if (dominates(obj[q], obj[p])) {
                ++counts[p];
            }
        }
        if (counts[p] == 0) fronts[0].push_back(p);
    }
    for (std::size_t i = 0; !fronts[i].empty(); ++i) {
        std::vector<std::size_t> next;
        for (std::size_t p : fronts[i]) {
            for (std::size_t q : dominated[p]) {
                if (--counts[q] == 0) next.push_back(q);
            }
        }
        std::sort(next.begin(), next.end());
        fronts.push_back(std::move(next));
    }
    fronts.pop_back();
    return fronts;
}

std::vector<std::vector<std::size_t>> fast_nondominated_sort(std::span<Individual> population) {
    std::vector<Objectives> obj;
    obj.reserve(population.size());
    for (const auto& ind : population) obj.push_back(ind.objectives);
    auto fronts = fast_nondominated_sort(obj);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
        for (std::size_t i : fronts[r]) population[i].rank = static_cast<int>(r);
    }
    return fronts;
}

std::vector<double> crowding_distance(std::span<const Objectives> front) {
    const std::size_t m = front.size();
    std::vector<double> d(m, 0.0);
    if (m <= 2) {
        std::fill(d.begin(), d.end(), kInf);
        return d;
    }
    auto accumulate = [&](auto value) {
        std::vector<std::size_t> idx(m);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto l, auto r) { return value(front[l]) < value(front[r]); });
        d[idx.front()] = kInf;
        d[idx.back()] = kInf;
        const double range = value(front[idx.back()]) - value(front[idx.front()]);
        if (!(range > 0.0)) return;
        for (std::size_t i = 1; i + 1 < m; ++i) {
            double gap = (value(front[idx[i + 1]]) - value(front[idx[i - 1]])) / range;
            if (std::isnan(gap)) gap = kInf;
            d[idx[i]] += gap;
        }
    };
    accumulate([](const Objectives& o) { return o.chi_square; });
    accumulate([](const Objectives& o) { return static_cast<double>(o.complexity); });
    return d;
}

void assign_crowding(std::span<Individual> population, std::span<const std::size_t> front) {
    std::vector<Objectives> obj;
    obj.reserve(front.size());
    for (std::size_t i : front) obj.push_back(population[i].objectives);
    const auto d = crowding_distance(obj);
    for (std::size_t k = 0; k < front.size(); ++k) population[front[k]].crowding = d[k];
}

// ---------------------------------------------------------------- operators

std::size_t tournament_winner(std::span<const Individual> population, std::size_t a, std::size_t b, Rng& rng) {
    const auto& x = population[a];
    const auto& y = population[b];
    if (x.rank != y.rank) return x.rank < y.rank ? a : b;
    if (x.crowding != y.crowding) return x.crowding > y.crowding ? a : b;
    return std::uniform_int_distribution<int>(0, 1)(rng) == 0 ? a : b;
}

std::size_t binary_tournament(std::span<const Individual> population, Rng& rng) {
    if (population.empty()) throw std::invalid_argument("tournament over an empty population");
    std::uniform_int_distribution<std::size_t> pick(0, population.size() - 1);
    const std::size_t a = pick(rng);
    const std::size_t b = pick(rng);
    return tournament_winner(population, a, b, rng);
}

std::pair<Chromosome, Chromosome> crossover(const Chromosome& a, const Chromosome& b, double p_crossover, Rng& rng) {
    if (!(a.mask() == b.mask())) throw std::invalid_argument("parents disagree on the constraint mask");
    if (!coin(rng, p_crossover)) return {a, b};
    Chromosome c1 = a;
    Chromosome c2 = b;
    for (std::size_t i = 0; i < a.length(); ++i) {
        if (coin(rng, 0.5)) {
            c1.set(i, b.test(i));
            c2.set(i, a.test(i));
        }
    }
    return {c1.repaired(rng).first, c2.repaired(rng).first};
}

std::size_t flip_bits(Chromosome& c, double rate, Rng& rng) {
    std::size_t flips = 0;
    for (std::size_t i = 0; i < c.length(); ++i) {
        const Arc a = c.arc_at(i);
        if (c.mask().forbids(a.from, a.to)) continue;
        if (coin(rng, rate)) {
            c.set(i, !c.test(i));
            ++flips;
        }
    }
    return flips;
}

Chromosome mutate(const Chromosome& c, double p_mutation, Rng& rng) {
    if (c.length() == 0 || !coin(rng, p_mutation)) return c;
    Chromosome out = c;
    flip_bits(out, 1.0 / static_cast<double>(c.length()), rng);
    return out.repaired(rng).first;
}

// ---------------------------------------------------------------- search

Dag full_admissible_dag(const ConstraintMask& mask) {
    const int n = mask.size();
    std::vector<NodeSet> forced(n, 0);
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a != b && mask.allows(a, b) && mask.forbids(b, a)) forced[b] |= bit(a);
        }
    }
    std::vector<NodeSet> parents(n, 0);
    if (is_acyclic(forced)) {
        const auto order = Dag::from_parent_sets(forced).topological_order();
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (mask.allows(order[i], order[j])) parents[order[j]] |= bit(order[i]);
            }
        }
        return Dag::from_parent_sets(std::move(parents));
    }
    for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b) {
            if (mask.allows(a, b)) {
                parents[b] |= bit(a);
            } else if (mask.allows(b, a)) {
                parents[a] |= bit(b);
            }
        }
    }
    Rng rng(0);
    return repair_to_dag(std::move(parents), mask, rng);
}

ParetoSet evolve(const SampleMoments& moments, const ConstraintMask& mask, const SearchParams& params) {
    params.validate();
    const int p = mask.size();
    if (p != moments.dim()) throw ShapeMismatch("mask and covariance disagree on the number of variables");
    const auto pop_size = static_cast<std::size_t>(params.population_size);

    Rng rng(params.seed);
    std::unordered_map<std::vector<NodeSet>, Score, ParentSetsHash> cache;
    auto make = [&](Chromosome c, Dag dag) {
        auto it = cache.find(dag.parent_sets());
        if (it == cache.end()) it = cache.emplace(dag.parent_sets(), score_dag(dag, moments)).first;
        Objectives obj{it->second.chi_square, it->second.complexity};
        return Individual{std::move(c), std::move(dag), obj, 0, 0.0};
    };

    std::vector<Individual> population;
    population.reserve(2 * pop_size);
    population.push_back(make(Chromosome(mask), Dag(p)));
    if (p >= 2) {
        const Dag full = full_admissible_dag(mask);
        population.push_back(make(Chromosome::from_dag(full, mask), full));
        // Member k of the m random members sets bits at rate (k + 1) / (m + 1).
        const std::size_t m = pop_size - population.size();
        for (std::size_t k = 0; k < m; ++k) {
            const double rate = static_cast<double>(k + 1) / static_cast<double>(m + 1);
            Chromosome c(mask);
            for (std::size_t i = 0; i < c.length(); ++i) {
                if (coin(rng, rate)) c.set(i, true);
            }
            auto [fixed, dag] = c.repaired(rng);
            population.push_back(make(std::move(fixed), std::move(dag)));
        }
    }
    for (const auto& front : fast_nondominated_sort(population)) assign_crowding(population, front);

    for (int g = 0; g < params.generations && p >= 2; ++g) {
        std::vector<Individual> combined = population;
        while (combined.size() < population.size() + pop_size) {
            const auto& a = population[binary_tournament(population, rng)].chromosome;
            const auto& b = population[binary_tournament(population, rng)].chromosome;
            auto [c1, c2] = crossover(a, b, params.p_crossover, rng);
            for (Chromosome* child : {&c1, &c2}) {
                Chromosome m = mutate(*child, params.p_mutation, rng);
                Dag dag = Dag::from_parent_sets(m.parent_sets());
                combined.push_back(make(std::move(m), std::move(dag)));
            }
        }
        std::vector<Individual> next;
        next.reserve(2 * pop_size);
        for (const auto& front : fast_nondominated_sort(combined)) {
            assign_crowding(combined, front);
            if (next.size() + front.size() <= pop_size) {
                for (std::size_t i : front) next.push_back(combined[i]);
                continue;
            }
            std::vector<std::size_t> order(front.begin(), front.end());
            std::stable_sort(order.begin(), order.end(),
                             [&](auto l, auto r) { return combined[l].crowding > combined[r].crowding; });
            for (std::size_t k = 0; next.size() < pop_size; ++k) next.push_back(combined[order[k]]);
            break;
        }
        population = std::move(next);
    }

    // One best-fit model per complexity; distinct complexities imply distinct classes.
    std::map<int, const Individual*> best;
    for (const auto& ind : population) {
        if (ind.rank != 0) continue;
        auto [it, inserted] = best.emplace(ind.objectives.complexity, &ind);
        if (!inserted && ind.objectives.chi_square < it->second->objectives.chi_square) it->second = &ind;
    }
    ParetoSet out;
    for (const auto& [complexity, ind] : best) {
        FitResult fit;
        try {
            fit = fit_dag_ml(ind->dag, moments);
        } catch (const DegenerateData&) {
            fit.complexity = complexity;
            fit.chi_square = kInf;
            fit.bic = kInf;
        }
        out.push_back({ind->dag, dag_to_cpdag(ind->dag, mask), std::move(fit)});
    }
    return out;
}

}  // namespace s3
