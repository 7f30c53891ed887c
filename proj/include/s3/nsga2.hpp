#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "s3/graph.hpp"
#include "s3/rng.hpp"
#include "s3/sem.hpp"

namespace s3 {

struct SearchParams {
    int generations = 35;
    int population_size = 150;
    double p_crossover = 0.85;
    double p_mutation = 0.07;
    std::uint64_t seed = 1;

    /// Throws ConfigError unless probabilities lie in [0, 1] and the
    /// population size is even and at least 4.
    void validate() const;
};

/// Both objectives are minimized.
struct Objectives {
    double chi_square = 0.0;
    int complexity = 0;
};

/// a <= b componentwise and a < b in at least one objective. A structure
/// with infinite chi-square never dominates.
bool dominates(const Objectives& a, const Objectives& b);

/// Bit string over all ordered pairs; position (a, b) holds arc a -> b.
/// Forbidden positions are always clear.
class Chromosome {
public:
    explicit Chromosome(const ConstraintMask& mask);
    static Chromosome from_dag(const Dag& dag, const ConstraintMask& mask);

    int nodes() const { return mask_->size(); }
    std::size_t length() const { return bits_.size(); }
    bool test(std::size_t i) const { return bits_[i] != 0; }
    /// Setting a forbidden position is a no-op.
    void set(std::size_t i, bool value);
    std::size_t position(int from, int to) const;
    Arc arc_at(std::size_t i) const;
    const ConstraintMask& mask() const { return *mask_; }

    /// Raw parent sets; may contain cycles until repaired.
    std::vector<NodeSet> parent_sets() const;
    /// Repairs cycles and returns the repaired chromosome with its DAG.
    std::pair<Chromosome, Dag> repaired(Rng& rng) const;

    bool operator==(const Chromosome& other) const { return bits_ == other.bits_; }

private:
    const ConstraintMask* mask_;
    std::vector<std::uint8_t> bits_;
};

struct Individual {
    Chromosome chromosome;
    Dag dag;
    Objectives objectives;
    int rank = 0;
    double crowding = 0.0;
};

/// Fronts of indices into `objectives`; front 0 is the non-dominated set.
std::vector<std::vector<std::size_t>> fast_nondominated_sort(std::span<const Objectives> objectives);
/// Same, assigning Individual::rank.
std::vector<std::vector<std::size_t>> fast_nondominated_sort(std::span<Individual> population);

/// Crowding distance of each member of one front: boundary members per
/// objective get +inf, interior members the sum of normalized neighbour gaps.
std::vector<double> crowding_distance(std::span<const Objectives> front);
void assign_crowding(std::span<Individual> population, std::span<const std::size_t> front);

/// Lower rank wins, then larger crowding, then a fair coin.
std::size_t tournament_winner(std::span<const Individual> population, std::size_t a, std::size_t b, Rng& rng);
/// Draws two members uniformly (with replacement) and returns the winner's index.
std::size_t binary_tournament(std::span<const Individual> population, Rng& rng);

/// Uniform crossover applied with probability `p_crossover`, otherwise the
/// parents are copied. Children are repaired.
std::pair<Chromosome, Chromosome> crossover(const Chromosome& a, const Chromosome& b, double p_crossover, Rng& rng);

/// Flips every allowed bit independently with probability `rate`; returns
/// the number of flips. No repair.
std::size_t flip_bits(Chromosome& c, double rate, Rng& rng);
/// With probability `p_mutation`, flips bits at rate 1 / (p(p - 1)), then repairs.
Chromosome mutate(const Chromosome& c, double p_mutation, Rng& rng);

struct ParetoModel {
    Dag dag;
    Cpdag cpdag;
    FitResult fit;
};

/// Pareto models ordered by complexity, at most one per complexity level.
using ParetoSet = std::vector<ParetoModel>;

/// Complete mask-respecting DAG used to seed the population: the reference
/// for the maximum attainable complexity.
Dag full_admissible_dag(const ConstraintMask& mask);

/// NSGA-II over DAG structures minimizing (chi-square, complexity). Returns
/// front 0 of the final population, one best-fit model per complexity.
/// The initial population holds the empty DAG, the full admissible DAG and
/// random members with arc densities spread evenly over (0, 1).
ParetoSet evolve(const SampleMoments& moments, const ConstraintMask& mask, const SearchParams& params);

}  // namespace s3
