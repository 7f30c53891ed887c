// OpenMP kernels against their serial references.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "s3/longitudinal.hpp"
#include "s3/nsga2.hpp"
#include "s3/sem.hpp"
#include "s3/simulate.hpp"
#include "s3/stability.hpp"

namespace {

using namespace s3;

struct Fixture {
    TransitionFrame frame;
    ConstraintMask mask;
    SampleMoments moments;
    std::vector<Subsample> subsets;
    std::vector<Dag> population;
};

const Fixture& fixture() {
    static const Fixture f = [] {
        Fixture out;
        Rng rng(1);
        const auto model = random_parameterization(reference_structure(), rng);
        out.frame = reshape(generate_data(model, 400, rng));
        out.mask = transition_mask(out.frame, {});
        const Dataset data = out.frame.to_dataset();
        out.moments = sample_moments(data);
        out.subsets = subsample(data, 16, rng);
        const Chromosome empty(out.mask);
        for (int i = 0; i < 300; ++i) {
            Chromosome c = empty;
            flip_bits(c, 0.3, rng);
            out.population.push_back(c.repaired(rng).second);
        }
        return out;
    }();
    return f;
}

SearchParams params() {
    SearchParams p;
    p.generations = 10;
    return p;
}

void BM_ScorePopulationSerial(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(score_population_serial(f.population, f.moments));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.population.size()));
}

void BM_ScorePopulation(benchmark::State& state) {
    const auto& f = fixture();
    omp_set_num_threads(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(score_population(f.population, f.moments));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.population.size()));
}

void BM_RunSearchesSerial(benchmark::State& state) {
    const auto& f = fixture();
    for (auto _ : state) benchmark::DoNotOptimize(run_searches_serial(f.subsets, f.mask, params()));
}

void BM_RunSearches(benchmark::State& state) {
    const auto& f = fixture();
    omp_set_num_threads(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(run_searches(f.subsets, f.mask, params()));
}

}  // namespace

BENCHMARK(BM_ScorePopulationSerial);
BENCHMARK(BM_ScorePopulation)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->UseRealTime();
BENCHMARK(BM_RunSearchesSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunSearches)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->UseRealTime()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
