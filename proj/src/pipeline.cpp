#include "s3/pipeline.hpp"

#include <algorithm>
#include <set>

#include "s3/error.hpp"

namespace s3 {

PipelineResult run_pipeline(const Dataset& full, std::span<const Subsample> subsets, const ConstraintMask& mask,
                            const PipelineOptions& options) {
    if (full.cols() != mask.size()) throw ShapeMismatch("dataset and mask disagree on the number of variables");
    if (!(options.pi_sel >= 0.0 && options.pi_sel <= 1.0)) throw ConfigError("pi_sel must lie in [0, 1]");
    PipelineResult r;
    r.labels = full.names;
    r.mask = mask;
    r.runs = options.parallel ? run_searches(subsets, mask, options.search)
                              : run_searches_serial(subsets, mask, options.search);
    for (const auto& run : r.runs) {
        if (!run.ok) r.notes.push_back("subset " + std::to_string(run.index) + " failed: " + run.error);
    }
    const int n = mask.size();
    r.edge = edge_stability(r.runs, n);
    r.path = causal_path_stability(r.runs, n);
    r.mean_bic = mean_bic_by_complexity(r.runs);
    r.thresholds = {options.pi_sel, argmin_mean_bic(r.mean_bic)};
    r.relevant = relevant_structures(r.edge, r.path, r.thresholds);

    std::vector<RelevantStructure> edges;
    std::vector<RelevantStructure> paths;
    for (const auto& s : r.relevant) (s.kind == StructureKind::edge ? edges : paths).push_back(s);
    r.graph = assemble_graph(edges, paths, mask);
    r.notes.insert(r.notes.end(), r.graph.notes.begin(), r.graph.notes.end());

    std::set<Arc> pairs;
    for (const auto& s : paths) pairs.insert(s.key);
    for (const auto& e : r.graph.edges) {
        if (e.directed) pairs.insert({e.from, e.to});
    }
    const std::vector<Arc> pair_list(pairs.begin(), pairs.end());
    r.effects = aggregate_effects(r.runs, r.thresholds.pi_bic, pair_list, full, mask, options.extension_cap);
    if (!r.effects.empty() && r.effects.front().fallback) {
        r.notes.push_back("no model at complexity " + std::to_string(r.thresholds.pi_bic) +
                          "; effects use complexity " + std::to_string(r.effects.front().complexity_used));
    }
    for (auto& e : r.graph.edges) {
        if (!e.directed) continue;
        const auto it = std::find_if(r.effects.begin(), r.effects.end(),
                                     [&](const auto& x) { return x.source == e.from && x.target == e.to; });
        if (it != r.effects.end()) e.effect = it->standardized.value_or(it->median);
    }
    return r;
}

PipelineResult s3c_run(const Dataset& data, const ConstraintMask& mask, const PipelineOptions& options) {
    if (options.n_subsets < 2) throw ConfigError("at least 2 subsets are required");
    Rng rng(derive_seed(options.search.seed, kSubsampleStream));
    const auto subsets = subsample(data, options.n_subsets, rng);
    return run_pipeline(data, subsets, mask, options);
}

}  // namespace s3
