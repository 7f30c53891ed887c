#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "run_config.hpp"
#include "run_io.hpp"
#include "s3/error.hpp"
#include "s3/longitudinal.hpp"
#include "s3/pipeline.hpp"
#include "s3/simulate.hpp"

namespace fs = std::filesystem;
using namespace s3;
using namespace s3::cli;

namespace {

constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;
constexpr int kSearchExit = 4;

bool quiet = false;

void log(const std::string& message) {
    if (!quiet) std::cerr << "[s3] " << message << '\n';
}

/// Flags that override the config file. Unset flags leave the file's value.
struct Overrides {
    std::string config;
    std::optional<std::string> data, layout, prior, kinds, out;
    std::optional<int> subsets, generations, population, threads;
    std::optional<double> p_crossover, p_mutation, pi_sel;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> extension_cap;
    bool row_subsampling = false;

    void attach(CLI::App& app, bool longitudinal) {
        app.add_option("--config", config, "JSON run config");
        app.add_option("--data", data, "data CSV");
        if (longitudinal) {
            app.add_option("--layout", layout, "slice layout JSON");
            app.add_flag("--row-subsampling", row_subsampling, "subsample reshaped rows instead of subjects");
        }
        app.add_option("--prior", prior, "forbidden intra-slice arcs JSON");
        app.add_option("--kinds", kinds, "column kinds JSON");
        app.add_option("--out", out, "output directory");
        app.add_option("--subsets", subsets, "number of subsets");
        app.add_option("--generations", generations, "NSGA-II generations");
        app.add_option("--population", population, "NSGA-II population size");
        app.add_option("--p-crossover", p_crossover, "crossover probability");
        app.add_option("--p-mutation", p_mutation, "mutation probability");
        app.add_option("--pi-sel", pi_sel, "selection-probability threshold");
        app.add_option("--seed", seed, "master seed");
        app.add_option("--threads", threads, "worker threads (0 = OpenMP default)");
        app.add_option("--extension-cap", extension_cap, "maximum DAGs enumerated per class");
    }

    RunConfig resolve() const {
        RunConfig c = config.empty() ? RunConfig{} : read_config(config);
        if (data) c.data = *data;
        if (layout) c.layout = *layout;
        if (prior) c.prior = *prior;
        if (kinds) c.kinds = *kinds;
        if (out) c.out = *out;
        if (subsets) c.subsets = *subsets;
        if (generations) c.generations = *generations;
        if (population) c.population = *population;
        if (threads) c.threads = *threads;
        if (p_crossover) c.p_crossover = *p_crossover;
        if (p_mutation) c.p_mutation = *p_mutation;
        if (pi_sel) c.pi_sel = *pi_sel;
        if (seed) c.seed = *seed;
        if (extension_cap) c.extension_cap = *extension_cap;
        if (row_subsampling) c.row_subsampling = true;
        return c;
    }
};

void apply_threads(int threads) {
    if (threads > 0) omp_set_num_threads(threads);
}

void report(const PipelineResult& r, const fs::path& dir) {
    log("pi_bic = " + std::to_string(r.thresholds.pi_bic) + ", " + std::to_string(r.relevant.size()) +
        " relevant structures, outputs in " + dir.string());
    for (const auto& note : r.notes) log("note: " + note);
}

int cmd_search(const Overrides& o) {
    const RunConfig c = o.resolve();
    validate(c, false);
    apply_threads(c.threads);
    const Dataset data = load_dataset(c.data, c.kinds);
    const auto prior = c.prior.empty() ? std::vector<PriorArc>{} : read_prior(c.prior);
    const ConstraintMask mask = intra_mask(data.names, prior);
    const auto options = c.pipeline(50);
    log("searching " + std::to_string(options.n_subsets) + " subsets of " + std::to_string(data.rows() / 2) +
        " rows over " + std::to_string(data.cols()) + " variables");
    const auto r = s3c_run(data, mask, options);
    write_run(c.out, r, c, RunModel::cross_sectional, "search");
    report(r, c.out);
    return 0;
}

int cmd_search_longitudinal(const Overrides& o) {
    const RunConfig c = o.resolve();
    validate(c, true);
    apply_threads(c.threads);
    const auto prior = c.prior.empty() ? std::vector<PriorArc>{} : read_prior(c.prior);
    const auto data = load_longitudinal(c.data, c.layout, c.kinds);
    if (data.slices() < 2) throw ShapeMismatch("a transition model needs at least two slices");
    // Validate the prior against both masks before any search runs.
    (void)transition_mask(reshape(data.select_subjects(std::vector<int>{0})), prior);
    LongitudinalOptions options;
    options.pipeline = c.pipeline(100);
    options.subject_subsampling = !c.row_subsampling;

    log("baseline model: " + std::to_string(data.subjects()) + " subjects");
    const auto baseline = s3l_baseline(data, prior, options);
    write_run(c.out / "baseline", baseline, c, RunModel::baseline, "search-longitudinal");
    report(baseline, c.out / "baseline");

    log("transition model: " + std::to_string(data.subjects() * (data.slices() - 1)) + " reshaped rows");
    const auto transition = s3l_transition(data, prior, options);
    write_run(c.out / "transition", transition, c, RunModel::transition, "search-longitudinal");
    report(transition, c.out / "transition");
    return 0;
}

struct SimulateOptions {
    std::string out = "sim";
    int datasets = 10;
    int subjects = 400;
    std::uint64_t seed = 1;
};

int cmd_simulate(const SimulateOptions& o) {
    if (o.datasets < 1 || o.subjects < 1) throw ConfigError("datasets and subjects must be positive");
    const fs::path dir = o.out;
    fs::create_directories(dir);
    const auto structure = reference_structure();
    nlohmann::json layout{{"variables", structure.variables},
                          {"slices", structure.slices},
                          {"column_pattern", "<var>_t<k>"}};
    write_text(dir / "layout.json", layout.dump(2) + "\n");
    std::vector<std::string> header;
    for (int t = 0; t < structure.slices; ++t) {
        for (const auto& v : structure.variables) header.push_back(v + "_t" + std::to_string(t));
    }
    nlohmann::json truth{{"layout", "layout.json"}, {"datasets", nlohmann::json::array()}};
    for (int d = 0; d < o.datasets; ++d) {
        Rng rng(derive_seed(o.seed, static_cast<std::uint64_t>(d)));
        const auto model = random_parameterization(structure, rng);
        const auto data = generate_data(model, o.subjects, rng);
        char name[32];
        std::snprintf(name, sizeof name, "data_%02d.csv", d);
        write_csv(dir / name, header, data.values);
        truth["datasets"].push_back({{"data", name}, {"model", nlohmann::json::parse(model_to_json(model))}});
    }
    write_text(dir / "truth.json", truth.dump(2) + "\n");
    log("wrote " + std::to_string(o.datasets) + " datasets to " + dir.string());
    return 0;
}

struct EvaluateOptions {
    std::string truth;
    std::vector<std::string> runs;
    std::string scheme = "averaging";
    std::string out = "evaluation";
};

void write_roc(const fs::path& path, const RocCurve& roc) {
    std::ostringstream os;
    os << "fpr,tpr\n";
    for (const auto& [fpr, tpr] : roc.points) os << fpr << ',' << tpr << '\n';
    write_text(path, os.str());
}

int cmd_evaluate(const EvaluateOptions& o) {
    if (o.scheme != "averaging" && o.scheme != "individual") throw ConfigError("scheme must be averaging or individual");
    if (o.runs.empty()) throw ConfigError("no run directories given");
    const auto truth = read_json(o.truth);
    const auto& datasets = truth.at("datasets");
    if (datasets.size() != o.runs.size()) {
        throw ShapeMismatch(std::to_string(o.runs.size()) + " runs given for " + std::to_string(datasets.size()) +
                            " ground-truth datasets");
    }
    std::vector<StabilityGraph> edges, paths;
    std::vector<int> pi_bics;
    std::vector<Cpdag> truths;
    std::optional<ConstraintMask> mask;
    for (std::size_t i = 0; i < o.runs.size(); ++i) {
        fs::path dir = o.runs[i];
        // A search-longitudinal output directory is scored on its transition model.
        if (!fs::exists(dir / "manifest.json") && fs::exists(dir / "transition" / "manifest.json")) {
            dir /= "transition";
        }
        const auto manifest = read_json(dir / "manifest.json");
        const auto labels = manifest_labels(manifest);
        const auto run_mask = manifest_mask(manifest, labels);
        const auto model = model_from_json(datasets[i].at("model").dump());
        const auto kind = run_model_from_string(manifest.at("model").get<std::string>());
        std::vector<std::string> expected;
        if (kind == RunModel::transition) {
            for (const char* suffix : {"_prev", "_cur"}) {
                for (const auto& v : model.structure.variables) expected.push_back(v + suffix);
            }
        } else {
            expected = model.structure.variables;
        }
        if (labels != expected) throw ShapeMismatch("run " + dir.string() + " does not match the ground truth nodes");
        const Dag dag = kind == RunModel::transition ? model.transition_dag() : model.baseline_dag();
        truths.push_back(dag_to_cpdag(dag, run_mask));
        if (mask && !(*mask == run_mask)) throw ShapeMismatch("runs were searched under different masks");
        mask = run_mask;
        edges.push_back(read_stability_csv(dir / "edge_stability.csv", labels));
        paths.push_back(read_stability_csv(dir / "causal_path_stability.csv", labels));
        pi_bics.push_back(manifest.at("pi_bic").get<int>());
    }

    const fs::path out = o.out;
    fs::create_directories(out);
    nlohmann::json summary{{"scheme", o.scheme}, {"runs", o.runs}};
    if (o.scheme == "averaging") {
        double sum = 0;
        for (int k : pi_bics) sum += k;
        const int pi_bic = static_cast<int>(std::lround(sum / static_cast<double>(pi_bics.size())));
        for (std::size_t i = 1; i < truths.size(); ++i) {
            if (!(truths[i] == truths[0])) throw ShapeMismatch("averaging needs one shared ground-truth structure");
        }
        const auto edge_roc = roc_and_auc(averaging_scheme(edges), truths[0], pi_bic, &*mask);
        const auto path_roc = roc_and_auc(averaging_scheme(paths), truths[0], pi_bic, &*mask);
        write_roc(out / "roc_edge.csv", edge_roc);
        write_roc(out / "roc_causal_path.csv", path_roc);
        summary["pi_bic"] = pi_bic;
        summary["edge_auc"] = edge_roc.auc;
        summary["causal_path_auc"] = path_roc.auc;
        log("edge AUC " + std::to_string(edge_roc.auc) + ", causal path AUC " + std::to_string(path_roc.auc));
    } else {
        summary["datasets"] = nlohmann::json::array();
        for (std::size_t i = 0; i < truths.size(); ++i) {
            const auto edge_roc = roc_and_auc(edges[i], truths[i], pi_bics[i], &*mask);
            const auto path_roc = roc_and_auc(paths[i], truths[i], pi_bics[i], &*mask);
            char name[48];
            std::snprintf(name, sizeof name, "roc_edge_%02zu.csv", i);
            write_roc(out / name, edge_roc);
            std::snprintf(name, sizeof name, "roc_causal_path_%02zu.csv", i);
            write_roc(out / name, path_roc);
            summary["datasets"].push_back(
                {{"run", o.runs[i]}, {"pi_bic", pi_bics[i]}, {"edge_auc", edge_roc.auc}, {"causal_path_auc", path_roc.auc}});
        }
    }
    write_text(out / "auc.json", summary.dump(2) + "\n");
    return 0;
}

struct EffectsOptions {
    std::string run;
    std::vector<std::string> pairs;
    std::optional<int> pi_bic;
    std::optional<std::string> out;
    std::size_t extension_cap = kDefaultExtensionCap;
    int threads = 0;
};

int cmd_effects(const EffectsOptions& o) {
    apply_threads(o.threads);
    const auto run = load_run(o.run);
    const int pi_bic = o.pi_bic.value_or(run.manifest.at("pi_bic").get<int>());
    std::vector<Arc> pairs;
    auto index = [&](const std::string& name) {
        const auto it = std::find(run.labels.begin(), run.labels.end(), name);
        if (it == run.labels.end()) throw ConfigError("unknown node '" + name + "'");
        return static_cast<int>(it - run.labels.begin());
    };
    for (const auto& p : o.pairs) {
        const auto colon = p.find(':');
        if (colon == std::string::npos) throw ConfigError("pairs are written SOURCE:TARGET, got '" + p + "'");
        const int a = index(p.substr(0, colon));
        const int b = index(p.substr(colon + 1));
        if (a == b) throw ConfigError("pair endpoints must differ: " + p);
        pairs.push_back({a, b});
    }
    if (pairs.empty()) {
        const auto previous = read_effects_csv(fs::path(o.run) / "effects.csv", run.labels);
        for (const auto& e : previous) pairs.push_back({e.source, e.target});
    }
    const auto effects = aggregate_effects(run.runs, pi_bic, pairs, run.full, run.mask, o.extension_cap);
    if (!o.out || *o.out == "-") {
        std::cout << effects_csv(effects, run.labels);
        return 0;
    }
    write_effects_csv(*o.out, effects, run.labels);
    log("wrote " + std::to_string(effects.size()) + " effects to " + *o.out);
    return 0;
}

struct ExportDotOptions {
    std::string run;
    std::optional<double> pi_sel;
    std::optional<std::string> out;
};

int cmd_export_dot(const ExportDotOptions& o) {
    const fs::path dir = o.run;
    const auto manifest = read_json(dir / "manifest.json");
    const auto labels = manifest_labels(manifest);
    const auto mask = manifest_mask(manifest, labels);
    const Thresholds thresholds{o.pi_sel.value_or(manifest.at("pi_sel").get<double>()), manifest.at("pi_bic").get<int>()};
    if (!(thresholds.pi_sel >= 0.0 && thresholds.pi_sel <= 1.0)) throw ConfigError("pi_sel must lie in [0, 1]");
    const auto edge = read_stability_csv(dir / "edge_stability.csv", labels);
    const auto path = read_stability_csv(dir / "causal_path_stability.csv", labels);
    std::vector<RelevantStructure> edges, paths;
    for (const auto& s : relevant_structures(edge, path, thresholds)) {
        (s.kind == StructureKind::edge ? edges : paths).push_back(s);
    }
    auto graph = assemble_graph(edges, paths, mask);
    if (fs::exists(dir / "effects.csv")) {
        for (const auto& e : read_effects_csv(dir / "effects.csv", labels)) {
            for (auto& g : graph.edges) {
                if (g.directed && g.from == e.source && g.to == e.target) g.effect = e.standardized.value_or(e.median);
            }
        }
    }
    const std::string dot = to_dot(graph, labels);
    if (o.out && *o.out == "-") {
        std::cout << dot;
    } else {
        const fs::path out = o.out ? fs::path(*o.out) : dir / "graph.dot";
        write_text(out, dot);
        log("wrote " + out.string());
    }
    for (const auto& note : graph.notes) log("note: " + note);
    return 0;
}

int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidPrior*>(&e)) return kConfigExit;
    if (dynamic_cast<const SearchFailure*>(&e) || dynamic_cast<const ExtensionCapExceeded*>(&e) ||
        dynamic_cast<const NoExtension*>(&e) || dynamic_cast<const EmptyMultiset*>(&e)) {
        return kSearchExit;
    }
    return kDataExit;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stable specification search for cross-sectional and longitudinal data"};
    app.set_version_flag("--version", S3_VERSION);
    app.add_flag("-q,--quiet", quiet, "suppress progress messages");
    app.require_subcommand(1);

    Overrides search, longitudinal;
    auto* search_cmd = app.add_subcommand("search", "cross-sectional search");
    search.attach(*search_cmd, false);
    auto* longitudinal_cmd = app.add_subcommand("search-longitudinal", "baseline and transition searches");
    longitudinal.attach(*longitudinal_cmd, true);

    SimulateOptions simulate;
    auto* simulate_cmd = app.add_subcommand("simulate", "generate data from the reference longitudinal model");
    simulate_cmd->add_option("--out", simulate.out, "output directory");
    simulate_cmd->add_option("--datasets", simulate.datasets, "number of datasets");
    simulate_cmd->add_option("--subjects", simulate.subjects, "subjects per dataset");
    simulate_cmd->add_option("--seed", simulate.seed, "master seed");

    EvaluateOptions evaluate;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "ROC and AUC of runs against a ground truth");
    evaluate_cmd->add_option("--truth", evaluate.truth, "truth.json written by simulate")->required();
    evaluate_cmd->add_option("--runs", evaluate.runs, "run directories or search-longitudinal outputs, one per dataset in truth order")->required();
    evaluate_cmd->add_option("--scheme", evaluate.scheme, "averaging or individual");
    evaluate_cmd->add_option("--out", evaluate.out, "output directory");

    EffectsOptions effects;
    auto* effects_cmd = app.add_subcommand("effects", "recompute causal effects for a run");
    effects_cmd->add_option("--run", effects.run, "run directory")->required();
    effects_cmd->add_option("--pair", effects.pairs, "SOURCE:TARGET (repeatable)");
    effects_cmd->add_option("--pi-bic", effects.pi_bic, "complexity of the models to use");
    effects_cmd->add_option("--out", effects.out, "effects CSV (default: stdout)");
    effects_cmd->add_option("--extension-cap", effects.extension_cap, "maximum DAGs enumerated per class");
    effects_cmd->add_option("--threads", effects.threads, "worker threads (0 = OpenMP default)");

    ExportDotOptions dot;
    auto* dot_cmd = app.add_subcommand("export-dot", "rebuild the annotated graph of a run");
    dot_cmd->add_option("--run", dot.run, "run directory")->required();
    dot_cmd->add_option("--pi-sel", dot.pi_sel, "selection-probability threshold");
    dot_cmd->add_option("--out", dot.out, "DOT file, or - for stdout (default: run directory)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigExit;
    }

    try {
        if (*search_cmd) return cmd_search(search);
        if (*longitudinal_cmd) return cmd_search_longitudinal(longitudinal);
        if (*simulate_cmd) return cmd_simulate(simulate);
        if (*evaluate_cmd) return cmd_evaluate(evaluate);
        if (*effects_cmd) return cmd_effects(effects);
        if (*dot_cmd) return cmd_export_dot(dot);
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "s3: " << e.what() << '\n';
        return kDataExit;
    } catch (const std::exception& e) {
        std::cerr << "s3: " << e.what() << '\n';
        return exit_code(e);
    }
    return 0;
}
