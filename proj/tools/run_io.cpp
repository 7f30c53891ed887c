#include "run_io.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <fstream>
#include <sstream>

#include "s3/error.hpp"

#ifndef S3_VERSION
#define S3_VERSION "0.0.0"
#endif

namespace s3::cli {

namespace fs = std::filesystem;

std::string to_string(RunModel model) {
    switch (model) {
        case RunModel::baseline: return "baseline";
        case RunModel::transition: return "transition";
        default: return "cross-sectional";
    }
}

RunModel run_model_from_string(const std::string& name) {
    if (name == "cross-sectional") return RunModel::cross_sectional;
    if (name == "baseline") return RunModel::baseline;
    if (name == "transition") return RunModel::transition;
    throw ShapeMismatch("unknown run model '" + name + "'");
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DegenerateData("cannot open " + path.string());
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw DegenerateData(path.string() + " is not valid JSON");
    return doc;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
}

namespace {

nlohmann::json arcs_json(const std::vector<Arc>& arcs, const std::vector<std::string>& labels) {
    auto out = nlohmann::json::array();
    for (const Arc& a : arcs) out.push_back({labels[a.from], labels[a.to]});
    return out;
}

int label_index(const std::vector<std::string>& labels, const std::string& name) {
    const auto it = std::find(labels.begin(), labels.end(), name);
    if (it == labels.end()) throw ShapeMismatch("unknown node '" + name + "'");
    return static_cast<int>(it - labels.begin());
}

std::string number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_run(const fs::path& dir, const PipelineResult& r, const RunConfig& config, RunModel model,
               const std::string& command) {
    fs::create_directories(dir);
    const auto& labels = r.labels;

    nlohmann::json manifest;
    manifest["tool"] = "s3";
    manifest["version"] = S3_VERSION;
    manifest["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION);
    manifest["command"] = command;
    manifest["model"] = to_string(model);
    manifest["config"] = config.to_json();
    manifest["seed"] = config.seed;
    manifest["n_subsets"] = r.runs.size();
    manifest["failed_subsets"] = std::count_if(r.runs.begin(), r.runs.end(), [](const auto& x) { return !x.ok; });
    manifest["pi_bic"] = r.thresholds.pi_bic;
    manifest["pi_sel"] = r.thresholds.pi_sel;
    manifest["labels"] = labels;
    manifest["forbidden"] = arcs_json(r.mask.forbidden_arcs(), labels);
    manifest["notes"] = r.notes;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");

    nlohmann::json pareto;
    pareto["labels"] = labels;
    pareto["subsets"] = nlohmann::json::array();
    for (const auto& run : r.runs) {
        nlohmann::json s{{"index", run.index}, {"seed", run.seed}, {"units", run.units}, {"ok", run.ok}};
        if (!run.ok) s["error"] = run.error;
        s["models"] = nlohmann::json::array();
        for (const auto& m : run.models) {
            s["models"].push_back({{"complexity", m.fit.complexity},
                                   {"chi_square", m.fit.chi_square},
                                   {"bic", m.fit.bic},
                                   {"arcs", arcs_json(m.dag.arcs(), labels)}});
        }
        pareto["subsets"].push_back(std::move(s));
    }
    write_text(dir / "pareto.json", pareto.dump(1) + "\n");

    write_stability_csv(dir / "edge_stability.csv", r.edge, labels);
    write_stability_csv(dir / "causal_path_stability.csv", r.path, labels);
    write_text(dir / "edge_stability.svg", stability_svg(r.edge, labels, r.thresholds));
    write_text(dir / "causal_path_stability.svg", stability_svg(r.path, labels, r.thresholds));

    std::ostringstream bic;
    bic << "complexity,mean_bic\n";
    for (const auto& [k, v] : r.mean_bic) bic << k << ',' << number(v) << '\n';
    write_text(dir / "mean_bic.csv", bic.str());

    write_text(dir / "graph.dot", to_dot(r.graph, labels));
    write_effects_csv(dir / "effects.csv", r.effects, labels);
}

std::vector<std::string> manifest_labels(const nlohmann::json& manifest) {
    try {
        return manifest.at("labels").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DegenerateData(std::string("manifest: ") + e.what());
    }
}

ConstraintMask manifest_mask(const nlohmann::json& manifest, const std::vector<std::string>& labels) {
    std::vector<Arc> forbidden;
    try {
        for (const auto& a : manifest.at("forbidden")) {
            forbidden.push_back({label_index(labels, a.at(0).get<std::string>()),
                                 label_index(labels, a.at(1).get<std::string>())});
        }
    } catch (const nlohmann::json::exception& e) {
        throw DegenerateData(std::string("manifest: ") + e.what());
    }
    return ConstraintMask(static_cast<int>(labels.size()), forbidden);
}

LoadedRun load_run(const fs::path& dir) {
    LoadedRun run;
    run.manifest = read_json(dir / "manifest.json");
    run.labels = manifest_labels(run.manifest);
    run.mask = manifest_mask(run.manifest, run.labels);
    const auto pareto = read_json(dir / "pareto.json");
    try {
        run.model = run_model_from_string(run.manifest.at("model").get<std::string>());
        const auto& cfg = run.manifest.at("config");
        const fs::path data = cfg.at("data").get<std::string>();
        const fs::path kinds = cfg.value("kinds", std::string());
        const bool rows = cfg.value("row_subsampling", false);

        LongitudinalDataset longitudinal;
        if (run.model == RunModel::cross_sectional) {
            run.full = load_dataset(data, kinds);
        } else {
            longitudinal = load_longitudinal(data, cfg.at("layout").get<std::string>(), kinds);
            run.full = run.model == RunModel::baseline ? baseline_slice(longitudinal) : reshape(longitudinal).to_dataset();
        }
        if (run.full.names != run.labels) throw ShapeMismatch("run inputs no longer match the manifest labels");

        for (const auto& s : pareto.at("subsets")) {
            SubsetRun r;
            r.index = s.at("index").get<std::size_t>();
            r.seed = s.at("seed").get<std::uint64_t>();
            r.units = s.at("units").get<std::vector<int>>();
            r.ok = s.at("ok").get<bool>();
            if (!r.ok) {
                r.error = s.value("error", std::string());
                run.runs.push_back(std::move(r));
                continue;
            }
            const bool by_subject = run.model == RunModel::transition && !rows;
            const Dataset subset = by_subject ? reshape(longitudinal.select_subjects(r.units)).to_dataset()
                                              : run.full.select_rows(r.units);
            r.moments = sample_moments(subset);
            for (const auto& m : s.at("models")) {
                std::vector<Arc> arcs;
                for (const auto& a : m.at("arcs")) {
                    arcs.push_back({label_index(run.labels, a.at(0).get<std::string>()),
                                    label_index(run.labels, a.at(1).get<std::string>())});
                }
                Dag dag(static_cast<int>(run.labels.size()), arcs);
                FitResult fit;
                fit.complexity = m.at("complexity").get<int>();
                fit.chi_square = m.at("chi_square").get<double>();
                fit.bic = m.at("bic").get<double>();
                Cpdag cpdag = dag_to_cpdag(dag, run.mask);
                r.models.push_back({std::move(dag), std::move(cpdag), std::move(fit)});
            }
            run.runs.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DegenerateData(std::string("run directory: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DegenerateData(std::string("run directory: ") + e.what());
    }
    return run;
}

std::vector<EffectEstimate> read_effects_csv(const fs::path& path, const std::vector<std::string>& labels) {
    std::ifstream in(path);
    if (!in) throw DegenerateData("cannot open " + path.string());
    std::vector<EffectEstimate> out;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream is(line);
        for (std::string c; std::getline(is, c, ',');) cells.push_back(c);
        if (cells.size() != 5) throw DegenerateData(path.string() + ": malformed row");
        EffectEstimate e;
        e.source = label_index(labels, cells[0]);
        e.target = label_index(labels, cells[1]);
        e.median = std::stod(cells[2]);
        if (cells[3] != "NA") e.standardized = std::stod(cells[3]);
        e.n_values = std::stoull(cells[4]);
        out.push_back(e);
    }
    return out;
}

}  // namespace s3::cli
