#include "s3/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "s3/error.hpp"

namespace s3 {
namespace {

Dag weighted_dag(int n, const std::map<Arc, double>& weights) {
    std::vector<Arc> arcs;
    for (const auto& [arc, w] : weights) arcs.push_back(arc);
    return Dag(n, arcs);
}

}  // namespace

Dag GroundTruthModel::baseline_dag() const { return weighted_dag(structure.p(), baseline_weights); }
Dag GroundTruthModel::transition_dag() const { return weighted_dag(2 * structure.p(), transition_weights); }

LongitudinalStructure reference_structure() {
    LongitudinalStructure s;
    s.variables = {"X1", "X2", "X3", "X4"};
    s.slices = 3;
    const int p = 4;
    s.baseline_arcs = {{1, 0}, {2, 0}, {0, 3}};
    for (const Arc& a : s.baseline_arcs) s.transition_arcs.push_back({p + a.from, p + a.to});
    for (int v = 0; v < p; ++v) s.transition_arcs.push_back({v, p + v});
    s.transition_arcs.push_back({3, p + 1});
    std::sort(s.transition_arcs.begin(), s.transition_arcs.end());
    return s;
}

GroundTruthModel random_parameterization(const LongitudinalStructure& structure, Rng& rng, double min_weight,
                                         double max_weight) {
    GroundTruthModel m;
    m.structure = structure;
    std::uniform_real_distribution<double> magnitude(min_weight, max_weight);
    auto draw = [&] {
        const double w = magnitude(rng);
        return coin(rng, 0.5) ? w : -w;
    };
    for (const Arc& a : structure.baseline_arcs) m.baseline_weights[a] = draw();
    for (const Arc& a : structure.transition_arcs) m.transition_weights[a] = draw();
    m.noise_sd.assign(structure.p(), 1.0);
    // Validates acyclicity.
    (void)m.baseline_dag();
    (void)m.transition_dag();
    return m;
}

LongitudinalDataset generate_data(const GroundTruthModel& model, int subjects, Rng& rng) {
    const int p = model.structure.p();
    const int T = model.structure.slices;
    if (subjects < 1 || T < 1) throw ShapeMismatch("need at least one subject and one slice");
    const Dag base = model.baseline_dag();
    const Dag trans = model.transition_dag();
    const auto base_order = base.topological_order();
    std::vector<int> cur_order;
    for (int v : trans.topological_order()) {
        if (v >= p) cur_order.push_back(v - p);
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd values(subjects, p * T);
    std::vector<double> prev(p);
    std::vector<double> cur(p);
    for (int i = 0; i < subjects; ++i) {
        for (int v : base_order) {
            double x = model.noise_sd[v] * normal(rng);
            for (const auto& [arc, w] : model.baseline_weights) {
                if (arc.to == v) x += w * cur[arc.from];
            }
            cur[v] = x;
        }
        for (int v = 0; v < p; ++v) values(i, v) = cur[v];
        for (int t = 1; t < T; ++t) {
            prev = cur;
            for (int v : cur_order) {
                double x = model.noise_sd[v] * normal(rng);
                for (const auto& [arc, w] : model.transition_weights) {
                    if (arc.to != p + v) continue;
                    x += w * (arc.from < p ? prev[arc.from] : cur[arc.from - p]);
                }
                cur[v] = x;
            }
            for (int v = 0; v < p; ++v) values(i, t * p + v) = cur[v];
        }
    }
    return make_longitudinal(full_layout(model.structure.variables, T), std::move(values));
}

std::pair<Cpdag, Cpdag> true_cpdag(const GroundTruthModel& model, const ConstraintMask& baseline_mask,
                                   const ConstraintMask& transition_mask) {
    return {dag_to_cpdag(model.baseline_dag(), baseline_mask), dag_to_cpdag(model.transition_dag(), transition_mask)};
}

ConstraintMask reference_transition_mask(const LongitudinalStructure& structure, std::span<const Arc> prior) {
    return transition_mask(structure.p(), prior);
}

RocCurve roc_and_auc(const StabilityGraph& sg, const Cpdag& truth, int pi_bic, const ConstraintMask* admissible) {
    if (truth.size() != sg.n_nodes) throw ShapeMismatch("stability graph and truth disagree on the number of nodes");
    if (admissible && admissible->size() != sg.n_nodes) throw ShapeMismatch("mask does not match the stability graph");
    const bool edges = sg.kind == StructureKind::edge;
    std::vector<NodeSet> allowed;
    if (admissible) {
        for (int v = 0; v < sg.n_nodes; ++v) allowed.push_back(admissible->allowed_parents(v));
    }

    struct Scored {
        double reliability;
        bool positive;
    };
    std::vector<Scored> scored;
    for (const auto& [key, curve] : sg.curves) {
        if (admissible) {
            const bool possible = edges ? admissible->pair_admissible(key.from, key.to)
                                        : ((directed_descendants(allowed, key.from) >> key.to) & 1U) != 0;
            if (!possible) continue;
        }
        const bool positive = edges ? truth.is_adjacent(key.from, key.to) : has_directed_path(truth, key.from, key.to);
        scored.push_back({reliability(curve, pi_bic), positive});
    }
    const auto positives = std::count_if(scored.begin(), scored.end(), [](const auto& s) { return s.positive; });
    const auto negatives = static_cast<std::ptrdiff_t>(scored.size()) - positives;

    RocCurve roc;
    roc.points.push_back({0.0, 0.0});
    roc.points.push_back({1.0, 1.0});
    for (int k = 0; k <= 100; ++k) {
        const double pi_sel = k / 100.0;
        std::ptrdiff_t tp = 0;
        std::ptrdiff_t fp = 0;
        for (const auto& s : scored) {
            if (s.reliability > 0.0 && s.reliability >= pi_sel) (s.positive ? tp : fp)++;
        }
        roc.points.push_back({negatives ? static_cast<double>(fp) / negatives : 0.0,
                              positives ? static_cast<double>(tp) / positives : 0.0});
    }
    std::sort(roc.points.begin(), roc.points.end());
    roc.points.erase(std::unique(roc.points.begin(), roc.points.end()), roc.points.end());
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        const auto& [x0, y0] = roc.points[i - 1];
        const auto& [x1, y1] = roc.points[i];
        roc.auc += (x1 - x0) * (y0 + y1) / 2.0;
    }
    return roc;
}

StabilityGraph averaging_scheme(std::span<const StabilityGraph> graphs) {
    if (graphs.empty()) throw ShapeMismatch("nothing to average");
    StabilityGraph out = graphs.front();
    for (std::size_t g = 1; g < graphs.size(); ++g) {
        const auto& sg = graphs[g];
        if (sg.kind != out.kind || sg.n_nodes != out.n_nodes || sg.curves.size() != out.curves.size()) {
            throw ShapeMismatch("stability graphs differ in shape");
        }
        for (auto& [key, curve] : out.curves) {
            const auto it = sg.curves.find(key);
            if (it == sg.curves.end() || it->second.size() != curve.size()) {
                throw ShapeMismatch("stability graphs differ in shape");
            }
            for (std::size_t j = 0; j < curve.size(); ++j) curve[j] += it->second[j];
        }
        for (std::size_t j = 0; j < out.imputed.size(); ++j) {
            out.imputed[j] = out.imputed[j] && sg.imputed[j];
            out.model_counts[j] += sg.model_counts[j];
        }
    }
    const double n = static_cast<double>(graphs.size());
    for (auto& [key, curve] : out.curves) {
        for (double& v : curve) v /= n;
    }
    return out;
}

std::string model_to_json(const GroundTruthModel& model) {
    const auto& s = model.structure;
    const int p = s.p();
    auto node = [&](int v) { return v < p ? s.variables[v] + "_prev" : s.variables[v - p] + "_cur"; };
    nlohmann::json doc;
    doc["variables"] = s.variables;
    doc["slices"] = s.slices;
    doc["baseline"] = nlohmann::json::array();
    for (const auto& [arc, w] : model.baseline_weights) {
        doc["baseline"].push_back({{"from", s.variables[arc.from]}, {"to", s.variables[arc.to]}, {"weight", w}});
    }
    doc["transition"] = nlohmann::json::array();
    for (const auto& [arc, w] : model.transition_weights) {
        doc["transition"].push_back({{"from", node(arc.from)}, {"to", node(arc.to)}, {"weight", w}});
    }
    doc["noise_sd"] = model.noise_sd;
    return doc.dump(2) + "\n";
}

GroundTruthModel model_from_json(const std::string& text) {
    const auto doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw DegenerateData("ground truth is not a JSON object");
    GroundTruthModel m;
    try {
        auto& s = m.structure;
        s.variables = doc.at("variables").get<std::vector<std::string>>();
        s.slices = doc.at("slices").get<int>();
        const int p = s.p();
        auto variable = [&](const std::string& name) {
            const auto it = std::find(s.variables.begin(), s.variables.end(), name);
            if (it == s.variables.end()) throw DegenerateData("unknown variable " + name);
            return static_cast<int>(it - s.variables.begin());
        };
        auto node = [&](const std::string& name) {
            const auto cut = name.rfind('_');
            if (cut == std::string::npos) throw DegenerateData("transition node without slice suffix: " + name);
            const std::string suffix = name.substr(cut + 1);
            const int v = variable(name.substr(0, cut));
            if (suffix == "prev") return v;
            if (suffix == "cur") return p + v;
            throw DegenerateData("bad transition node " + name);
        };
        for (const auto& a : doc.at("baseline")) {
            const Arc arc{variable(a.at("from")), variable(a.at("to"))};
            s.baseline_arcs.push_back(arc);
            m.baseline_weights[arc] = a.at("weight").get<double>();
        }
        for (const auto& a : doc.at("transition")) {
            const Arc arc{node(a.at("from")), node(a.at("to"))};
            s.transition_arcs.push_back(arc);
            m.transition_weights[arc] = a.at("weight").get<double>();
        }
        m.noise_sd = doc.at("noise_sd").get<std::vector<double>>();
        if (static_cast<int>(m.noise_sd.size()) != p) throw DegenerateData("one noise sd per variable is required");
        (void)m.baseline_dag();
        (void)m.transition_dag();
    } catch (const nlohmann::json::exception& e) {
        throw DegenerateData(std::string("ground truth: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw DegenerateData(std::string("ground truth: ") + e.what());
    }
    return m;
}

}  // namespace s3
