#include "s3/longitudinal.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <json.hpp>

#include "s3/error.hpp"

namespace s3 {
namespace {

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

nlohmann::json parse_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ConfigError(path.string() + " is not a JSON object");
    return doc;
}

}  // namespace

SliceLayout full_layout(std::vector<std::string> variables, int slices) {
    SliceLayout layout;
    layout.variables = std::move(variables);
    layout.slices = slices;
    const int p = layout.p();
    layout.column.assign(p, std::vector<int>(std::max(slices, 0)));
    for (int v = 0; v < p; ++v) {
        for (int t = 0; t < slices; ++t) layout.column[v][t] = t * p + v;
    }
    return layout;
}

SliceLayout read_layout(const std::filesystem::path& path, std::span<const std::string> header) {
    const auto doc = parse_json(path);
    SliceLayout layout;
    try {
        layout.variables = doc.at("variables").get<std::vector<std::string>>();
        layout.slices = doc.at("slices").get<int>();
        const std::string pattern = doc.value("column_pattern", std::string("<var>_t<k>"));
        std::map<std::string, int> index;
        for (std::size_t c = 0; c < header.size(); ++c) index[header[c]] = static_cast<int>(c);
        const int p = layout.p();
        if (p == 0 || layout.slices < 1) throw ShapeMismatch("layout needs at least one variable and one slice");
        layout.column.assign(p, std::vector<int>(layout.slices, -1));
        for (int v = 0; v < p; ++v) {
            std::vector<int> slices;
            const auto& name = layout.variables[v];
            if (doc.contains("presence") && doc["presence"].contains(name)) {
                slices = doc["presence"][name].get<std::vector<int>>();
            } else {
                for (int t = 0; t < layout.slices; ++t) slices.push_back(t);
            }
            for (int t : slices) {
                if (t < 0 || t >= layout.slices) throw ShapeMismatch("slice " + std::to_string(t) + " out of range");
                const std::string column = replace_all(replace_all(pattern, "<var>", name), "<k>", std::to_string(t));
                const auto it = index.find(column);
                if (it == index.end()) throw ShapeMismatch("layout column '" + column + "' not in the data");
                layout.column[v][t] = it->second;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return layout;
}

LongitudinalDataset LongitudinalDataset::select_subjects(std::span<const int> subjects) const {
    LongitudinalDataset out{layout, Eigen::MatrixXd(static_cast<Eigen::Index>(subjects.size()), values.cols()), kinds};
    for (std::size_t i = 0; i < subjects.size(); ++i) out.values.row(static_cast<Eigen::Index>(i)) = values.row(subjects[i]);
    return out;
}

LongitudinalDataset make_longitudinal(SliceLayout layout, Eigen::MatrixXd values, std::vector<ColumnKind> kinds) {
    const int p = layout.p();
    if (layout.slices < 1) throw ShapeMismatch("a longitudinal dataset needs at least one slice");
    if (static_cast<int>(layout.column.size()) != p) throw ShapeMismatch("layout has no column map for every variable");
    if (kinds.empty()) kinds.assign(p, ColumnKind::continuous);
    if (static_cast<int>(kinds.size()) != p) throw ShapeMismatch("one column kind per variable is required");
    std::set<int> used;
    for (int v = 0; v < p; ++v) {
        if (static_cast<int>(layout.column[v].size()) != layout.slices) {
            throw ShapeMismatch("layout slice count disagrees for " + layout.variables[v]);
        }
        for (int c : layout.column[v]) {
            if (c < -1 || c >= values.cols()) throw ShapeMismatch("layout column out of range");
            if (c >= 0 && !used.insert(c).second) throw ShapeMismatch("layout maps two cells to one column");
        }
    }
    if (!values.allFinite()) throw DegenerateData("longitudinal data contains missing or non-finite values");
    return {std::move(layout), std::move(values), std::move(kinds)};
}

LongitudinalDataset load_longitudinal(const std::filesystem::path& csv, const std::filesystem::path& layout_path,
                                      const std::filesystem::path& sidecar) {
    auto table = read_csv(csv);
    auto layout = read_layout(layout_path, table.header);
    std::vector<ColumnKind> kinds(layout.p(), ColumnKind::continuous);
    if (!sidecar.empty()) {
        const auto declared = read_column_kinds(sidecar);
        for (int v = 0; v < layout.p(); ++v) {
            if (auto it = declared.find(layout.variables[v]); it != declared.end()) kinds[v] = it->second;
            for (int c : layout.column[v]) {
                if (c < 0) continue;
                if (auto it = declared.find(table.header[c]); it != declared.end()) kinds[v] = it->second;
            }
        }
    }
    return make_longitudinal(std::move(layout), std::move(table.values), std::move(kinds));
}

Dataset TransitionFrame::to_dataset() const { return make_dataset(names, kinds, values); }

TransitionFrame reshape(const LongitudinalDataset& data) {
    const int T = data.slices();
    if (T < 2) throw ShapeMismatch("a transition model needs at least two slices");
    const auto& layout = data.layout;
    TransitionFrame frame;
    for (int cur = 0; cur < 2; ++cur) {
        for (int v = 0; v < data.p(); ++v) {
            bool observed = true;
            for (int t = cur; t < T - 1 + cur; ++t) observed = observed && layout.present(v, t);
            if (!observed) continue;
            frame.names.push_back(layout.variables[v] + (cur ? "_cur" : "_prev"));
            frame.kinds.push_back(data.kinds[v]);
            frame.variable.push_back(v);
            frame.current.push_back(cur == 1);
        }
    }
    const int s = data.subjects();
    const int q = static_cast<int>(frame.names.size());
    frame.values.resize(static_cast<Eigen::Index>(s) * (T - 1), q);
    for (int i = 0; i < s; ++i) {
        for (int t = 0; t + 1 < T; ++t) {
            const Eigen::Index r = static_cast<Eigen::Index>(i) * (T - 1) + t;
            for (int c = 0; c < q; ++c) {
                const int slice = frame.current[c] ? t + 1 : t;
                frame.values(r, c) = data.values(i, layout.column[frame.variable[c]][slice]);
            }
        }
    }
    return frame;
}

Dataset baseline_slice(const LongitudinalDataset& data) {
    std::vector<std::string> names;
    std::vector<ColumnKind> kinds;
    std::vector<int> columns;
    for (int v = 0; v < data.p(); ++v) {
        if (!data.layout.present(v, 0)) continue;
        names.push_back(data.layout.variables[v]);
        kinds.push_back(data.kinds[v]);
        columns.push_back(data.layout.column[v][0]);
    }
    Eigen::MatrixXd values(data.values.rows(), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) values.col(static_cast<Eigen::Index>(c)) = data.values.col(columns[c]);
    return make_dataset(std::move(names), std::move(kinds), std::move(values));
}

std::vector<PriorArc> read_prior(const std::filesystem::path& path) {
    const auto doc = parse_json(path);
    std::vector<PriorArc> out;
    try {
        for (const auto& arc : doc.value("forbidden", nlohmann::json::array())) {
            if (!arc.is_array() || arc.size() != 2) throw ConfigError(path.string() + ": arcs must be [from, to] pairs");
            out.push_back({arc[0].get<std::string>(), arc[1].get<std::string>()});
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return out;
}

namespace {

/// Resolves a prior endpoint to variable indices among `variables`.
std::vector<int> resolve(const std::string& raw, std::span<const std::string> variables) {
    if (ends_with(raw, "_prev")) throw InvalidPrior("prior arcs may not reference previous-slice node " + raw);
    std::vector<int> out;
    if (raw == "*") {
        for (std::size_t v = 0; v < variables.size(); ++v) out.push_back(static_cast<int>(v));
        return out;
    }
    std::string name = raw;
    auto it = std::find(variables.begin(), variables.end(), name);
    if (it == variables.end() && ends_with(raw, "_cur")) {
        name = raw.substr(0, raw.size() - 4);
        it = std::find(variables.begin(), variables.end(), name);
    }
    if (it == variables.end()) throw InvalidPrior("prior references unknown variable " + raw);
    out.push_back(static_cast<int>(it - variables.begin()));
    return out;
}

}  // namespace

ConstraintMask intra_mask(std::span<const std::string> variables, std::span<const PriorArc> prior) {
    std::vector<Arc> forbidden;
    for (const auto& arc : prior) {
        for (int a : resolve(arc.from, variables)) {
            for (int b : resolve(arc.to, variables)) {
                if (a != b) forbidden.push_back({a, b});
            }
        }
    }
    return ConstraintMask(static_cast<int>(variables.size()), forbidden);
}

ConstraintMask transition_mask(const TransitionFrame& frame, std::span<const PriorArc> prior) {
    const int q = frame.cols();
    std::vector<std::string> variables;
    for (int c = 0; c < q; ++c) {
        std::string base = frame.names[c].substr(0, frame.names[c].rfind('_'));
        if (std::find(variables.begin(), variables.end(), base) == variables.end()) variables.push_back(base);
    }
    std::vector<Arc> forbidden;
    for (int a = 0; a < q; ++a) {
        for (int b = 0; b < q; ++b) {
            if (a != b && !frame.current[b]) forbidden.push_back({a, b});
        }
    }
    auto cur_node = [&](const std::string& var) {
        for (int c = 0; c < q; ++c) {
            if (frame.current[c] && frame.names[c] == var + "_cur") return c;
        }
        return -1;
    };
    for (const auto& arc : prior) {
        for (int a : resolve(arc.from, variables)) {
            for (int b : resolve(arc.to, variables)) {
                const int from = cur_node(variables[a]);
                const int to = cur_node(variables[b]);
                if (from >= 0 && to >= 0 && from != to) forbidden.push_back({from, to});
            }
        }
    }
    return ConstraintMask(q, forbidden);
}

ConstraintMask transition_mask(int p, std::span<const Arc> prior) {
    std::vector<Arc> forbidden;
    for (int a = 0; a < 2 * p; ++a) {
        for (int b = 0; b < p; ++b) {
            if (a != b) forbidden.push_back({a, b});
        }
    }
    for (const Arc& arc : prior) {
        if (arc.from < 0 || arc.to < 0 || arc.from >= p || arc.to >= p) throw InvalidPrior("prior arc out of range");
        if (arc.from != arc.to) forbidden.push_back({p + arc.from, p + arc.to});
    }
    return ConstraintMask(2 * p, forbidden);
}

PipelineResult s3l_baseline(const LongitudinalDataset& data, std::span<const PriorArc> prior,
                            const LongitudinalOptions& options) {
    const Dataset base = baseline_slice(data);
    return s3c_run(base, intra_mask(base.names, prior), options.pipeline);
}

PipelineResult s3l_transition(const LongitudinalDataset& data, std::span<const PriorArc> prior,
                              const LongitudinalOptions& options) {
    const auto& opts = options.pipeline;
    if (opts.n_subsets < 2) throw ConfigError("at least 2 subsets are required");
    const TransitionFrame whole = reshape(data);
    const ConstraintMask mask = transition_mask(whole, prior);
    const Dataset full = whole.to_dataset();
    Rng rng(derive_seed(opts.search.seed, kSubsampleStream));
    if (!options.subject_subsampling) return run_pipeline(full, subsample(full, opts.n_subsets, rng), mask, opts);

    const int half_rows = (data.subjects() / 2) * (data.slices() - 1);
    if (half_rows < whole.cols() + 2) {
        throw DegenerateData("subsets of " + std::to_string(data.subjects() / 2) + " subjects are too small for " +
                             std::to_string(whole.cols()) + " nodes");
    }
    std::vector<Subsample> subsets;
    for (auto& subjects : subsample_indices(data.subjects(), opts.n_subsets, rng)) {
        Dataset d = reshape(data.select_subjects(subjects)).to_dataset();
        subsets.push_back({std::move(subjects), std::move(d)});
    }
    return run_pipeline(full, subsets, mask, opts);
}

LongitudinalResult s3l_run(const LongitudinalDataset& data, std::span<const PriorArc> prior,
                           const LongitudinalOptions& options) {
    LongitudinalResult r;
    r.baseline = s3l_baseline(data, prior, options);
    r.transition = s3l_transition(data, prior, options);
    return r;
}

}  // namespace s3
