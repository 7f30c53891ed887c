#include "s3/stability.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "s3/error.hpp"

namespace s3 {

// ---------------------------------------------------------------- subsampling

std::vector<std::vector<int>> subsample_indices(int n, int n_subsets, Rng& rng) {
    if (n < 2) throw DegenerateData("need at least 2 units to subsample");
    std::vector<int> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(std::max(n_subsets, 0)));
    for (auto& subset : out) {
        subset.reserve(static_cast<std::size_t>(n / 2));
        std::sample(all.begin(), all.end(), std::back_inserter(subset), n / 2, rng);
    }
    return out;
}

std::vector<Subsample> subsample(const Dataset& data, int n_subsets, Rng& rng) {
    if (data.rows() / 2 < data.cols() + 2) {
        throw DegenerateData("subsets of " + std::to_string(data.rows() / 2) + " rows are too small for " +
                             std::to_string(data.cols()) + " variables");
    }
    std::vector<Subsample> out;
    for (auto& rows : subsample_indices(data.rows(), n_subsets, rng)) {
        Dataset subset = data.select_rows(rows);
        out.push_back({std::move(rows), std::move(subset)});
    }
    return out;
}

// ---------------------------------------------------------------- searches

namespace {

SubsetRun run_one(const Subsample& s, std::size_t i, const ConstraintMask& mask, const SearchParams& params) {
    SubsetRun r;
    r.index = i;
    r.seed = derive_seed(params.seed, i);
    r.units = s.units;
    try {
        r.moments = sample_moments(s.data);
        SearchParams local = params;
        local.seed = r.seed;
        r.models = evolve(r.moments, mask, local);
        r.ok = true;
    } catch (const Error& e) {
        r.error = e.what();
        r.models.clear();
    }
    return r;
}

void check_failures(const std::vector<SubsetRun>& runs) {
    if (runs.empty()) throw SearchFailure("no subsets to search");
    const auto failed = std::count_if(runs.begin(), runs.end(), [](const auto& r) { return !r.ok; });
    if (failed * 10 > static_cast<std::ptrdiff_t>(runs.size())) {
        const auto first = std::find_if(runs.begin(), runs.end(), [](const auto& r) { return !r.ok; });
        throw SearchFailure(std::to_string(failed) + " of " + std::to_string(runs.size()) +
                            " subset searches failed; first: " + first->error);
    }
}

void check_inputs(std::span<const Subsample> subsets, const ConstraintMask& mask, const SearchParams& params) {
    params.validate();
    for (const auto& s : subsets) {
        if (s.data.cols() != mask.size()) throw ShapeMismatch("subset width does not match the constraint mask");
    }
}

}  // namespace

std::vector<SubsetRun> run_searches_serial(std::span<const Subsample> subsets, const ConstraintMask& mask,
                                           const SearchParams& params) {
    check_inputs(subsets, mask, params);
    std::vector<SubsetRun> runs;
    runs.reserve(subsets.size());
    for (std::size_t i = 0; i < subsets.size(); ++i) runs.push_back(run_one(subsets[i], i, mask, params));
    check_failures(runs);
    return runs;
}

std::vector<SubsetRun> run_searches(std::span<const Subsample> subsets, const ConstraintMask& mask,
                                    const SearchParams& params) {
    check_inputs(subsets, mask, params);
    std::vector<SubsetRun> runs(subsets.size());
    std::exception_ptr failure;
    const auto count = static_cast<std::ptrdiff_t>(subsets.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        try {
            runs[i] = run_one(subsets[i], static_cast<std::size_t>(i), mask, params);
        } catch (...) {
#pragma omp critical(s3_run_searches)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    check_failures(runs);
    return runs;
}

// ---------------------------------------------------------------- stability graphs

std::string to_string(StructureKind kind) { return kind == StructureKind::edge ? "edge" : "causal_path"; }

void fill_gaps(std::vector<double>& curve, const std::vector<bool>& populated) {
    const int m = static_cast<int>(curve.size());
    std::vector<int> known;
    for (int j = 0; j < m; ++j) {
        if (populated[j]) known.push_back(j);
    }
    if (known.empty()) {
        std::fill(curve.begin(), curve.end(), 0.0);
        return;
    }
    for (int j = 0; j < m; ++j) {
        if (populated[j]) continue;
        auto hi = std::upper_bound(known.begin(), known.end(), j);
        if (hi == known.begin()) {
            curve[j] = curve[known.front()];
        } else if (hi == known.end()) {
            curve[j] = curve[known.back()];
        } else {
            const int l = *(hi - 1);
            const int r = *hi;
            const double t = static_cast<double>(j - l) / (r - l);
            curve[j] = curve[l] + t * (curve[r] - curve[l]);
        }
    }
}

namespace {

template <typename Hit>
StabilityGraph build_stability(StructureKind kind, std::span<const SubsetRun> runs, int n, bool ordered, Hit&& hit) {
    StabilityGraph sg;
    sg.kind = kind;
    sg.n_nodes = n;
    const int levels = sg.max_complexity() + 1;
    sg.model_counts.assign(levels, 0);
    std::map<Arc, std::vector<int>> hits;
    for (int a = 0; a < n; ++a) {
        for (int b = ordered ? 0 : a + 1; b < n; ++b) {
            if (a != b) hits[{a, b}].assign(levels, 0);
        }
    }
    for (const auto& run : runs) {
        if (!run.ok) continue;
        for (const auto& model : run.models) {
            const int j = std::min(model.dag.arc_count(), levels - 1);
            ++sg.model_counts[j];
            hit(model.cpdag, [&](const Arc& key) { ++hits[key][j]; });
        }
    }
    sg.imputed.assign(levels, false);
    std::vector<bool> populated(levels);
    for (int j = 0; j < levels; ++j) {
        populated[j] = sg.model_counts[j] > 0;
        sg.imputed[j] = !populated[j];
    }
    for (auto& [key, count] : hits) {
        std::vector<double> curve(levels, 0.0);
        for (int j = 0; j < levels; ++j) {
            if (populated[j]) curve[j] = static_cast<double>(count[j]) / sg.model_counts[j];
        }
        fill_gaps(curve, populated);
        sg.curves.emplace(key, std::move(curve));
    }
    return sg;
}

}  // namespace

StabilityGraph edge_stability(std::span<const SubsetRun> runs, int n_nodes) {
    return build_stability(StructureKind::edge, runs, n_nodes, false, [n_nodes](const Cpdag& g, auto&& count) {
        for (int a = 0; a < n_nodes; ++a) {
            for (int b = a + 1; b < n_nodes; ++b) {
                if (g.is_adjacent(a, b)) count(Arc{a, b});
            }
        }
    });
}

StabilityGraph causal_path_stability(std::span<const SubsetRun> runs, int n_nodes) {
    return build_stability(StructureKind::causal_path, runs, n_nodes, true, [n_nodes](const Cpdag& g, auto&& count) {
        for (int a = 0; a < n_nodes; ++a) {
            const NodeSet reach = directed_descendants(g.directed_parent_sets(), a);
            for (int b = 0; b < n_nodes; ++b) {
                if (b != a && ((reach >> b) & 1U)) count(Arc{a, b});
            }
        }
    });
}

std::map<int, double> mean_bic_by_complexity(std::span<const SubsetRun> runs) {
    std::map<int, std::pair<double, int>> acc;
    for (const auto& run : runs) {
        if (!run.ok) continue;
        for (const auto& model : run.models) {
            if (!std::isfinite(model.fit.bic)) continue;
            auto& [sum, count] = acc[model.dag.arc_count()];
            sum += model.fit.bic;
            ++count;
        }
    }
    std::map<int, double> means;
    for (const auto& [j, sc] : acc) means[j] = sc.first / sc.second;
    return means;
}

int argmin_mean_bic(const std::map<int, double>& means) {
    if (means.empty()) throw SearchFailure("no scored models to choose a complexity bound from");
    auto best = means.begin();
    for (auto it = means.begin(); it != means.end(); ++it) {
        if (it->second < best->second) best = it;
    }
    return best->first;
}

int compute_pi_bic(std::span<const SubsetRun> runs) { return argmin_mean_bic(mean_bic_by_complexity(runs)); }

// ---------------------------------------------------------------- relevance

double reliability(const std::vector<double>& curve, int pi_bic) {
    double best = 0.0;
    const int last = std::min<int>(pi_bic, static_cast<int>(curve.size()) - 1);
    for (int j = 0; j <= last; ++j) best = std::max(best, curve[j]);
    return best;
}

std::vector<RelevantStructure> relevant_structures(const StabilityGraph& edges, const StabilityGraph& paths,
                                                   const Thresholds& thresholds) {
    std::vector<RelevantStructure> out;
    for (const StabilityGraph* sg : {&edges, &paths}) {
        for (const auto& [key, curve] : sg->curves) {
            const double r = reliability(curve, thresholds.pi_bic);
            if (r > 0.0 && r >= thresholds.pi_sel) out.push_back({key, r, sg->kind});
        }
    }
    return out;
}

// ---------------------------------------------------------------- visualization

std::vector<NodeSet> AnnotatedCausalGraph::directed_parent_sets() const {
    std::vector<NodeSet> parents(n_nodes, 0);
    for (const auto& e : edges) {
        if (e.directed) parents[e.to] |= bit(e.from);
    }
    return parents;
}

AnnotatedCausalGraph assemble_graph(std::span<const RelevantStructure> relevant_edges,
                                    std::span<const RelevantStructure> relevant_paths, const ConstraintMask& mask) {
    AnnotatedCausalGraph g;
    g.n_nodes = mask.size();
    std::map<Arc, std::size_t> by_pair;
    for (const auto& r : relevant_edges) {
        const Arc key{std::min(r.key.from, r.key.to), std::max(r.key.from, r.key.to)};
        if (by_pair.count(key)) continue;
        by_pair[key] = g.edges.size();
        g.edges.push_back({key.from, key.to, false, r.reliability, std::nullopt});
    }

    std::vector<std::string> oriented_by(g.edges.size());
    auto orient = [&](AnnotatedEdge& e, int from, int to, const std::string& reason) {
        if ((directed_descendants(g.directed_parent_sets(), to) >> from) & 1U) {
            g.notes.push_back("skipped " + std::to_string(from) + "->" + std::to_string(to) + " (" + reason +
                              "): would close a directed cycle");
            return false;
        }
        e.from = from;
        e.to = to;
        e.directed = true;
        return true;
    };

    for (std::size_t i = 0; i < g.edges.size(); ++i) {
        auto& e = g.edges[i];
        const int a = e.from;
        const int b = e.to;
        if (mask.forbids(a, b) && mask.allows(b, a)) {
            if (orient(e, b, a, "constraint")) oriented_by[i] = "constraint";
        } else if (mask.forbids(b, a) && mask.allows(a, b)) {
            if (orient(e, a, b, "constraint")) oriented_by[i] = "constraint";
        }
    }

    std::vector<RelevantStructure> paths(relevant_paths.begin(), relevant_paths.end());
    std::stable_sort(paths.begin(), paths.end(), [](const auto& l, const auto& r) {
        if (l.reliability != r.reliability) return l.reliability > r.reliability;
        return l.key < r.key;
    });
    for (const auto& path : paths) {
        const int x = path.key.from;
        const int y = path.key.to;
        const auto it = by_pair.find({std::min(x, y), std::max(x, y)});
        if (it == by_pair.end()) continue;
        auto& e = g.edges[it->second];
        const std::string tag = "path " + std::to_string(x) + "~>" + std::to_string(y);
        if (e.directed) {
            if (e.from != x) {
                g.notes.push_back("orientation conflict on " + std::to_string(e.from) + "->" + std::to_string(e.to) +
                                  ": kept " + oriented_by[it->second] + ", rejected " + tag);
            }
            continue;
        }
        if (orient(e, x, y, tag)) oriented_by[it->second] = tag;
    }
    std::sort(g.edges.begin(), g.edges.end(), [](const auto& l, const auto& r) {
        return std::pair(std::min(l.from, l.to), std::max(l.from, l.to)) <
               std::pair(std::min(r.from, r.to), std::max(r.from, r.to));
    });
    return g;
}

std::string format_short(double value) {
    if (!std::isfinite(value)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
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

std::string label_of(std::span<const std::string> labels, int v) {
    return v < static_cast<int>(labels.size()) ? labels[v] : "X" + std::to_string(v);
}

std::string number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::string to_dot(const AnnotatedCausalGraph& graph, std::span<const std::string> labels) {
    std::ostringstream os;
    os << "digraph G {\n";
    for (int v = 0; v < graph.n_nodes; ++v) os << "  " << quoted(label_of(labels, v)) << ";\n";
    for (const auto& e : graph.edges) {
        os << "  " << quoted(label_of(labels, e.from)) << " -> " << quoted(label_of(labels, e.to));
        if (e.directed) {
            const std::string effect = e.effect ? format_short(*e.effect) : "NA";
            os << " [label=\"" << format_short(e.reliability) << "/" << effect << "\"];\n";
        } else {
            os << " [dir=none, style=dashed, label=\"" << format_short(e.reliability) << "\"];\n";
        }
    }
    os << "}\n";
    return os.str();
}

// ---------------------------------------------------------------- files

void write_stability_csv(const std::filesystem::path& path, const StabilityGraph& sg,
                         std::span<const std::string> labels) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << "kind,from,to,complexity,probability,imputed\n";
    const std::string kind = to_string(sg.kind);
    for (const auto& [key, curve] : sg.curves) {
        for (std::size_t j = 0; j < curve.size(); ++j) {
            out << kind << ',' << label_of(labels, key.from) << ',' << label_of(labels, key.to) << ',' << j << ','
                << number(curve[j]) << ',' << (sg.imputed[j] ? 1 : 0) << '\n';
        }
    }
}

StabilityGraph read_stability_csv(const std::filesystem::path& path, std::span<const std::string> labels) {
    std::ifstream in(path);
    if (!in) throw DegenerateData("cannot open " + path.string());
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = static_cast<int>(i);
    StabilityGraph sg;
    sg.n_nodes = static_cast<int>(labels.size());
    const int levels = sg.max_complexity() + 1;
    sg.imputed.assign(levels, false);
    sg.model_counts.assign(levels, 0);
    std::string line;
    std::getline(in, line);
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::istringstream is(line);
        for (std::string c; std::getline(is, c, ',');) cells.push_back(c);
        if (cells.size() != 6) throw DegenerateData(path.string() + ":" + std::to_string(line_no) + ": malformed row");
        sg.kind = cells[0] == "edge" ? StructureKind::edge : StructureKind::causal_path;
        const auto from = index.find(cells[1]);
        const auto to = index.find(cells[2]);
        if (from == index.end() || to == index.end()) {
            throw ShapeMismatch(path.string() + ":" + std::to_string(line_no) + ": unknown node label");
        }
        const int j = std::stoi(cells[3]);
        if (j < 0 || j >= levels) throw ShapeMismatch(path.string() + ": complexity out of range");
        auto& curve = sg.curves[{from->second, to->second}];
        curve.resize(levels, 0.0);
        curve[j] = std::stod(cells[4]);
        sg.imputed[j] = cells[5] == "1";
    }
    return sg;
}

std::string stability_svg(const StabilityGraph& sg, std::span<const std::string> labels, const Thresholds& thresholds) {
    constexpr double kWidth = 720;
    constexpr double kHeight = 440;
    constexpr double kLeft = 60;
    constexpr double kRight = 170;
    constexpr double kTop = 30;
    constexpr double kBottom = 50;
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    const int maxc = std::max(sg.max_complexity(), 1);
    auto x = [&](double j) { return kLeft + plot_w * j / maxc; };
    auto y = [&](double p) { return kTop + plot_h * (1.0 - p); };
    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    std::ostringstream os;
    char buf[256];
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"#e6e6e6\"/>\n", x(0), y(1),
                  x(thresholds.pi_bic) - x(0), y(thresholds.pi_sel) - y(1));
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"none\" stroke=\"black\"/>\n",
                  kLeft, kTop, plot_w, plot_h);
    os << buf;
    for (int t = 0; t <= 10; t += 2) {
        std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"end\">%.1f</text>\n",
                      kLeft - 6, y(t / 10.0) + 4, t / 10.0);
        os << buf;
    }
    const int step = std::max(1, maxc / 10);
    for (int j = 0; j <= maxc; j += step) {
        std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" font-size=\"11\" text-anchor=\"middle\">%d</text>\n",
                      x(j), kTop + plot_h + 16, j);
        os << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"12\" text-anchor=\"middle\">model complexity</text>\n",
                  kLeft + plot_w / 2, kHeight - 12);
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%.2f\" font-size=\"13\" text-anchor=\"middle\">%s stability</text>\n",
                  kLeft + plot_w / 2, kTop - 10, sg.kind == StructureKind::edge ? "edge" : "causal path");
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n",
                  x(0), y(thresholds.pi_sel), x(maxc), y(thresholds.pi_sel));
    os << buf;
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"black\" stroke-dasharray=\"4 3\"/>\n",
                  x(thresholds.pi_bic), y(0), x(thresholds.pi_bic), y(1));
    os << buf;

    std::size_t series = 0;
    double legend_y = kTop;
    for (const auto& [key, curve] : sg.curves) {
        const char* color = palette[series++ % 10];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t j = 0; j < curve.size(); ++j) {
            std::snprintf(buf, sizeof buf, "%s%.2f,%.2f", j ? " " : "", x(static_cast<double>(j)), y(curve[j]));
            os << buf;
        }
        os << "\"/>\n";
        if (reliability(curve, thresholds.pi_bic) >= thresholds.pi_sel && legend_y < kHeight - 20) {
            const std::string name = label_of(labels, key.from) +
                                     (sg.kind == StructureKind::edge ? " - " : " ~> ") + label_of(labels, key.to);
            std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%.2f\" font-size=\"10\" fill=\"%s\">", kWidth - kRight + 8,
                          legend_y + 10, color);
            os << buf << name << "</text>\n";
            legend_y += 13;
        }
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace s3
