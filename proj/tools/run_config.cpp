#include "run_config.hpp"

#include <fstream>
#include <set>

#include "s3/error.hpp"

namespace s3::cli {

PipelineOptions RunConfig::pipeline(int default_subsets) const {
    PipelineOptions o;
    o.n_subsets = subsets > 0 ? subsets : default_subsets;
    o.search.generations = generations;
    o.search.population_size = population;
    o.search.p_crossover = p_crossover;
    o.search.p_mutation = p_mutation;
    o.search.seed = seed;
    o.pi_sel = pi_sel;
    o.extension_cap = extension_cap;
    return o;
}

nlohmann::json RunConfig::to_json() const {
    auto path = [](const std::filesystem::path& p) {
        return p.empty() ? std::string() : std::filesystem::absolute(p).lexically_normal().string();
    };
    return {{"data", path(data)},
            {"layout", path(layout)},
            {"prior", path(prior)},
            {"kinds", path(kinds)},
            {"out", path(out)},
            {"subsets", subsets},
            {"generations", generations},
            {"population", population},
            {"p_crossover", p_crossover},
            {"p_mutation", p_mutation},
            {"pi_sel", pi_sel},
            {"seed", seed},
            {"threads", threads},
            {"row_subsampling", row_subsampling},
            {"extension_cap", extension_cap}};
}

RunConfig read_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    const auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ConfigError(path.string() + " is not a JSON object");
    static const std::set<std::string> known{"data",        "layout",     "prior",      "kinds",  "out",
                                             "subsets",     "generations", "population", "p_crossover",
                                             "p_mutation",  "pi_sel",     "seed",       "threads",
                                             "row_subsampling", "extension_cap"};
    for (const auto& [key, value] : doc.items()) {
        if (!known.count(key)) throw ConfigError(path.string() + ": unknown key '" + key + "'");
    }
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        if (p.empty()) return {};
        const std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    RunConfig c;
    try {
        if (doc.contains("data")) c.data = resolve(doc["data"].get<std::string>());
        if (doc.contains("layout")) c.layout = resolve(doc["layout"].get<std::string>());
        if (doc.contains("prior")) c.prior = resolve(doc["prior"].get<std::string>());
        if (doc.contains("kinds")) c.kinds = resolve(doc["kinds"].get<std::string>());
        if (doc.contains("out")) c.out = resolve(doc["out"].get<std::string>());
        c.subsets = doc.value("subsets", c.subsets);
        c.generations = doc.value("generations", c.generations);
        c.population = doc.value("population", c.population);
        c.p_crossover = doc.value("p_crossover", c.p_crossover);
        c.p_mutation = doc.value("p_mutation", c.p_mutation);
        c.pi_sel = doc.value("pi_sel", c.pi_sel);
        c.seed = doc.value("seed", c.seed);
        c.threads = doc.value("threads", c.threads);
        c.row_subsampling = doc.value("row_subsampling", c.row_subsampling);
        c.extension_cap = doc.value("extension_cap", c.extension_cap);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return c;
}

void validate(const RunConfig& c, bool needs_layout) {
    namespace fs = std::filesystem;
    if (c.data.empty()) throw ConfigError("no data file given");
    if (!fs::is_regular_file(c.data)) throw ConfigError("data file not found: " + c.data.string());
    if (needs_layout) {
        if (c.layout.empty()) throw ConfigError("no layout file given");
        if (!fs::is_regular_file(c.layout)) throw ConfigError("layout file not found: " + c.layout.string());
    }
    if (!c.prior.empty() && !fs::is_regular_file(c.prior)) throw ConfigError("prior file not found: " + c.prior.string());
    if (!c.kinds.empty() && !fs::is_regular_file(c.kinds)) throw ConfigError("kinds file not found: " + c.kinds.string());
    if (c.subsets != 0 && c.subsets < 2) throw ConfigError("subsets must be at least 2");
    if (!(c.pi_sel >= 0.0 && c.pi_sel <= 1.0)) throw ConfigError("pi_sel must lie in [0, 1]");
    if (c.threads < 0) throw ConfigError("threads must be non-negative");
    if (c.extension_cap == 0) throw ConfigError("extension cap must be positive");
    c.pipeline(50).search.validate();
}

}  // namespace s3::cli
