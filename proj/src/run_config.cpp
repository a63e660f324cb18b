#include "occ/run_config.hpp"

#include <cstdlib>
#include <fstream>

#include "occ/errors.hpp"

namespace occ {

namespace {

using nlohmann::json;

void reject_unknown(const json& section, std::initializer_list<const char*> known,
                    const std::string& where) {
    if (!section.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : section.items())
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
            throw ConfigError("unknown key " + where + "." + key);
}

template <typename T>
void read(const json& section, const char* key, T& out, const std::string& where) {
    if (!section.contains(key)) return;
    try {
        out = section.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

char parse_orientation(const std::string& s) {
    if (s == "A" || s == "a") return 'A';
    if (s == "B" || s == "b") return 'B';
    throw ConfigError("oracle.orientation must be A or B, got '" + s + "'");
}

json synthetic_json(const SyntheticSpec& s) {
    return {{"classes", s.classes},
            {"samples_per_class", s.samples_per_class},
            {"dim", s.dim},
            {"separation_a", s.separation_a},
            {"separation_b", s.separation_b},
            {"noise_sigma", s.noise_sigma},
            {"orientation_a", s.orientation_a.class_to_cluster},
            {"orientation_b", s.orientation_b.class_to_cluster},
            {"seed", s.seed}};
}

SyntheticSpec read_synthetic(const json& j, SyntheticSpec s) {
    reject_unknown(j,
                   {"classes", "samples_per_class", "dim", "separation_a", "separation_b",
                    "noise_sigma", "orientation_a", "orientation_b", "seed"},
                   "data.synthetic");
    read(j, "classes", s.classes, "data.synthetic");
    read(j, "samples_per_class", s.samples_per_class, "data.synthetic");
    read(j, "dim", s.dim, "data.synthetic");
    read(j, "separation_a", s.separation_a, "data.synthetic");
    read(j, "separation_b", s.separation_b, "data.synthetic");
    read(j, "noise_sigma", s.noise_sigma, "data.synthetic");
    read(j, "orientation_a", s.orientation_a.class_to_cluster, "data.synthetic");
    read(j, "orientation_b", s.orientation_b.class_to_cluster, "data.synthetic");
    read(j, "seed", s.seed, "data.synthetic");
    s.validate();
    return s;
}

}  // namespace

RunConfigFile desk_defaults() {
    RunConfigFile c;
    c.synthetic = SyntheticSpec{};
    c.train.epochs = 60;
    c.train.learning_rate = 1e-3;
    c.train.queries_per_batch = 0;
    return c;
}

RunConfigFile run_config_from_json(const json& doc, RunConfigFile c) {
    reject_unknown(doc, {"data", "model", "train", "augment", "query", "oracle", "output"}, "config");

    if (doc.contains("data")) {
        const auto& d = doc.at("data");
        reject_unknown(d, {"synthetic", "path"}, "data");
        if (d.contains("synthetic") && d.contains("path"))
            throw ConfigError("data: give either synthetic or path, not both");
        if (d.contains("path")) {
            std::string p;
            read(d, "path", p, "data");
            if (p.empty()) throw ConfigError("data.path is empty");
            c.data_path = p;
            c.synthetic.reset();
        } else if (d.contains("synthetic")) {
            c.synthetic = read_synthetic(d.at("synthetic"), c.synthetic.value_or(SyntheticSpec{}));
            c.data_path.clear();
        }
    }

    c.train = train_config_from_json(doc, c.train);

    if (doc.contains("oracle")) {
        const auto& o = doc.at("oracle");
        reject_unknown(o, {"mode", "orientation", "timeout_s", "queue_capacity", "bind", "port"},
                       "oracle");
        read(o, "mode", c.oracle.mode, "oracle");
        std::string orientation(1, c.oracle.orientation);
        read(o, "orientation", orientation, "oracle");
        c.oracle.orientation = parse_orientation(orientation);
        read(o, "timeout_s", c.oracle.timeout_s, "oracle");
        read(o, "queue_capacity", c.oracle.queue_capacity, "oracle");
        read(o, "bind", c.oracle.bind, "oracle");
        read(o, "port", c.oracle.port, "oracle");
    }
    if (c.oracle.mode != "simulated" && c.oracle.mode != "interactive" && c.oracle.mode != "none")
        throw ConfigError("oracle.mode must be simulated, interactive or none");
    if (!(c.oracle.timeout_s > 0.0)) throw ConfigError("oracle.timeout_s must be > 0");
    if (c.oracle.queue_capacity < 1) throw ConfigError("oracle.queue_capacity must be >= 1");
    if (c.oracle.port < 0 || c.oracle.port > 65535) throw ConfigError("oracle.port out of range");

    if (doc.contains("output")) {
        const auto& o = doc.at("output");
        reject_unknown(o, {"dir"}, "output");
        std::string dir = c.output_dir.string();
        read(o, "dir", dir, "output");
        if (dir.empty()) throw ConfigError("output.dir is empty");
        c.output_dir = dir;
    }
    if (!c.synthetic && c.data_path.empty()) throw ConfigError("data: no source configured");
    return c;
}

json to_json(const RunConfigFile& c) {
    json j = to_json(c.train);
    if (c.synthetic)
        j["data"] = {{"synthetic", synthetic_json(*c.synthetic)}};
    else
        j["data"] = {{"path", c.data_path.string()}};
    j["oracle"] = {{"mode", c.oracle.mode},
                   {"orientation", std::string(1, c.oracle.orientation)},
                   {"timeout_s", c.oracle.timeout_s},
                   {"queue_capacity", c.oracle.queue_capacity},
                   {"bind", c.oracle.bind},
                   {"port", c.oracle.port}};
    j["output"] = {{"dir", c.output_dir.string()}};
    return j;
}

void apply_override(json& doc, const std::string& dotted, const std::string& value) {
    if (dotted.empty() || dotted.front() == '.' || dotted.back() == '.')
        throw ConfigError("bad override key '" + dotted + "'");
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        const std::string key = dotted.substr(start, dot - start);
        if (key.empty()) throw ConfigError("bad override key '" + dotted + "'");
        if (!node->is_object()) {
            if (!node->is_null()) throw ConfigError("override " + dotted + " crosses a non-object");
            *node = json::object();
        }
        node = &(*node)[key];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    json parsed = json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? json(value) : parsed;
}

RunConfigFile load_run_config(const std::filesystem::path& path,
                              const std::vector<std::pair<std::string, std::string>>& overrides) {
    json doc = json::object();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config " + path.string());
        try {
            doc = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
        }
    }
    for (const auto& [key, value] : overrides) apply_override(doc, key, value);
    if (const char* env = std::getenv("OCC_OUT_DIR"); env && *env)
        apply_override(doc, "output.dir", json(std::string(env)).dump());
    return run_config_from_json(doc);
}

Dataset load_run_data(const RunConfigFile& c) {
    if (!c.data_path.empty()) return load_dataset(c.data_path);
    return generate_synthetic(*c.synthetic);
}

std::uint64_t config_hash(const RunConfigFile& c) {
    json j = to_json(c);
    j.erase("output");
    return fnv1a(j.dump());
}

}  // namespace occ
