#include "chaosbench/systems.hpp"

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace chaosbench {

using nlohmann::json;

namespace {

SystemSpec parse_system(const json& doc, std::size_t index) {
    const std::string where = "systems[" + std::to_string(index) + "]";
    auto need = [&](const char* key) -> const json& {
        if (!doc.contains(key)) throw ConfigError(where + "." + key, "missing required field");
        return doc.at(key);
    };
    try {
        const std::string name = need("name").get<std::string>();
        const std::string family = doc.value("family", name);
        std::map<std::string, double> params;
        if (doc.contains("params")) params = doc.at("params").get<std::map<std::string, double>>();

        SystemSpec spec = make_system(name, family, params);
        const int dim = need("dim").get<int>();
        if (dim != spec.dim)
            throw ConfigError(where + ".dim", "family '" + family + "' has dimension " +
                                                  std::to_string(spec.dim));
        spec.lyapunov_exponent = need("lyapunov_exponent").get<double>();
        spec.reference_fractal_dim = need("reference_fractal_dim").get<double>();
        spec.integration_dt = need("dt").get<double>();
        spec.chaotic = doc.value("chaotic", true);
        spec.provenance = doc.value("provenance", "");
        if (doc.contains("burn_in")) {
            spec.burn_in_time = doc.at("burn_in").get<double>();
        } else if (spec.lyapunov_exponent > 0.0) {
            spec.burn_in_time = 20.0 * spec.lyapunov_time();
        }
        if (doc.contains("initial_state")) {
            auto x0 = doc.at("initial_state").get<std::vector<double>>();
            if (static_cast<int>(x0.size()) != dim)
                throw ConfigError(where + ".initial_state", "wrong length");
            spec.initial_state = Eigen::Map<const Vector>(x0.data(), dim);
        }

        if (!(spec.integration_dt > 0.0)) throw ConfigError(where + ".dt", "must be positive");
        if (spec.chaotic && !(spec.lyapunov_exponent > 0.0))
            throw ConfigError(where + ".lyapunov_exponent", "chaotic systems need λ > 0");
        if (!(spec.reference_fractal_dim > 0.0) || spec.reference_fractal_dim > dim)
            throw ConfigError(where + ".reference_fractal_dim", "must lie in (0, dim]");
        if (spec.burn_in_time < 0.0) throw ConfigError(where + ".burn_in", "must be non-negative");
        return spec;
    } catch (const json::exception& e) {
        throw ConfigError(where, e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(where, e.what());
    }
}

json to_json(const SystemSpec& s) {
    json j;
    j["name"] = s.name;
    j["family"] = s.family;
    j["dim"] = s.dim;
    j["params"] = s.params;
    j["lyapunov_exponent"] = s.lyapunov_exponent;
    j["reference_fractal_dim"] = s.reference_fractal_dim;
    j["dt"] = s.integration_dt;
    j["burn_in"] = s.burn_in_time;
    j["initial_state"] = std::vector<double>(s.initial_state.data(),
                                             s.initial_state.data() + s.initial_state.size());
    j["chaotic"] = s.chaotic;
    j["provenance"] = s.provenance;
    return j;
}

}  // namespace

Registry::Registry(std::vector<SystemSpec> systems) : systems_(std::move(systems)) {}

Registry Registry::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const std::size_t upto = std::min(e.byte, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n');
        throw ConfigError("line " + std::to_string(line), e.what());
    }
    const json& list = doc.is_array() ? doc : doc.value("systems", json::array());
    if (!list.is_array()) throw ConfigError("systems", "expected an array of system documents");
    std::vector<SystemSpec> systems;
    for (std::size_t i = 0; i < list.size(); ++i) systems.push_back(parse_system(list[i], i));
    return Registry(std::move(systems));
}

Registry Registry::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open registry file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string Registry::default_path() {
    if (const char* env = std::getenv("CHAOSBENCH_REGISTRY"); env && *env) return env;
    return std::string(CHAOSBENCH_DATA_DIR) + "/systems.json";
}

const SystemSpec& Registry::get(const std::string& name) const {
    for (const auto& s : systems_)
        if (s.name == name) return s;
    throw InvalidArgument("system '" + name + "' is not registered");
}

bool Registry::contains(const std::string& name) const {
    for (const auto& s : systems_)
        if (s.name == name) return true;
    return false;
}

std::vector<std::string> Registry::chaotic_names() const {
    std::vector<std::string> names;
    for (const auto& s : systems_)
        if (s.chaotic) names.push_back(s.name);
    return names;
}

std::string Registry::to_json_text() const {
    json list = json::array();
    for (const auto& s : systems_) list.push_back(to_json(s));
    return json{{"format_version", 1}, {"systems", list}}.dump(2);
}

std::string Registry::checksum() const {
    json list = json::array();
    for (const auto& s : systems_) list.push_back(to_json(s));
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(list.dump())));
    return buf;
}

}  // namespace chaosbench
