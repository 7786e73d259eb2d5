#include "cuplab/env_spec.hpp"

#include <set>

namespace cuplab {

namespace {

using nlohmann::json;

json defaults_for(const std::string& kind, const std::string& path) {
    if (kind == "two_state") return {{"kind", kind}, {"gamma", 0.9}, {"b", 0.5}};
    if (kind == "gridworld") {
        return {{"kind", kind},
                {"width", 4},
                {"height", 4},
                {"hazard_cells", json::array({json::array({1, 1}), json::array({2, 2})})},
                {"goal_cell", json::array({3, 3})},
                {"gamma", 0.99},
                {"b", 5.0}};
    }
    if (kind == "random") {
        return {{"kind", kind}, {"n_states", 5}, {"n_actions", 3}, {"seed", 0}, {"gamma", 0.9}, {"b", 5.0}};
    }
    throw ConfigError(path + ".kind", "unknown environment kind '" + kind + "'");
}

void check_number(const json& value, const std::string& key) {
    if (!value.is_number()) throw ConfigError(key, "expected a number");
}

void check_count(const json& value, const std::string& key) {
    if (!value.is_number_integer() || value.get<long long>() < 1) throw ConfigError(key, "expected a positive integer");
}

void check_cell(const json& value, const std::string& key) {
    if (!value.is_array() || value.size() != 2 || !value[0].is_number_integer() || !value[1].is_number_integer()) {
        throw ConfigError(key, "expected a cell [x, y]");
    }
}

Cell to_cell(const json& value) { return Cell{value[0].get<int>(), value[1].get<int>()}; }

}  // namespace

json resolve_env_spec(const json& spec, const std::string& path) {
    if (!spec.is_object()) throw ConfigError(path, "environment spec must be an object");
    if (!spec.contains("kind") || !spec["kind"].is_string()) throw ConfigError(path + ".kind", "missing or not a string");
    json resolved = defaults_for(spec["kind"].get<std::string>(), path);
    for (const auto& [key, value] : spec.items()) {
        if (!resolved.contains(key)) throw ConfigError(path + "." + key, "unknown key");
        resolved[key] = value;
    }
    for (const auto& [key, value] : resolved.items()) {
        const std::string full = path + "." + key;
        if (key == "kind") continue;
        if (key == "gamma" || key == "b") {
            check_number(value, full);
        } else if (key == "seed") {
            if (!value.is_number_integer() || value.get<long long>() < 0) throw ConfigError(full, "expected a non-negative integer");
        } else if (key == "hazard_cells") {
            if (!value.is_array()) throw ConfigError(full, "expected an array of cells");
            for (const auto& cell : value) check_cell(cell, full);
        } else if (key == "goal_cell") {
            check_cell(value, full);
        } else {
            check_count(value, full);
        }
    }
    return resolved;
}

Cmdp build_env(const json& spec) {
    const json r = resolve_env_spec(spec);
    const std::string kind = r["kind"].get<std::string>();
    const double gamma = r["gamma"].get<double>();
    const double b = r["b"].get<double>();
    try {
        if (kind == "two_state") return build_two_state(gamma, b);
        if (kind == "gridworld") {
            std::vector<Cell> hazards;
            for (const auto& cell : r["hazard_cells"]) hazards.push_back(to_cell(cell));
            return build_gridworld(r["width"].get<std::size_t>(), r["height"].get<std::size_t>(), hazards,
                                   to_cell(r["goal_cell"]), gamma, b);
        }
        return build_random_cmdp(r["n_states"].get<std::size_t>(), r["n_actions"].get<std::size_t>(),
                                 r["seed"].get<std::uint64_t>(), gamma, b);
    } catch (const PreconditionError& e) {
        throw ConfigError("env", e.what());
    }
}

}  // namespace cuplab
