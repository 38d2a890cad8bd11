#pragma once

// JSON form of FieldSpec and ExperimentConfig.
//
// Seed lists accept either an explicit array or {"start": s, "count": n}.

#include "tacache/experiment.hpp"
#include "tacache/field.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tacache {

using Json = nlohmann::ordered_json;

/// Invalid experiment configuration (maps to the CLI's config-error exit code).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline Vector vector_from_json(const Json& j, const char* what) {
    if (!j.is_array()) throw ConfigError(std::string(what) + " must be an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
    return v;
}

inline Json vector_to_json(const Vector& v) {
    Json j = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

inline std::vector<std::uint64_t> seeds_from_json(const Json& j, const char* what) {
    if (j.is_array()) return j.get<std::vector<std::uint64_t>>();
    if (j.is_object() && j.contains("start") && j.contains("count")) {
        const auto start = j.at("start").get<std::uint64_t>();
        const auto count = j.at("count").get<std::uint64_t>();
        std::vector<std::uint64_t> out(count);
        for (std::uint64_t i = 0; i < count; ++i) out[i] = start + i;
        return out;
    }
    throw ConfigError(std::string(what) + " must be an array or {\"start\", \"count\"}");
}

} // namespace detail

inline Json field_spec_to_json(const FieldSpec& f) {
    Json j;
    j["kind"] = std::string(to_string(f.kind));
    j["dimension"] = f.dimension;
    switch (f.kind) {
    case FieldKind::constant: j["target"] = detail::vector_to_json(f.target); break;
    case FieldKind::magnitude_decay:
        j["target"] = detail::vector_to_json(f.target);
        j["rate"] = f.rate;
        break;
    case FieldKind::rotation:
        j["target"] = detail::vector_to_json(f.target);
        j["omega"] = f.omega;
        j["plane"] = {f.axis_a, f.axis_b};
        break;
    case FieldKind::gaussian_mixture: {
        Json comps = Json::array();
        for (const auto& c : f.components) {
            Json cj;
            cj["weight"] = c.weight;
            cj["mean"] = detail::vector_to_json(c.mean);
            cj["scale"] = c.scale;
            comps.push_back(std::move(cj));
        }
        j["components"] = std::move(comps);
        break;
    }
    }
    return j;
}

inline FieldSpec field_spec_from_json(const Json& j) {
    try {
        FieldSpec f;
        f.kind = field_kind_from_string(j.at("kind").get<std::string>());
        f.dimension = j.at("dimension").get<int>();
        if (j.contains("target")) f.target = detail::vector_from_json(j.at("target"), "field.target");
        f.rate = j.value("rate", 0.0);
        f.omega = j.value("omega", 0.0);
        if (j.contains("plane")) {
            const auto plane = j.at("plane").get<std::vector<int>>();
            if (plane.size() != 2) throw ConfigError("field.plane must hold two axis indices");
            f.axis_a = plane[0];
            f.axis_b = plane[1];
        }
        if (j.contains("components")) {
            for (const auto& cj : j.at("components")) {
                MixtureComponent c;
                c.weight = cj.at("weight").get<double>();
                c.mean = detail::vector_from_json(cj.at("mean"), "field.components[].mean");
                c.scale = cj.at("scale").get<double>();
                f.components.push_back(std::move(c));
            }
        }
        f.validate();
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("field: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
}

inline Json config_to_json(const ExperimentConfig& c) {
    Json j;
    j["field"] = field_spec_to_json(c.field);
    j["steps"] = c.steps;
    j["calibration_seeds"] = c.calibration_seeds;
    j["evaluation_seeds"] = c.evaluation_seeds;
    j["tau_k"] = c.tau_k;
    j["tau_d"] = c.tau_d;
    j["h_max"] = c.h_max;
    j["toggles"] = {{"use_mi", c.toggles.use_mi}, {"use_di", c.toggles.use_di}};
    j["condition_tilt"] = c.condition_tilt;
    j["out_dir"] = c.out_dir;
    j["ablation"] = c.ablation;
    j["sweep"] = {{"tau_k", c.sweep_tau_k}, {"tau_d", c.sweep_tau_d}};
    j["calibration_sizes"] = c.calibration_sizes;
    return j;
}

/// Missing keys fall back to ExperimentConfig defaults; a manifest (object
/// with "resolved_config") is accepted in place of a plain config.
inline ExperimentConfig config_from_json(const Json& root) {
    const Json& j = root.contains("resolved_config") ? root.at("resolved_config") : root;
    try {
        ExperimentConfig c;
        if (!j.contains("field")) throw ConfigError("config: missing 'field'");
        c.field = field_spec_from_json(j.at("field"));
        c.steps = j.value("steps", c.steps);
        if (j.contains("calibration_seeds")) {
            c.calibration_seeds = detail::seeds_from_json(j.at("calibration_seeds"), "calibration_seeds");
        }
        if (j.contains("evaluation_seeds")) {
            c.evaluation_seeds = detail::seeds_from_json(j.at("evaluation_seeds"), "evaluation_seeds");
        }
        c.tau_k = j.value("tau_k", c.tau_k);
        c.tau_d = j.value("tau_d", c.tau_d);
        c.h_max = j.value("h_max", c.h_max);
        if (j.contains("toggles")) {
            c.toggles.use_mi = j.at("toggles").value("use_mi", true);
            c.toggles.use_di = j.at("toggles").value("use_di", true);
        }
        c.condition_tilt = j.value("condition_tilt", c.condition_tilt);
        c.out_dir = j.value("out_dir", c.out_dir);
        c.ablation = j.value("ablation", c.ablation);
        if (j.contains("sweep")) {
            c.sweep_tau_k = j.at("sweep").value("tau_k", std::vector<double>{});
            c.sweep_tau_d = j.at("sweep").value("tau_d", std::vector<double>{});
        }
        c.calibration_sizes = j.value("calibration_sizes", std::vector<int>{});
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open config '" + path + "'");
    Json j;
    try {
        j = Json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

} // namespace tacache
