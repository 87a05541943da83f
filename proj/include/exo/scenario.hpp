#pragma once

// Scenario files: JSON with // and /* */ comments. A scenario is merged onto
// the serialized defaults, so every key it sets must already exist there
// with the same JSON type. Errors carry the dotted key path.

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "exo/errors.hpp"
#include "exo/sim_engine.hpp"

namespace exo {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Enum names
// ---------------------------------------------------------------------------

namespace detail {

template <typename E, std::size_t N>
E enum_from(const json& j, const std::string& path, const std::pair<E, const char*> (&table)[N]) {
    if (!j.is_string()) throw ConfigError(path, "expected a string");
    const std::string s = j.get<std::string>();
    std::string allowed;
    for (const auto& [v, name] : table) {
        if (s == name) return v;
        allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    }
    throw ConfigError(path, "unknown value '" + s + "' (expected one of: " + allowed + ")");
}

template <typename E, std::size_t N>
const char* enum_name(E v, const std::pair<E, const char*> (&table)[N]) {
    for (const auto& [e, name] : table) {
        if (e == v) return name;
    }
    return "?";
}

inline constexpr std::pair<ControllerKind, const char*> kControllers[] = {
    {ControllerKind::Cascade, "Cascade"},
    {ControllerKind::Pd, "Pd"},
    {ControllerKind::CascadeNoXi, "CascadeNoXi"},
    {ControllerKind::Open, "Open"}};
inline constexpr std::pair<AccumulatorMode, const char*> kModes[] = {
    {AccumulatorMode::Mode1, "Mode1"}, {AccumulatorMode::Mode2, "Mode2"}};
inline constexpr std::pair<CrossTermSign, const char*> kCross[] = {
    {CrossTermSign::Plus, "Plus"}, {CrossTermSign::Minus, "Minus"}};
inline constexpr std::pair<RbfKind, const char*> kRbf[] = {
    {RbfKind::Gaussian, "Gaussian"}, {RbfKind::Quadratic, "Quadratic"}};
inline constexpr std::pair<WeightStep, const char*> kWeightStep[] = {
    {WeightStep::Exact, "Exact"}, {WeightStep::Euler, "Euler"}};
inline constexpr std::pair<ResidualFeedback, const char*> kResidual[] = {
    {ResidualFeedback::Solved, "Solved"},
    {ResidualFeedback::Delayed, "Delayed"},
    {ResidualFeedback::Off, "Off"}};

}  // namespace detail

/// Controller name as used on the command line; case-insensitive, "PD" accepted.
inline ControllerKind controller_from_name(const std::string& name) {
    std::string lower = name;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    for (const auto& [v, n] : detail::kControllers) {
        std::string ln = n;
        std::transform(ln.begin(), ln.end(), ln.begin(),
                       [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
        if (ln == lower) return v;
    }
    throw ConfigError("variant", "unknown controller '" + name +
                                     "' (expected Cascade, Pd, CascadeNoXi or Open)");
}

// ---------------------------------------------------------------------------
// Parameter blocks
// ---------------------------------------------------------------------------

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ReferenceConfig, amplitude, frequency)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(
    PlantParams, shank_mass, shank_inertia, com_distance, gravity, coulomb_friction,
    viscous_friction, interaction_stiffness, interaction_damping, piston_area_a, piston_area_b,
    bulk_modulus, chamber_volume, flow_gain, flow_pressure_coeff, internal_leakage,
    external_leakage, valve_time_constant, valve_gain, cylinder_initial_length,
    piston_initial_position, mount1_x, mount1_y, mount2_x, mount2_y, arm_side1, arm_side2,
    current_min, current_max)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AccumulatorParams, polytropic_exponent,
                                                gas_volume_high, flow_rate, pressure_high,
                                                pressure_low, recharge_time)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(HlEstimates, inertia, mass, coulomb, viscous)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PdGains, kp, kd)

inline json to_json_value(const HlGains& g) {
    return {{"k_virtual", g.k_virtual},
            {"k_velocity", g.k_velocity},
            {"penalty_e1", g.penalty_e1},
            {"penalty_e2", g.penalty_e2},
            {"adapt_inertia", g.adapt_inertia},
            {"adapt_mass", g.adapt_mass},
            {"adapt_coulomb", g.adapt_coulomb},
            {"adapt_viscous", g.adapt_viscous},
            {"cross_term", detail::enum_name(g.cross_term, detail::kCross)}};
}

inline HlGains hl_gains_from(const json& j) {
    HlGains g;
    g.k_virtual = j.at("k_virtual").get<double>();
    g.k_velocity = j.at("k_velocity").get<double>();
    g.penalty_e1 = j.at("penalty_e1").get<double>();
    g.penalty_e2 = j.at("penalty_e2").get<double>();
    g.adapt_inertia = j.at("adapt_inertia").get<double>();
    g.adapt_mass = j.at("adapt_mass").get<double>();
    g.adapt_coulomb = j.at("adapt_coulomb").get<double>();
    g.adapt_viscous = j.at("adapt_viscous").get<double>();
    g.cross_term = detail::enum_from(j.at("cross_term"), "highlevel.cross_term", detail::kCross);
    return g;
}

inline json to_json_value(const LlGains& g) {
    return {{"k_force", g.k_force},
            {"penalty_force", g.penalty_force},
            {"k_aux", g.k_aux},
            {"aux_deadzone", g.aux_deadzone},
            {"smoothing_halfwidth", g.smoothing_halfwidth},
            {"residual_feedback", detail::enum_name(g.residual_feedback, detail::kResidual)}};
}

inline LlGains ll_gains_from(const json& j) {
    LlGains g;
    g.k_force = j.at("k_force").get<double>();
    g.penalty_force = j.at("penalty_force").get<double>();
    g.k_aux = j.at("k_aux").get<double>();
    g.aux_deadzone = j.at("aux_deadzone").get<double>();
    g.smoothing_halfwidth = j.at("smoothing_halfwidth").get<double>();
    g.residual_feedback =
        detail::enum_from(j.at("residual_feedback"), "lowlevel.residual_feedback", detail::kResidual);
    return g;
}

inline json to_json_value(const NetworkConfig& n) {
    return {{"rbf",
             {{"grid_lo", n.grid_lo},
              {"grid_hi", n.grid_hi},
              {"per_axis", n.per_axis},
              {"width", n.width},
              {"kind", detail::enum_name(n.kind, detail::kRbf)}}},
            {"jump", {{"orders", n.jump_orders}, {"first_order", n.jump_first_order}}},
            {"scaling", {{"offset", n.scaling.offset}, {"scale", n.scaling.scale}}},
            {"learning_rate", n.learning_rate},
            {"leakage", n.leakage},
            {"weight_step", detail::enum_name(n.weight_step, detail::kWeightStep)}};
}

inline NetworkConfig network_from(const json& j) {
    NetworkConfig n;
    const json& rbf = j.at("rbf");
    n.grid_lo = rbf.at("grid_lo").get<std::array<double, 3>>();
    n.grid_hi = rbf.at("grid_hi").get<std::array<double, 3>>();
    n.per_axis = rbf.at("per_axis").get<int>();
    n.width = rbf.at("width").get<double>();
    n.kind = detail::enum_from(rbf.at("kind"), "network.rbf.kind", detail::kRbf);
    n.jump_orders = j.at("jump").at("orders").get<int>();
    n.jump_first_order = j.at("jump").at("first_order").get<int>();
    n.scaling.offset = j.at("scaling").at("offset").get<Vec4>();
    n.scaling.scale = j.at("scaling").at("scale").get<Vec4>();
    n.learning_rate = j.at("learning_rate").get<double>();
    n.leakage = j.at("leakage").get<double>();
    n.weight_step = detail::enum_from(j.at("weight_step"), "network.weight_step", detail::kWeightStep);
    return n;
}

inline json to_json_value(const PlantState& s) {
    return {{"angle", s.angle},
            {"velocity", s.velocity},
            {"load_force", s.load_force},
            {"spool", s.spool},
            {"mode", detail::enum_name(s.mode, detail::kModes)}};
}

inline PlantState plant_state_from(const json& j) {
    PlantState s;
    s.angle = j.at("angle").get<double>();
    s.velocity = j.at("velocity").get<double>();
    s.load_force = j.at("load_force").get<double>();
    s.spool = j.at("spool").get<double>();
    s.mode = detail::enum_from(j.at("mode"), "initial_state.mode", detail::kModes);
    return s;
}

/// Full configuration as a JSON tree; also serves as the schema.
inline json to_json_value(const SimConfig& c) {
    json j;
    j["simulation"] = {{"dt", c.dt},
                       {"duration", c.duration},
                       {"controller", detail::enum_name(c.controller, detail::kControllers)},
                       {"metrics_window_start", c.metrics_window_start},
                       {"log_weights", c.log_weights}};
    j["reference"] = c.reference;
    j["plant"] = c.plant;
    j["accumulator"] = c.accumulator;
    j["highlevel"] = to_json_value(c.highlevel);
    j["initial_estimates"] = c.initial_estimates;
    j["lowlevel"] = to_json_value(c.lowlevel);
    j["network"] = to_json_value(c.network);
    j["pd"] = c.pd;
    j["initial_state"] = to_json_value(c.initial_state);
    return j;
}

inline SimConfig sim_config_from(const json& j) {
    SimConfig c;
    const json& sim = j.at("simulation");
    c.dt = sim.at("dt").get<double>();
    c.duration = sim.at("duration").get<double>();
    c.controller = detail::enum_from(sim.at("controller"), "simulation.controller", detail::kControllers);
    c.metrics_window_start = sim.at("metrics_window_start").get<double>();
    c.log_weights = sim.at("log_weights").get<bool>();
    c.reference = j.at("reference").get<ReferenceConfig>();
    c.plant = j.at("plant").get<PlantParams>();
    c.accumulator = j.at("accumulator").get<AccumulatorParams>();
    c.highlevel = hl_gains_from(j.at("highlevel"));
    c.initial_estimates = j.at("initial_estimates").get<HlEstimates>();
    c.lowlevel = ll_gains_from(j.at("lowlevel"));
    c.network = network_from(j.at("network"));
    c.pd = j.at("pd").get<PdGains>();
    c.initial_state = plant_state_from(j.at("initial_state"));
    return c;
}

// ---------------------------------------------------------------------------
// Schema merge
// ---------------------------------------------------------------------------

namespace detail {

inline const char* kind_name(const json& j) {
    if (j.is_object()) return "object";
    if (j.is_array()) return "array";
    if (j.is_boolean()) return "boolean";
    if (j.is_number_integer()) return "integer";
    if (j.is_number()) return "number";
    if (j.is_string()) return "string";
    return "null";
}

inline std::string join(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

/// Overwrites `base` with `user`, rejecting unknown keys and type changes.
inline void merge_checked(json& base, const json& user, const std::string& path) {
    if (base.is_object()) {
        if (!user.is_object()) throw ConfigError(path, std::string("expected an object, got ") + kind_name(user));
        for (auto it = user.begin(); it != user.end(); ++it) {
            const std::string p = join(path, it.key());
            if (!base.contains(it.key())) throw ConfigError(p, "unknown key");
            merge_checked(base[it.key()], it.value(), p);
        }
        return;
    }
    if (base.is_array()) {
        if (!user.is_array()) throw ConfigError(path, std::string("expected an array, got ") + kind_name(user));
        if (user.size() != base.size()) {
            throw ConfigError(path, "expected " + std::to_string(base.size()) + " entries, got " +
                                        std::to_string(user.size()));
        }
        for (std::size_t i = 0; i < user.size(); ++i) {
            merge_checked(base[i], user[i], path + "[" + std::to_string(i) + "]");
        }
        return;
    }
    const bool ok = (base.is_number_integer() && user.is_number_integer()) ||
                    (base.is_number_float() && user.is_number()) ||
                    (base.is_boolean() && user.is_boolean()) || (base.is_string() && user.is_string());
    if (!ok) {
        throw ConfigError(path, std::string("expected ") + kind_name(base) + ", got " + kind_name(user));
    }
    base = base.is_number_float() ? json(user.get<double>()) : user;
}

inline json::json_pointer pointer_of(const std::string& dotted) {
    std::string ptr;
    std::stringstream ss(dotted);
    std::string part;
    while (std::getline(ss, part, '.')) ptr += "/" + part;
    return json::json_pointer(ptr);
}

}  // namespace detail

/// Resolves a tree of overrides against the defaults.
inline SimConfig resolve_config(const json& overrides, json* resolved = nullptr) {
    json base = to_json_value(SimConfig{});
    detail::merge_checked(base, overrides, "");
    SimConfig c = sim_config_from(base);
    if (resolved) *resolved = base;
    return c;
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

struct Sweep {
    std::string path;           // dotted key, must name a number
    std::vector<double> values;
};

struct Scenario {
    std::string name;
    SimConfig config;
    json resolved;                    // full parameter tree after merging
    std::vector<std::string> plots;   // trace columns to render
    std::optional<Sweep> sweep;
};

inline const std::vector<std::string>& default_plots() {
    static const std::vector<std::string> p{"e1", "tau_hm", "u_applied"};
    return p;
}

/// Builds the config for one sweep value.
inline SimConfig apply_sweep(const Scenario& s, double value) {
    if (!s.sweep) return s.config;
    json tree = s.resolved;
    tree[detail::pointer_of(s.sweep->path)] = value;
    return sim_config_from(tree);
}

/// Parses scenario text. Throws ConfigError for syntax and schema problems;
/// physical invariants are checked separately with validate().
inline Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text, nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("not a valid scenario file: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("", "scenario must be a JSON object");
    Scenario s;
    s.name = "scenario";
    if (doc.contains("name")) {
        if (!doc["name"].is_string()) throw ConfigError("name", "expected string");
        s.name = doc["name"].get<std::string>();
        doc.erase("name");
    }
    s.plots = default_plots();
    if (doc.contains("plots")) {
        const json& p = doc["plots"];
        if (!p.is_array()) throw ConfigError("plots", "expected an array of column names");
        s.plots.clear();
        const std::vector<std::string> cols = trace_columns();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const std::string at = "plots[" + std::to_string(i) + "]";
            if (!p[i].is_string()) throw ConfigError(at, "expected string");
            const std::string col = p[i].get<std::string>();
            if (std::find(cols.begin(), cols.end(), col) == cols.end()) {
                throw ConfigError(at, "unknown trace column '" + col + "'");
            }
            s.plots.push_back(col);
        }
        doc.erase("plots");
    }
    std::optional<json> sweep;
    if (doc.contains("sweep")) {
        sweep = doc["sweep"];
        doc.erase("sweep");
    }
    try {
        s.config = resolve_config(doc, &s.resolved);
    } catch (const json::exception& e) {
        throw ConfigError("", e.what());
    }
    if (sweep) {
        const json& sw = *sweep;
        if (!sw.is_object() || !sw.contains("path") || !sw.contains("values") ||
            !sw["path"].is_string() || !sw["values"].is_array() || sw.size() != 2) {
            throw ConfigError("sweep", "expected {\"path\": string, \"values\": [numbers]}");
        }
        Sweep out;
        out.path = sw["path"].get<std::string>();
        const json::json_pointer ptr = detail::pointer_of(out.path);
        if (!s.resolved.contains(ptr) || !s.resolved[ptr].is_number_float()) {
            throw ConfigError("sweep.path", "'" + out.path + "' is not a numeric parameter");
        }
        for (const json& v : sw["values"]) {
            if (!v.is_number()) throw ConfigError("sweep.values", "expected numbers");
            out.values.push_back(v.get<double>());
        }
        if (out.values.empty()) throw ConfigError("sweep.values", "must not be empty");
        s.sweep = std::move(out);
    }
    return s;
}

/// Reads and parses a scenario file. A missing or unreadable file raises
/// std::ios_base::failure so callers can tell it apart from schema errors.
inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::ios_base::failure("cannot open scenario file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

// ---------------------------------------------------------------------------
// Provenance of defaults
// ---------------------------------------------------------------------------

/// Keys whose default was chosen for this implementation rather than taken
/// from the reference model's parameter table.
inline const std::vector<std::string>& assumed_parameters() {
    static const std::vector<std::string> keys{
        "simulation.metrics_window_start",
        "plant.shank_inertia",
        "plant.com_distance",
        "plant.gravity",
        "plant.bulk_modulus",
        "plant.chamber_volume",
        "plant.internal_leakage",
        "plant.external_leakage",
        "plant.mount1_x",
        "plant.mount1_y",
        "plant.mount2_x",
        "plant.mount2_y",
        "plant.arm_side1",
        "plant.arm_side2",
        "plant.current_min",
        "accumulator.polytropic_exponent",
        "accumulator.gas_volume_high",
        "accumulator.flow_rate",
        "accumulator.pressure_low",
        "accumulator.recharge_time",
        "highlevel.cross_term",
        "initial_estimates.inertia",
        "initial_estimates.mass",
        "initial_estimates.coulomb",
        "initial_estimates.viscous",
        "lowlevel.k_aux",
        "lowlevel.aux_deadzone",
        "lowlevel.smoothing_halfwidth",
        "lowlevel.residual_feedback",
        "network.rbf.grid_lo",
        "network.rbf.grid_hi",
        "network.rbf.per_axis",
        "network.rbf.kind",
        "network.jump.first_order",
        "network.scaling.offset",
        "network.scaling.scale",
        "network.weight_step",
    };
    return keys;
}

inline bool is_assumed(const std::string& dotted) {
    const auto& k = assumed_parameters();
    return std::find(k.begin(), k.end(), dotted) != k.end();
}

/// One "key = value" line per leaf, assumed values tagged.
inline std::string describe(const json& tree, const std::string& prefix = "") {
    std::string out;
    for (auto it = tree.begin(); it != tree.end(); ++it) {
        const std::string p = detail::join(prefix, it.key());
        if (it.value().is_object()) {
            out += describe(it.value(), p);
        } else {
            out += p + " = " + it.value().dump() + (is_assumed(p) ? "   [assumed]" : "") + "\n";
        }
    }
    return out;
}

}  // namespace exo
