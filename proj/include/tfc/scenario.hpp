#pragma once

// Declarative scenario files (YAML). A ScenarioFile holds values exactly as
// written, in the file's declared frequency unit; build_scenario() resolves
// the case file, applies overrides and converts to internal rad/s.
//
//   name: two-bus-smoke
//   case: two_bus.case              # relative to the scenario file
//   controlled: [1]                 # optional; replaces the case flags
//   inertia: [{buses: [1, 2], value: 1}]   # optional overrides
//   units: {frequency: rad_per_s, base_hz: 60}
//   simulation: {mode: linear, step: 0.001, horizon: 60, activation_time: 0, sampling: stage}
//   initial: {kind: equilibrium, omega_offset: 0}
//   injections:
//     - {buses: [1], kind: sinusoidal_window, amplitude: 0.3, rate: 0.157, t_on: 0.5, t_off: 20.5}
//   controller:
//     enabled: true
//     band: [-0.2, -0.1, 0.1, 0.2]  # lower, lower threshold, upper threshold, upper
//     class_k: {kind: linear, gamma: 2}
//   checks: {enabled: [all], zero_tol: 1e-6}
//   output: {directory: out}

#include "tfc/case_file.hpp"
#include "tfc/controller.hpp"
#include "tfc/dynamics.hpp"
#include "tfc/errors.hpp"
#include "tfc/injection.hpp"
#include "tfc/simulation.hpp"
#include "tfc/units.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace tfc {

/// 1-based bus list, or every bus.
struct BusSelection {
    bool all = false;
    std::vector<std::size_t> buses;

    bool operator==(const BusSelection&) const = default;

    bool contains(std::size_t bus1) const
    {
        return all || std::find(buses.begin(), buses.end(), bus1) != buses.end();
    }
};

struct ValueOverride {
    BusSelection buses;
    double value = 0.0;

    bool operator==(const ValueOverride&) const = default;
};

struct InjectionSpec {
    enum class Kind { constant, sinusoidal_window, piecewise_constant };
    BusSelection buses;
    Kind kind = Kind::constant;
    std::optional<double> value; // constant; case injection when absent
    std::optional<double> base;  // sinusoidal window; case injection when absent
    double amplitude = 0.0;
    double rate = 0.0;
    double t_on = 0.0;
    double t_off = 0.0;
    std::optional<double> initial; // piecewise; case injection when absent
    std::vector<std::pair<double, double>> breakpoints;

    bool operator==(const InjectionSpec&) const = default;
};

struct ClassKSpec {
    ClassK::Kind kind = ClassK::Kind::linear;
    double gamma = 1.0;
    double width = 0.0; // saturating only, frequency units

    bool operator==(const ClassKSpec&) const = default;
};

struct BusControllerSpec {
    std::size_t bus = 0; // 1-based
    std::optional<std::array<double, 4>> band;
    std::optional<ClassKSpec> class_k;

    bool operator==(const BusControllerSpec&) const = default;
};

struct ErrorSignalSpec {
    ErrorSignal::Kind kind = ErrorSignal::Kind::zero;
    double amplitude = 0.0;
    double rate = 0.0;
    double phase = 0.0;

    bool operator==(const ErrorSignalSpec&) const = default;
};

struct UncertaintySpec {
    BusSelection buses;
    std::optional<double> damping_estimate; // true damping when absent
    double injection_scale = 0.0;
    ErrorSignalSpec omega_error;
    ErrorSignalSpec flow_error;
    ErrorSignalSpec injection_offset;
    std::optional<ErrorBounds> bounds; // realized maxima when absent

    bool operator==(const UncertaintySpec&) const = default;
};

struct ControllerSection {
    bool enabled = true;
    std::array<double, 4> band{-0.2, -0.1, 0.1, 0.2};
    ClassKSpec class_k;
    std::vector<BusControllerSpec> buses;
    std::vector<UncertaintySpec> uncertainty;

    bool operator==(const ControllerSection&) const = default;
};

struct SimulationSection {
    DynamicsMode mode = DynamicsMode::linear;
    double step = 1e-3;
    double horizon = 60.0;
    double activation_time = 0.0;
    ControllerSampling sampling = ControllerSampling::stage;

    bool operator==(const SimulationSection&) const = default;
};

struct InitialSection {
    enum class Kind { equilibrium, explicit_state };
    Kind kind = Kind::equilibrium;
    double omega_offset = 0.0;  // added to every bus
    std::vector<double> omega;  // explicit
    std::vector<double> theta;  // explicit bus angles (rad); lambda = D theta
    std::vector<double> lambda; // explicit edge angles, alternative to theta

    bool operator==(const InitialSection&) const = default;
};

struct ChecksSection {
    std::vector<std::string> enabled{"all"};
    double zero_tol = 1e-6;
    double convergence_tol = 1e-4;
    double invariance_tol = 0.0;
    std::optional<double> energy_tol;       // 10 h^2 when absent
    std::optional<double> attractivity_tol; // 10 h^2 when absent
    std::optional<double> inflation;        // band inflation for invariance, frequency units

    bool operator==(const ChecksSection&) const = default;
};

struct SweepSection {
    std::string param = "gamma";
    std::vector<double> values;
    BusSelection buses{true, {}};

    bool operator==(const SweepSection&) const = default;
};

struct OutputSection {
    std::string directory = "out";
    std::string trajectory = "trajectory.csv";
    std::string report = "report.txt";

    bool operator==(const OutputSection&) const = default;
};

struct ScenarioFile {
    std::string name;
    std::string case_path;
    std::optional<std::vector<std::size_t>> controlled;
    std::vector<ValueOverride> inertia;
    std::vector<ValueOverride> damping;
    FrequencyUnit unit = FrequencyUnit::rad_per_s;
    double base_hz = 60.0;
    SimulationSection simulation;
    InitialSection initial;
    std::vector<InjectionSpec> injections;
    ControllerSection controller;
    ChecksSection checks;
    std::optional<SweepSection> sweep;
    OutputSection output;

    bool operator==(const ScenarioFile&) const = default;
};

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

inline std::size_t line_of(const YAML::Node& node) { return static_cast<std::size_t>(node.Mark().line + 1); }

inline void require_map(const YAML::Node& node, const std::string& what)
{
    if (!node.IsMap())
        throw ParseError(what + " must be a mapping", line_of(node));
}

inline void allow_keys(const YAML::Node& node, const std::string& what, std::initializer_list<const char*> keys)
{
    require_map(node, what);
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; }))
            throw ParseError("unknown key '" + key + "' in " + what, line_of(kv.first));
    }
}

inline double as_double(const YAML::Node& node, const std::string& what)
{
    double v = 0.0;
    if (!node.IsScalar() || !parse_double(node.Scalar(), v))
        throw ParseError(what + ": expected a number", line_of(node));
    return v;
}

inline std::size_t as_bus(const YAML::Node& node, const std::string& what)
{
    double v = as_double(node, what);
    if (v < 1 || v != std::floor(v))
        throw ParseError(what + ": expected a positive bus number", line_of(node));
    return static_cast<std::size_t>(v);
}

inline std::string as_string(const YAML::Node& node, const std::string& what)
{
    if (!node.IsScalar())
        throw ParseError(what + ": expected a string", line_of(node));
    return node.Scalar();
}

inline bool as_bool(const YAML::Node& node, const std::string& what)
{
    const auto s = as_string(node, what);
    if (s == "true")
        return true;
    if (s == "false")
        return false;
    throw ParseError(what + ": expected true or false", line_of(node));
}

inline std::vector<double> as_doubles(const YAML::Node& node, const std::string& what)
{
    if (!node.IsSequence())
        throw ParseError(what + ": expected a list of numbers", line_of(node));
    std::vector<double> out;
    for (const auto& v : node)
        out.push_back(as_double(v, what));
    return out;
}

inline std::vector<std::size_t> as_buses(const YAML::Node& node, const std::string& what)
{
    if (!node.IsSequence())
        throw ParseError(what + ": expected a list of bus numbers", line_of(node));
    std::vector<std::size_t> out;
    for (const auto& v : node)
        out.push_back(as_bus(v, what));
    return out;
}

/// `bus: k`, `buses: [..]` or `buses: all` inside a mapping.
inline BusSelection parse_selection(const YAML::Node& node, const std::string& what)
{
    BusSelection sel;
    if (node["bus"] && node["buses"])
        throw ParseError(what + ": give either bus or buses", line_of(node));
    if (node["bus"]) {
        sel.buses.push_back(as_bus(node["bus"], what + ".bus"));
    } else if (node["buses"]) {
        const auto& b = node["buses"];
        if (b.IsScalar() && b.Scalar() == "all")
            sel.all = true;
        else
            sel.buses = as_buses(b, what + ".buses");
    } else {
        throw ParseError(what + ": missing bus or buses", line_of(node));
    }
    return sel;
}

template <class Enum>
Enum as_enum(const YAML::Node& node, const std::string& what, std::initializer_list<std::pair<const char*, Enum>> names)
{
    const auto s = as_string(node, what);
    for (const auto& [n, e] : names)
        if (s == n)
            return e;
    std::string list;
    for (const auto& [n, e] : names)
        list += (list.empty() ? "" : ", ") + std::string(n);
    throw ParseError(what + ": '" + s + "' is not one of " + list, line_of(node));
}

inline ClassKSpec parse_class_k(const YAML::Node& node, const std::string& what)
{
    allow_keys(node, what, {"kind", "gamma", "width"});
    ClassKSpec k;
    if (node["kind"])
        k.kind = as_enum<ClassK::Kind>(node["kind"], what + ".kind",
                                       {{"linear", ClassK::Kind::linear}, {"saturating", ClassK::Kind::saturating}});
    if (node["gamma"])
        k.gamma = as_double(node["gamma"], what + ".gamma");
    if (node["width"])
        k.width = as_double(node["width"], what + ".width");
    if (k.kind == ClassK::Kind::saturating && !node["width"])
        throw ParseError(what + ": saturating class-K needs a width", line_of(node));
    return k;
}

inline std::array<double, 4> parse_band(const YAML::Node& node, const std::string& what)
{
    auto v = as_doubles(node, what);
    if (v.size() != 4)
        throw ParseError(what + ": expected [lower, lower_threshold, upper_threshold, upper]", line_of(node));
    return {v[0], v[1], v[2], v[3]};
}

inline ErrorSignalSpec parse_signal(const YAML::Node& node, const std::string& what)
{
    allow_keys(node, what, {"kind", "amplitude", "rate", "phase"});
    ErrorSignalSpec s;
    s.kind = as_enum<ErrorSignal::Kind>(node["kind"] ? node["kind"] : YAML::Node("zero"), what + ".kind",
                                        {{"zero", ErrorSignal::Kind::zero},
                                         {"constant", ErrorSignal::Kind::constant},
                                         {"sinusoid", ErrorSignal::Kind::sinusoid}});
    if (node["amplitude"])
        s.amplitude = as_double(node["amplitude"], what + ".amplitude");
    if (node["rate"])
        s.rate = as_double(node["rate"], what + ".rate");
    if (node["phase"])
        s.phase = as_double(node["phase"], what + ".phase");
    return s;
}

inline std::vector<ValueOverride> parse_overrides(const YAML::Node& node, const std::string& what)
{
    if (!node.IsSequence())
        throw ParseError(what + ": expected a list", line_of(node));
    std::vector<ValueOverride> out;
    for (const auto& item : node) {
        allow_keys(item, what, {"bus", "buses", "value"});
        if (!item["value"])
            throw ParseError(what + ": missing value", line_of(item));
        out.push_back({parse_selection(item, what), as_double(item["value"], what + ".value")});
    }
    return out;
}

inline InjectionSpec parse_injection(const YAML::Node& node)
{
    const std::string what = "injections";
    allow_keys(node, what,
               {"bus", "buses", "kind", "value", "base", "amplitude", "rate", "t_on", "t_off", "initial",
                "breakpoints"});
    InjectionSpec s;
    s.buses = parse_selection(node, what);
    if (!node["kind"])
        throw ParseError(what + ": missing kind", line_of(node));
    s.kind = as_enum<InjectionSpec::Kind>(node["kind"], what + ".kind",
                                          {{"constant", InjectionSpec::Kind::constant},
                                           {"sinusoidal_window", InjectionSpec::Kind::sinusoidal_window},
                                           {"piecewise_constant", InjectionSpec::Kind::piecewise_constant}});
    auto opt = [&](const char* key) -> std::optional<double> {
        if (!node[key])
            return std::nullopt;
        return as_double(node[key], what + "." + key);
    };
    auto req = [&](const char* key) {
        if (!node[key])
            throw ParseError(what + ": sinusoidal_window needs " + key, line_of(node));
        return as_double(node[key], what + "." + key);
    };
    switch (s.kind) {
    case InjectionSpec::Kind::constant:
        s.value = opt("value");
        break;
    case InjectionSpec::Kind::sinusoidal_window:
        s.base = opt("base");
        s.amplitude = req("amplitude");
        s.rate = req("rate");
        s.t_on = req("t_on");
        s.t_off = req("t_off");
        break;
    case InjectionSpec::Kind::piecewise_constant:
        s.initial = opt("initial");
        if (node["breakpoints"]) {
            if (!node["breakpoints"].IsSequence())
                throw ParseError(what + ".breakpoints: expected a list of [time, value]", line_of(node["breakpoints"]));
            for (const auto& bp : node["breakpoints"]) {
                auto tv = as_doubles(bp, what + ".breakpoints");
                if (tv.size() != 2)
                    throw ParseError(what + ".breakpoints: expected [time, value]", line_of(bp));
                s.breakpoints.emplace_back(tv[0], tv[1]);
            }
        }
        break;
    }
    return s;
}

inline UncertaintySpec parse_uncertainty(const YAML::Node& node)
{
    const std::string what = "controller.uncertainty";
    allow_keys(node, what,
               {"bus", "buses", "damping_estimate", "injection_scale", "omega_error", "flow_error",
                "injection_offset", "bounds"});
    UncertaintySpec u;
    u.buses = parse_selection(node, what);
    if (node["damping_estimate"])
        u.damping_estimate = as_double(node["damping_estimate"], what + ".damping_estimate");
    if (node["injection_scale"])
        u.injection_scale = as_double(node["injection_scale"], what + ".injection_scale");
    if (node["omega_error"])
        u.omega_error = parse_signal(node["omega_error"], what + ".omega_error");
    if (node["flow_error"])
        u.flow_error = parse_signal(node["flow_error"], what + ".flow_error");
    if (node["injection_offset"])
        u.injection_offset = parse_signal(node["injection_offset"], what + ".injection_offset");
    if (const auto& b = node["bounds"]) {
        allow_keys(b, what + ".bounds", {"omega", "flow", "injection", "damping"});
        ErrorBounds e;
        if (b["omega"])
            e.omega = as_double(b["omega"], what + ".bounds.omega");
        if (b["flow"])
            e.flow = as_double(b["flow"], what + ".bounds.flow");
        if (b["injection"])
            e.injection = as_double(b["injection"], what + ".bounds.injection");
        if (b["damping"])
            e.damping = as_double(b["damping"], what + ".bounds.damping");
        u.bounds = e;
    }
    return u;
}

inline ScenarioFile parse_scenario_node(const YAML::Node& root)
{
    allow_keys(root, "scenario",
               {"name", "case", "controlled", "inertia", "damping", "units", "simulation", "initial", "injections",
                "controller", "checks", "sweep", "output"});
    ScenarioFile f;
    if (root["name"])
        f.name = as_string(root["name"], "name");
    if (!root["case"])
        throw ParseError("scenario: missing case", line_of(root));
    f.case_path = as_string(root["case"], "case");
    if (root["controlled"])
        f.controlled = as_buses(root["controlled"], "controlled");
    if (root["inertia"])
        f.inertia = parse_overrides(root["inertia"], "inertia");
    if (root["damping"])
        f.damping = parse_overrides(root["damping"], "damping");

    if (const auto& u = root["units"]) {
        allow_keys(u, "units", {"frequency", "base_hz"});
        if (u["frequency"])
            f.unit = as_enum<FrequencyUnit>(u["frequency"], "units.frequency",
                                            {{"hz", FrequencyUnit::hz}, {"rad_per_s", FrequencyUnit::rad_per_s}});
        if (u["base_hz"])
            f.base_hz = as_double(u["base_hz"], "units.base_hz");
    }

    if (const auto& s = root["simulation"]) {
        allow_keys(s, "simulation", {"mode", "step", "horizon", "activation_time", "sampling"});
        if (s["mode"])
            f.simulation.mode = as_enum<DynamicsMode>(
                s["mode"], "simulation.mode", {{"linear", DynamicsMode::linear}, {"nonlinear", DynamicsMode::nonlinear}});
        if (s["step"])
            f.simulation.step = as_double(s["step"], "simulation.step");
        if (s["horizon"])
            f.simulation.horizon = as_double(s["horizon"], "simulation.horizon");
        if (s["activation_time"])
            f.simulation.activation_time = as_double(s["activation_time"], "simulation.activation_time");
        if (s["sampling"])
            f.simulation.sampling = as_enum<ControllerSampling>(
                s["sampling"], "simulation.sampling",
                {{"stage", ControllerSampling::stage}, {"zero_order_hold", ControllerSampling::zero_order_hold}});
    }

    if (const auto& i = root["initial"]) {
        allow_keys(i, "initial", {"kind", "omega_offset", "omega", "theta", "lambda"});
        if (i["kind"])
            f.initial.kind = as_enum<InitialSection::Kind>(
                i["kind"], "initial.kind",
                {{"equilibrium", InitialSection::Kind::equilibrium}, {"explicit", InitialSection::Kind::explicit_state}});
        if (i["omega_offset"])
            f.initial.omega_offset = as_double(i["omega_offset"], "initial.omega_offset");
        if (i["omega"])
            f.initial.omega = as_doubles(i["omega"], "initial.omega");
        if (i["theta"])
            f.initial.theta = as_doubles(i["theta"], "initial.theta");
        if (i["lambda"])
            f.initial.lambda = as_doubles(i["lambda"], "initial.lambda");
        if (f.initial.kind == InitialSection::Kind::explicit_state && f.initial.omega.empty())
            throw ParseError("initial: explicit state needs omega", line_of(i));
        if (!f.initial.theta.empty() && !f.initial.lambda.empty())
            throw ParseError("initial: give either theta or lambda", line_of(i));
    }

    if (const auto& inj = root["injections"]) {
        if (!inj.IsSequence())
            throw ParseError("injections: expected a list", line_of(inj));
        for (const auto& item : inj)
            f.injections.push_back(parse_injection(item));
    }

    if (const auto& c = root["controller"]) {
        allow_keys(c, "controller", {"enabled", "band", "class_k", "buses", "uncertainty"});
        if (c["enabled"])
            f.controller.enabled = as_bool(c["enabled"], "controller.enabled");
        if (c["band"])
            f.controller.band = parse_band(c["band"], "controller.band");
        if (c["class_k"])
            f.controller.class_k = parse_class_k(c["class_k"], "controller.class_k");
        if (const auto& buses = c["buses"]) {
            if (!buses.IsSequence())
                throw ParseError("controller.buses: expected a list", line_of(buses));
            for (const auto& b : buses) {
                allow_keys(b, "controller.buses", {"bus", "band", "class_k"});
                BusControllerSpec spec;
                if (!b["bus"])
                    throw ParseError("controller.buses: missing bus", line_of(b));
                spec.bus = as_bus(b["bus"], "controller.buses.bus");
                if (b["band"])
                    spec.band = parse_band(b["band"], "controller.buses.band");
                if (b["class_k"])
                    spec.class_k = parse_class_k(b["class_k"], "controller.buses.class_k");
                f.controller.buses.push_back(spec);
            }
        }
        if (const auto& unc = c["uncertainty"]) {
            if (!unc.IsSequence())
                throw ParseError("controller.uncertainty: expected a list", line_of(unc));
            for (const auto& u : unc)
                f.controller.uncertainty.push_back(parse_uncertainty(u));
        }
    }

    if (const auto& ch = root["checks"]) {
        allow_keys(ch, "checks",
                   {"enabled", "zero_tol", "convergence_tol", "invariance_tol", "energy_tol", "attractivity_tol",
                    "inflation"});
        if (const auto& e = ch["enabled"]) {
            f.checks.enabled.clear();
            if (e.IsScalar())
                f.checks.enabled.push_back(e.Scalar());
            else if (e.IsSequence())
                for (const auto& n : e)
                    f.checks.enabled.push_back(as_string(n, "checks.enabled"));
            else
                throw ParseError("checks.enabled: expected a list of check names", line_of(e));
        }
        if (ch["zero_tol"])
            f.checks.zero_tol = as_double(ch["zero_tol"], "checks.zero_tol");
        if (ch["convergence_tol"])
            f.checks.convergence_tol = as_double(ch["convergence_tol"], "checks.convergence_tol");
        if (ch["invariance_tol"])
            f.checks.invariance_tol = as_double(ch["invariance_tol"], "checks.invariance_tol");
        if (ch["energy_tol"])
            f.checks.energy_tol = as_double(ch["energy_tol"], "checks.energy_tol");
        if (ch["attractivity_tol"])
            f.checks.attractivity_tol = as_double(ch["attractivity_tol"], "checks.attractivity_tol");
        if (ch["inflation"])
            f.checks.inflation = as_double(ch["inflation"], "checks.inflation");
    }

    if (const auto& sw = root["sweep"]) {
        allow_keys(sw, "sweep", {"param", "values", "bus", "buses"});
        SweepSection s;
        if (sw["param"])
            s.param = as_string(sw["param"], "sweep.param");
        if (sw["values"])
            s.values = as_doubles(sw["values"], "sweep.values");
        if (sw["bus"] || sw["buses"])
            s.buses = parse_selection(sw, "sweep");
        f.sweep = s;
    }

    if (const auto& o = root["output"]) {
        allow_keys(o, "output", {"directory", "trajectory", "report"});
        if (o["directory"])
            f.output.directory = as_string(o["directory"], "output.directory");
        if (o["trajectory"])
            f.output.trajectory = as_string(o["trajectory"], "output.trajectory");
        if (o["report"])
            f.output.report = as_string(o["report"], "output.report");
    }
    return f;
}

} // namespace detail

inline ScenarioFile parse_scenario(const std::string& text)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ParseError(e.msg, static_cast<std::size_t>(e.mark.line + 1));
    }
    try {
        return detail::parse_scenario_node(root);
    } catch (const YAML::Exception& e) {
        throw ParseError(e.msg, static_cast<std::size_t>(e.mark.line + 1));
    }
}

inline ScenarioFile load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ParseError("cannot open scenario '" + path + "'", 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

// ---------------------------------------------------------------------------
// Emitting

namespace detail {

inline void emit_num(YAML::Emitter& out, double v) { out << format_double(v); }

inline void emit_selection(YAML::Emitter& out, const BusSelection& s)
{
    if (s.all) {
        out << YAML::Key << "buses" << YAML::Value << "all";
        return;
    }
    out << YAML::Key << "buses" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (auto b : s.buses)
        out << b;
    out << YAML::EndSeq;
}

inline void emit_nums(YAML::Emitter& out, const std::vector<double>& v)
{
    out << YAML::Flow << YAML::BeginSeq;
    for (double x : v)
        emit_num(out, x);
    out << YAML::EndSeq;
}

inline void emit_class_k(YAML::Emitter& out, const ClassKSpec& k)
{
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << (k.kind == ClassK::Kind::saturating ? "saturating" : "linear");
    out << YAML::Key << "gamma" << YAML::Value;
    emit_num(out, k.gamma);
    if (k.kind == ClassK::Kind::saturating) {
        out << YAML::Key << "width" << YAML::Value;
        emit_num(out, k.width);
    }
    out << YAML::EndMap;
}

inline void emit_signal(YAML::Emitter& out, const char* key, const ErrorSignalSpec& s)
{
    if (s.kind == ErrorSignal::Kind::zero)
        return;
    out << YAML::Key << key << YAML::Value << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << (s.kind == ErrorSignal::Kind::constant ? "constant" : "sinusoid");
    out << YAML::Key << "amplitude" << YAML::Value;
    emit_num(out, s.amplitude);
    if (s.kind == ErrorSignal::Kind::sinusoid) {
        out << YAML::Key << "rate" << YAML::Value;
        emit_num(out, s.rate);
        out << YAML::Key << "phase" << YAML::Value;
        emit_num(out, s.phase);
    }
    out << YAML::EndMap;
}

inline void emit_overrides(YAML::Emitter& out, const char* key, const std::vector<ValueOverride>& v)
{
    if (v.empty())
        return;
    out << YAML::Key << key << YAML::Value << YAML::BeginSeq;
    for (const auto& o : v) {
        out << YAML::Flow << YAML::BeginMap;
        emit_selection(out, o.buses);
        out << YAML::Key << "value" << YAML::Value;
        emit_num(out, o.value);
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
}

} // namespace detail

inline std::string emit_scenario(const ScenarioFile& f)
{
    using detail::emit_num;
    YAML::Emitter out;
    out << YAML::BeginMap;
    if (!f.name.empty())
        out << YAML::Key << "name" << YAML::Value << f.name;
    out << YAML::Key << "case" << YAML::Value << f.case_path;
    if (f.controlled) {
        out << YAML::Key << "controlled" << YAML::Value << YAML::Flow << YAML::BeginSeq;
        for (auto b : *f.controlled)
            out << b;
        out << YAML::EndSeq;
    }
    detail::emit_overrides(out, "inertia", f.inertia);
    detail::emit_overrides(out, "damping", f.damping);

    out << YAML::Key << "units" << YAML::Value << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "frequency" << YAML::Value << std::string(to_string(f.unit));
    out << YAML::Key << "base_hz" << YAML::Value;
    emit_num(out, f.base_hz);
    out << YAML::EndMap;

    const auto& s = f.simulation;
    out << YAML::Key << "simulation" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "mode" << YAML::Value << (s.mode == DynamicsMode::linear ? "linear" : "nonlinear");
    out << YAML::Key << "step" << YAML::Value;
    emit_num(out, s.step);
    out << YAML::Key << "horizon" << YAML::Value;
    emit_num(out, s.horizon);
    out << YAML::Key << "activation_time" << YAML::Value;
    emit_num(out, s.activation_time);
    out << YAML::Key << "sampling" << YAML::Value
        << (s.sampling == ControllerSampling::stage ? "stage" : "zero_order_hold");
    out << YAML::EndMap;

    const auto& i = f.initial;
    out << YAML::Key << "initial" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value
        << (i.kind == InitialSection::Kind::equilibrium ? "equilibrium" : "explicit");
    out << YAML::Key << "omega_offset" << YAML::Value;
    emit_num(out, i.omega_offset);
    if (!i.omega.empty()) {
        out << YAML::Key << "omega" << YAML::Value;
        detail::emit_nums(out, i.omega);
    }
    if (!i.theta.empty()) {
        out << YAML::Key << "theta" << YAML::Value;
        detail::emit_nums(out, i.theta);
    }
    if (!i.lambda.empty()) {
        out << YAML::Key << "lambda" << YAML::Value;
        detail::emit_nums(out, i.lambda);
    }
    out << YAML::EndMap;

    if (!f.injections.empty()) {
        out << YAML::Key << "injections" << YAML::Value << YAML::BeginSeq;
        for (const auto& inj : f.injections) {
            out << YAML::BeginMap;
            detail::emit_selection(out, inj.buses);
            auto opt = [&](const char* key, const std::optional<double>& v) {
                if (v) {
                    out << YAML::Key << key << YAML::Value;
                    emit_num(out, *v);
                }
            };
            auto num = [&](const char* key, double v) {
                out << YAML::Key << key << YAML::Value;
                emit_num(out, v);
            };
            switch (inj.kind) {
            case InjectionSpec::Kind::constant:
                out << YAML::Key << "kind" << YAML::Value << "constant";
                opt("value", inj.value);
                break;
            case InjectionSpec::Kind::sinusoidal_window:
                out << YAML::Key << "kind" << YAML::Value << "sinusoidal_window";
                opt("base", inj.base);
                num("amplitude", inj.amplitude);
                num("rate", inj.rate);
                num("t_on", inj.t_on);
                num("t_off", inj.t_off);
                break;
            case InjectionSpec::Kind::piecewise_constant:
                out << YAML::Key << "kind" << YAML::Value << "piecewise_constant";
                opt("initial", inj.initial);
                out << YAML::Key << "breakpoints" << YAML::Value << YAML::Flow << YAML::BeginSeq;
                for (const auto& [t, v] : inj.breakpoints)
                    detail::emit_nums(out, {t, v});
                out << YAML::EndSeq;
                break;
            }
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }

    const auto& c = f.controller;
    out << YAML::Key << "controller" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "enabled" << YAML::Value << (c.enabled ? "true" : "false");
    out << YAML::Key << "band" << YAML::Value;
    detail::emit_nums(out, {c.band.begin(), c.band.end()});
    out << YAML::Key << "class_k" << YAML::Value;
    detail::emit_class_k(out, c.class_k);
    if (!c.buses.empty()) {
        out << YAML::Key << "buses" << YAML::Value << YAML::BeginSeq;
        for (const auto& b : c.buses) {
            out << YAML::BeginMap << YAML::Key << "bus" << YAML::Value << b.bus;
            if (b.band) {
                out << YAML::Key << "band" << YAML::Value;
                detail::emit_nums(out, {b.band->begin(), b.band->end()});
            }
            if (b.class_k) {
                out << YAML::Key << "class_k" << YAML::Value;
                detail::emit_class_k(out, *b.class_k);
            }
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    if (!c.uncertainty.empty()) {
        out << YAML::Key << "uncertainty" << YAML::Value << YAML::BeginSeq;
        for (const auto& u : c.uncertainty) {
            out << YAML::BeginMap;
            detail::emit_selection(out, u.buses);
            if (u.damping_estimate) {
                out << YAML::Key << "damping_estimate" << YAML::Value;
                emit_num(out, *u.damping_estimate);
            }
            out << YAML::Key << "injection_scale" << YAML::Value;
            emit_num(out, u.injection_scale);
            detail::emit_signal(out, "omega_error", u.omega_error);
            detail::emit_signal(out, "flow_error", u.flow_error);
            detail::emit_signal(out, "injection_offset", u.injection_offset);
            if (u.bounds) {
                out << YAML::Key << "bounds" << YAML::Value << YAML::Flow << YAML::BeginMap;
                out << YAML::Key << "omega" << YAML::Value;
                emit_num(out, u.bounds->omega);
                out << YAML::Key << "flow" << YAML::Value;
                emit_num(out, u.bounds->flow);
                out << YAML::Key << "injection" << YAML::Value;
                emit_num(out, u.bounds->injection);
                out << YAML::Key << "damping" << YAML::Value;
                emit_num(out, u.bounds->damping);
                out << YAML::EndMap;
            }
            out << YAML::EndMap;
        }
        out << YAML::EndSeq;
    }
    out << YAML::EndMap;

    const auto& ch = f.checks;
    out << YAML::Key << "checks" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "enabled" << YAML::Value << YAML::Flow << ch.enabled;
    auto num = [&](const char* key, double v) {
        out << YAML::Key << key << YAML::Value;
        emit_num(out, v);
    };
    num("zero_tol", ch.zero_tol);
    num("convergence_tol", ch.convergence_tol);
    num("invariance_tol", ch.invariance_tol);
    if (ch.energy_tol)
        num("energy_tol", *ch.energy_tol);
    if (ch.attractivity_tol)
        num("attractivity_tol", *ch.attractivity_tol);
    if (ch.inflation)
        num("inflation", *ch.inflation);
    out << YAML::EndMap;

    if (f.sweep) {
        out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "param" << YAML::Value << f.sweep->param;
        out << YAML::Key << "values" << YAML::Value;
        detail::emit_nums(out, f.sweep->values);
        detail::emit_selection(out, f.sweep->buses);
        out << YAML::EndMap;
    }

    out << YAML::Key << "output" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "directory" << YAML::Value << f.output.directory;
    out << YAML::Key << "trajectory" << YAML::Value << f.output.trajectory;
    out << YAML::Key << "report" << YAML::Value << f.output.report;
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// Resolution

/// Check selection and tolerances in internal units.
struct CheckSettings {
    std::vector<std::string> requested; // as written, may contain "all"
    std::vector<std::string> enabled;   // expanded names
    double zero_tol = 1e-6;
    double convergence_tol = 1e-4;
    double invariance_tol = 0.0;
    double energy_tol = 0.0;
    double attractivity_tol = 0.0;
    double inflation = 0.0; // rad/s
};

inline const std::vector<std::string>& known_checks()
{
    static const std::vector<std::string> names{"invariance", "deactivation", "attractivity", "convergence",
                                                "energy",     "constraints",  "robust_margin"};
    return names;
}

/// A ScenarioFile resolved against its case file.
struct ResolvedScenario {
    Scenario scenario;
    CheckSettings checks;
    FrequencyUnit unit = FrequencyUnit::rad_per_s;
    std::filesystem::path output_directory;
    std::string trajectory_name;
    std::string report_name;
    std::vector<std::string> warnings;
};

/// Expands `all` to the checks that apply to this kind of run: open loop
/// only gets the model-level checks, runs with measurement errors only get
/// the robust band checks.
inline std::vector<std::string> expand_checks(const std::vector<std::string>& requested, bool controller_enabled,
                                              bool uncertain)
{
    std::vector<std::string> out;
    auto add = [&](const std::string& name) {
        if (std::find(out.begin(), out.end(), name) == out.end())
            out.push_back(name);
    };
    for (const auto& r : requested) {
        if (r == "none")
            continue;
        if (r == "all") {
            if (!controller_enabled) {
                for (const char* n : {"invariance", "convergence", "energy"})
                    add(n);
            } else if (uncertain) {
                for (const char* n : {"invariance", "robust_margin"})
                    add(n);
            } else {
                for (const char* n : {"invariance", "deactivation", "attractivity", "convergence", "energy",
                                      "constraints"})
                    add(n);
            }
            continue;
        }
        if (std::find(known_checks().begin(), known_checks().end(), r) == known_checks().end())
            throw ValidationError("unknown check '" + r + "'");
        add(r);
    }
    return out;
}

namespace detail {

inline void check_selection(const BusSelection& s, std::size_t n, const std::string& what)
{
    for (auto b : s.buses)
        if (b < 1 || b > n)
            throw ValidationError(what + ": bus " + std::to_string(b) + " does not exist");
}

inline FrequencyBand make_band(const std::array<double, 4>& b, FrequencyUnit unit)
{
    return {frequency_to_internal(b[0], unit), frequency_to_internal(b[1], unit), frequency_to_internal(b[2], unit),
            frequency_to_internal(b[3], unit)};
}

inline ClassK make_class_k(const ClassKSpec& k, FrequencyUnit unit)
{
    if (k.kind == ClassK::Kind::saturating)
        return ClassK::saturating(k.gamma, frequency_to_internal(k.width, unit));
    return ClassK::linear(k.gamma);
}

inline ErrorSignal make_signal(const ErrorSignalSpec& s, double scale)
{
    return {s.kind, s.amplitude * scale, s.rate, s.phase};
}

} // namespace detail

/// Resolves `file` against its case; relative paths are taken from
/// `base_dir`. `case_override` replaces the file's case reference.
inline ResolvedScenario build_scenario(const ScenarioFile& file, const std::filesystem::path& base_dir,
                                       const std::optional<std::filesystem::path>& case_override = std::nullopt)
{
    namespace fs = std::filesystem;
    const FrequencyUnit unit = file.unit;
    fs::path case_path = case_override ? *case_override : fs::path(file.case_path);
    if (case_path.is_relative() && !case_override)
        case_path = base_dir / case_path;
    if (!fs::exists(case_path))
        throw ValidationError("case file '" + case_path.string() + "' not found");

    CaseData data = load_case_data(case_path.string());
    PowerNetwork net = data.network;
    const std::size_t n = net.n_buses;

    if (file.controlled) {
        std::vector<std::size_t> c;
        for (auto b : *file.controlled) {
            if (b < 1 || b > n)
                throw ValidationError("controlled: bus " + std::to_string(b) + " does not exist");
            c.push_back(b - 1);
        }
        std::sort(c.begin(), c.end());
        c.erase(std::unique(c.begin(), c.end()), c.end());
        net.controlled = c;
    }
    for (const auto& o : file.inertia) {
        detail::check_selection(o.buses, n, "inertia");
        for (std::size_t i = 0; i < n; ++i)
            if (o.buses.contains(i + 1))
                net.inertia[i] = o.value;
    }
    for (const auto& o : file.damping) {
        detail::check_selection(o.buses, n, "damping");
        for (std::size_t i = 0; i < n; ++i)
            if (o.buses.contains(i + 1))
                net.damping[i] = o.value;
    }
    if (auto issues = validate(net); !issues.empty())
        throw ValidationError("network: " + issues.front());

    ResolvedScenario r;
    r.unit = unit;
    Scenario& s = r.scenario;
    s.network = network_to_internal(net, unit);
    s.mode = file.simulation.mode;
    s.step = file.simulation.step;
    s.horizon = file.simulation.horizon;
    s.base_hz = file.base_hz;

    // injections: unlisted buses keep the case's base injection
    std::vector<BusInjection> inj;
    for (std::size_t i = 0; i < n; ++i)
        inj.emplace_back(ConstantInjection{data.base_injection[i]});
    for (const auto& spec : file.injections) {
        detail::check_selection(spec.buses, n, "injections");
        for (std::size_t i = 0; i < n; ++i) {
            if (!spec.buses.contains(i + 1))
                continue;
            const double p0 = data.base_injection[i];
            switch (spec.kind) {
            case InjectionSpec::Kind::constant:
                inj[i] = ConstantInjection{spec.value.value_or(p0)};
                break;
            case InjectionSpec::Kind::sinusoidal_window:
                inj[i] = SinusoidalWindow{spec.base.value_or(p0), spec.amplitude, spec.rate, spec.t_on, spec.t_off};
                break;
            case InjectionSpec::Kind::piecewise_constant:
                inj[i] = PiecewiseConstant{spec.initial.value_or(p0), spec.breakpoints};
                break;
            }
        }
    }
    s.injections = InjectionProfile(inj);
    r.warnings = s.injections.warnings();

    // controllers
    s.controller.enabled = file.controller.enabled;
    s.controller.activation_time = file.simulation.activation_time;
    s.controller.sampling = file.simulation.sampling;
    for (const auto& b : file.controller.buses)
        if (b.bus < 1 || b.bus > n || !net.is_controlled(b.bus - 1))
            throw ValidationError("controller.buses: bus " + std::to_string(b.bus) + " is not controlled");
    for (std::size_t bus : net.controlled) {
        std::array<double, 4> band = file.controller.band;
        ClassKSpec k = file.controller.class_k;
        for (const auto& b : file.controller.buses)
            if (b.bus == bus + 1) {
                if (b.band)
                    band = *b.band;
                if (b.class_k)
                    k = *b.class_k;
            }
        BusController c;
        c.bus = bus;
        c.band = detail::make_band(band, unit);
        c.upper_alpha = detail::make_class_k(k, unit);
        c.lower_alpha = c.upper_alpha;
        s.controller.buses.push_back(c);
    }

    // measurement and parameter uncertainty
    if (!file.controller.uncertainty.empty()) {
        UncertaintyModel model;
        const double fs = frequency_scale(unit);
        for (const auto& spec : file.controller.uncertainty) {
            detail::check_selection(spec.buses, n, "controller.uncertainty");
            for (std::size_t bus : net.controlled) {
                if (!spec.buses.contains(bus + 1) || model.find(bus))
                    continue;
                BusUncertainty u;
                u.bus = bus;
                u.damping_estimate = coefficient_to_internal(spec.damping_estimate.value_or(net.damping[bus]), unit);
                u.omega_error = detail::make_signal(spec.omega_error, fs);
                u.flow_error = detail::make_signal(spec.flow_error, 1.0);
                u.injection_scale = spec.injection_scale;
                u.injection_offset = detail::make_signal(spec.injection_offset, 1.0);
                if (spec.bounds) {
                    u.bounds = {frequency_to_internal(spec.bounds->omega, unit), spec.bounds->flow,
                                spec.bounds->injection, coefficient_to_internal(spec.bounds->damping, unit)};
                } else {
                    u.bounds = {u.omega_error.bound(), u.flow_error.bound(),
                                std::abs(u.injection_scale) * s.injections.peak_magnitude(bus) +
                                    u.injection_offset.bound(),
                                std::abs(u.damping_estimate - s.network.damping[bus])};
                }
                model.buses.push_back(u);
            }
        }
        s.uncertainty = model;
    }

    // initial state
    const IncidenceMatrix d = build_incidence(s.network);
    const auto ni = static_cast<Eigen::Index>(n);
    const double offset = frequency_to_internal(file.initial.omega_offset, unit);
    if (file.initial.kind == InitialSection::Kind::equilibrium) {
        const Eigen::VectorXd p0 = s.injections.eval(0.0);
        if (s.mode == DynamicsMode::linear) {
            Equilibrium eq = equilibrium(s.network, d, p0);
            s.initial = {eq.lambda_inf, Eigen::VectorXd::Constant(ni, eq.omega_inf + offset)};
        } else {
            AngleEquilibrium eq = equilibrium_nonlinear(s.network, d, p0);
            s.initial = {eq.lambda_inf, Eigen::VectorXd::Constant(ni, eq.omega_inf + offset)};
        }
    } else {
        if (file.initial.omega.size() != n)
            throw ValidationError("initial.omega: expected " + std::to_string(n) + " values");
        Eigen::VectorXd omega(ni);
        for (std::size_t i = 0; i < n; ++i)
            omega[static_cast<Eigen::Index>(i)] = frequency_to_internal(file.initial.omega[i], unit) + offset;
        Eigen::VectorXd lambda = Eigen::VectorXd::Zero(d.rows());
        if (!file.initial.theta.empty()) {
            if (file.initial.theta.size() != n)
                throw ValidationError("initial.theta: expected " + std::to_string(n) + " values");
            lambda = d * Eigen::Map<const Eigen::VectorXd>(file.initial.theta.data(), ni);
        } else if (!file.initial.lambda.empty()) {
            if (file.initial.lambda.size() != net.line_count())
                throw ValidationError("initial.lambda: expected " + std::to_string(net.line_count()) + " values");
            lambda = Eigen::Map<const Eigen::VectorXd>(file.initial.lambda.data(), d.rows());
        }
        s.initial = {lambda, omega};
    }

    // checks
    const auto& ch = file.checks;
    r.checks.requested = ch.enabled;
    r.checks.enabled = expand_checks(ch.enabled, s.controller.enabled, s.uncertainty.has_value());
    r.checks.zero_tol = ch.zero_tol;
    r.checks.convergence_tol = ch.convergence_tol;
    r.checks.invariance_tol = ch.invariance_tol;
    r.checks.energy_tol = ch.energy_tol.value_or(10.0 * s.step * s.step);
    r.checks.attractivity_tol = ch.attractivity_tol.value_or(10.0 * s.step * s.step);
    r.checks.inflation = frequency_to_internal(ch.inflation.value_or(0.0), unit);
    if (std::find(r.checks.enabled.begin(), r.checks.enabled.end(), "robust_margin") != r.checks.enabled.end() &&
        !s.uncertainty)
        throw ValidationError("checks: robust_margin needs a controller.uncertainty section");

    fs::path out = file.output.directory;
    r.output_directory = out.is_relative() ? base_dir / out : out;
    r.trajectory_name = file.output.trajectory;
    r.report_name = file.output.report;

    if (auto issues = validate(s); !issues.empty())
        throw ValidationError(issues.front());
    return r;
}

} // namespace tfc
