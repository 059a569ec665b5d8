#pragma once

// Built-in scenarios. The ieee39-* presets describe the 39-bus experiment
// (controllers on generators 30-33, +-0.2 Hz band, +-0.1 Hz thresholds,
// gamma = 2, 60 Hz nominal, M = 0.1 on buses 1-29, E = 1 everywhere,
// sinusoidal load windows on buses 1-29). They reference a case file that
// the user supplies, with `injection` records giving p_i(0).

#include "tfc/scenario.hpp"

#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace tfc {

inline const std::vector<std::string>& preset_names()
{
    static const std::vector<std::string> names{"two-bus-smoke", "ieee39-main", "ieee39-robust", "ieee39-delayed",
                                                "gamma-sweep"};
    return names;
}

/// Case file shipped alongside a preset, if any.
inline std::optional<std::string> preset_case_text(const std::string& name)
{
    if (name != "two-bus-smoke")
        return std::nullopt;
    return "# two buses, unit inertia, damping and susceptance\n"
           "bus 1 1 1 controlled\n"
           "bus 2 1 1\n"
           "line 1 2 1\n"
           "injection 1 1\n"
           "injection 2 -1\n";
}

namespace detail {

inline std::vector<std::size_t> bus_range(std::size_t first, std::size_t last)
{
    std::vector<std::size_t> v;
    for (std::size_t b = first; b <= last; ++b)
        v.push_back(b);
    return v;
}

// p_i(t) = (1 + a sin(pi/20 (t - 0.5))) p_i(0) on (0.5, 20.5) for the given buses
inline InjectionSpec load_window(std::vector<std::size_t> buses, double amplitude = 0.3)
{
    InjectionSpec s;
    s.buses.buses = std::move(buses);
    s.kind = InjectionSpec::Kind::sinusoidal_window;
    s.amplitude = amplitude;
    s.rate = std::numbers::pi / 20.0;
    s.t_on = 0.5;
    s.t_off = 20.5;
    return s;
}

inline ScenarioFile ieee39_base(const std::string& name, const std::string& case_path)
{
    ScenarioFile f;
    f.name = name;
    f.case_path = case_path;
    f.controlled = std::vector<std::size_t>{30, 31, 32, 33};
    f.inertia = {{{false, bus_range(1, 29)}, 0.1}};
    f.damping = {{{true, {}}, 1.0}};
    f.unit = FrequencyUnit::hz;
    f.base_hz = 60.0;
    f.simulation.mode = DynamicsMode::nonlinear;
    f.simulation.step = 1e-3;
    f.simulation.horizon = 80.0;
    f.injections = {load_window(bus_range(1, 29))};
    f.controller.band = {-0.2, -0.1, 0.1, 0.2};
    f.controller.class_k = {ClassK::Kind::linear, 2.0, 0.0};
    f.output.directory = "out/" + name;
    return f;
}

} // namespace detail

/// Materializes a named preset. `case_path` is used by the ieee39 presets.
inline ScenarioFile preset(const std::string& name, const std::string& case_path = "ieee39.case")
{
    if (name == "two-bus-smoke") {
        ScenarioFile f;
        f.name = name;
        f.case_path = "two_bus.case";
        f.unit = FrequencyUnit::rad_per_s;
        f.simulation.mode = DynamicsMode::linear;
        f.simulation.step = 1e-3;
        f.simulation.horizon = 60.0;
        f.injections = {detail::load_window({1}, 0.6)};
        f.controller.band = {-0.2, -0.1, 0.1, 0.2};
        f.controller.class_k = {ClassK::Kind::linear, 2.0, 0.0};
        f.output.directory = "out/" + name;
        return f;
    }
    if (name == "ieee39-main")
        return detail::ieee39_base(name, case_path);
    if (name == "ieee39-robust") {
        // controllers assume E_hat = 2 (true E = 1) and read p_hat = 1.1 p
        ScenarioFile f = detail::ieee39_base(name, case_path);
        UncertaintySpec u;
        u.buses.all = true;
        u.damping_estimate = 2.0;
        u.injection_scale = 0.1;
        f.controller.uncertainty = {u};
        f.checks.inflation = 0.1;
        return f;
    }
    if (name == "ieee39-delayed") {
        ScenarioFile f = detail::ieee39_base(name, case_path);
        f.simulation.activation_time = 10.0;
        return f;
    }
    if (name == "gamma-sweep") {
        ScenarioFile f = detail::ieee39_base(name, case_path);
        SweepSection s;
        s.param = "gamma";
        s.values = {0.01, 100.0};
        s.buses = {false, {30}};
        f.sweep = s;
        return f;
    }
    throw ValidationError("unknown preset '" + name + "'");
}

} // namespace tfc
