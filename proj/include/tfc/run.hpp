#pragma once

// End-to-end runs: simulate a resolved scenario, export the trajectory,
// re-read it and evaluate the requested checks on what was written.

#include "tfc/scenario.hpp"
#include "tfc/simulation.hpp"
#include "tfc/trajectory_io.hpp"
#include "tfc/verification.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <string>
#include <vector>

namespace tfc {

/// Equilibrium the closed loop converges to under the final injections.
inline Equilibrium limit_point(const Scenario& s)
{
    const IncidenceMatrix d = build_incidence(s.network);
    const Eigen::VectorXd pstar = s.injections.final_values();
    if (s.mode == DynamicsMode::linear)
        return equilibrium(s.network, d, pstar);
    AngleEquilibrium eq = equilibrium_nonlinear(s.network, d, pstar);
    return {eq.omega_inf, eq.lambda_inf};
}

/// Robust-invariance inequalities at the configured inflation, per uncertain
/// bus. Reports both forms; passes only when the worst-case form holds.
inline CheckResult check_robust_margin(const Scenario& s, double delta)
{
    CheckResult r{"robust_margin"};
    if (!s.uncertainty)
        return r;
    for (const auto& u : s.uncertainty->buses) {
        const BusController* c = s.controller.find(u.bus);
        const std::string tag = std::to_string(u.bus + 1);
        if (!c || !c->upper_alpha.is_linear() || !c->lower_alpha.is_linear() ||
            c->upper_alpha.gamma() != c->lower_alpha.gamma()) {
            r.fail({0, 0.0, u.bus, 0.0, "robust margin needs one linear class-K slope per bus"});
            continue;
        }
        const double gamma = c->upper_alpha.gamma();
        const auto published = robust_margin(c->band, gamma, u.damping_estimate, u.bounds, delta);
        const auto worst_case =
            robust_margin(c->band, gamma, u.damping_estimate, u.bounds, delta, RobustForm::worst_case);
        r.values["upper_slack_" + tag] = published.upper_slack;
        r.values["lower_slack_" + tag] = published.lower_slack;
        r.values["worst_case_upper_slack_" + tag] = worst_case.upper_slack;
        r.values["worst_case_lower_slack_" + tag] = worst_case.lower_slack;
        const double worst = std::max(worst_case.upper_slack, worst_case.lower_slack);
        r.margin = std::min(r.margin, -worst);
        if (auto d = min_feasible_delta(c->band, gamma, u.damping_estimate, u.bounds,
                                        std::max(delta, 10.0 * (c->band.upper - c->band.lower)),
                                        RobustForm::worst_case))
            r.values["min_delta_" + tag] = *d;
        if (!published.feasible)
            r.fail({0, 0.0, u.bus, std::max(published.upper_slack, published.lower_slack),
                    "robust invariance inequality violated"});
        else if (!worst_case.feasible)
            r.fail({0, 0.0, u.bus, worst, "robust inequality holds only for the most favorable measurement"});
    }
    return r;
}

/// Evaluates `checks.enabled` on a recorded trajectory. Uses only the
/// trajectory and the scenario's configuration, never re-simulates.
inline GuaranteeReport evaluate_checks(const Trajectory& tr, const Scenario& s, const CheckSettings& checks)
{
    if (static_cast<std::size_t>(tr.omega.cols()) != s.network.n_buses ||
        static_cast<std::size_t>(tr.lambda.cols()) != s.network.line_count() || tr.controlled != s.network.controlled)
        throw ValidationError("trajectory (" + std::to_string(tr.omega.cols()) + " buses, " +
                              std::to_string(tr.lambda.cols()) + " lines, controlled " +
                              detail::format_buses(tr.controlled) + ") does not match the scenario network (" +
                              std::to_string(s.network.n_buses) + " buses, " +
                              std::to_string(s.network.line_count()) + " lines, controlled " +
                              detail::format_buses(s.network.controlled) + ")");
    GuaranteeReport report;
    const double t_act = s.controller.activation_time;
    std::optional<Equilibrium> eq;
    auto limit = [&]() -> const Equilibrium& {
        if (!eq)
            eq = limit_point(s);
        return *eq;
    };
    for (const auto& name : checks.enabled) {
        if (name == "invariance")
            report.checks.push_back(
                check_invariance(tr, s.controller.buses, checks.inflation, checks.invariance_tol, t_act));
        else if (name == "deactivation")
            report.checks.push_back(check_finite_deactivation(tr, checks.zero_tol));
        else if (name == "attractivity")
            report.checks.push_back(check_attractivity(tr, s.controller.buses, checks.attractivity_tol, t_act));
        else if (name == "convergence")
            report.checks.push_back(check_convergence(tr, limit(), checks.convergence_tol));
        else if (name == "energy")
            report.checks.push_back(check_energy_monotone(tr, s.injections.settle_time(), checks.energy_tol));
        else if (name == "constraints")
            report.checks.push_back(
                audit_constraints(tr, s.controller.buses, limit().omega_inf, kConstraintTolerance, t_act));
        else if (name == "robust_margin")
            report.checks.push_back(check_robust_margin(s, checks.inflation));
        else
            throw ValidationError("unknown check '" + name + "'");
    }
    return report;
}

struct RunOptions {
    std::optional<std::vector<std::string>> checks; // replaces the scenario's selection
    bool open_loop = false;
    std::optional<std::filesystem::path> output_directory;
    bool plot = false;
};

struct RunResult {
    Trajectory trajectory;
    GuaranteeReport report;
    std::filesystem::path trajectory_path;
    std::filesystem::path report_path;
    std::optional<std::filesystem::path> plot_path;
};

/// Applies run-time flags to a resolved scenario.
inline ResolvedScenario apply_options(ResolvedScenario r, const RunOptions& opt)
{
    if (opt.open_loop)
        r.scenario.controller.enabled = false;
    if (opt.checks)
        r.checks.requested = *opt.checks;
    r.checks.enabled = expand_checks(r.checks.requested, r.scenario.controller.enabled,
                                     r.scenario.uncertainty.has_value());
    if (opt.output_directory)
        r.output_directory = *opt.output_directory;
    return r;
}

/// Simulates, writes the trajectory and report, and returns both. The
/// report is computed from the trajectory as read back from disk.
inline RunResult run_scenario(const ResolvedScenario& resolved, const RunOptions& opt = {})
{
    namespace fs = std::filesystem;
    const ResolvedScenario r = apply_options(resolved, opt);
    const Scenario& s = r.scenario;

    Trajectory simulated = simulate(s);
    fs::create_directories(r.output_directory);
    RunResult out;
    out.trajectory_path = r.output_directory / r.trajectory_name;
    out.report_path = r.output_directory / r.report_name;
    save_trajectory(out.trajectory_path.string(), s.network, simulated);
    out.trajectory = load_trajectory(out.trajectory_path.string());
    out.report = evaluate_checks(out.trajectory, s, r.checks);

    std::ofstream rep(out.report_path);
    rep << out.report.to_text();
    if (!rep)
        throw std::runtime_error("cannot write report '" + out.report_path.string() + "'");

    if (opt.plot) {
        out.plot_path = r.output_directory / "frequency_hz.csv";
        std::ofstream plot(*out.plot_path);
        write_frequency_hz(plot, out.trajectory, s.base_hz);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Parameter sweeps

struct SweepRow {
    double value = 0.0;
    std::optional<double> activation_time; // first grid time with any |u| > zero_tol
    double peak_input = 0.0;               // max |u|
    double min_frequency_hz = 0.0;         // lowest controlled-bus frequency, absolute Hz
    double max_input_slope = 0.0;          // max |u(k+1) - u(k)| / h
};

inline SweepRow sweep_stats(const Trajectory& tr, double value, double zero_tol, double base_hz)
{
    SweepRow row;
    row.value = value;
    row.min_frequency_hz = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < tr.size(); ++k) {
        for (Eigen::Index c = 0; c < tr.input.cols(); ++c) {
            const double a = std::abs(tr.input(k, c));
            row.peak_input = std::max(row.peak_input, a);
            if (a > zero_tol && !row.activation_time)
                row.activation_time = tr.time[k];
            if (k + 1 < tr.size())
                row.max_input_slope =
                    std::max(row.max_input_slope, std::abs(tr.input(k + 1, c) - tr.input(k, c)) / tr.step);
        }
        for (auto bus : tr.controlled)
            row.min_frequency_hz =
                std::min(row.min_frequency_hz, absolute_hz(tr.omega(k, static_cast<Eigen::Index>(bus)), base_hz));
    }
    return row;
}

/// Scenario with the linear class-K slope replaced on the selected buses.
inline Scenario with_gamma(Scenario s, double gamma, const BusSelection& buses)
{
    for (auto& c : s.controller.buses) {
        if (!buses.contains(c.bus + 1))
            continue;
        if (!c.upper_alpha.is_linear() || !c.lower_alpha.is_linear())
            throw ValidationError("gamma sweep needs linear class-K functions");
        c.upper_alpha = ClassK::linear(gamma);
        c.lower_alpha = ClassK::linear(gamma);
    }
    return s;
}

/// One simulation per value, run concurrently; rows in input order.
inline std::vector<SweepRow> run_sweep(const ResolvedScenario& r, const std::string& param,
                                       const std::vector<double>& values, const BusSelection& buses)
{
    if (param != "gamma")
        throw ValidationError("unsupported sweep parameter '" + param + "'");
    if (values.empty())
        throw ValidationError("sweep needs at least one value");
    std::vector<std::future<SweepRow>> jobs;
    for (double v : values) {
        Scenario s = with_gamma(r.scenario, v, buses);
        jobs.push_back(std::async(std::launch::async, [s = std::move(s), v, tol = r.checks.zero_tol]() {
            return sweep_stats(simulate(s), v, tol, s.base_hz);
        }));
    }
    std::vector<SweepRow> rows;
    for (auto& j : jobs)
        rows.push_back(j.get());
    return rows;
}

inline void write_sweep_table(std::ostream& out, const std::string& param, const std::vector<SweepRow>& rows)
{
    out << param << ",activation_time,peak_abs_input,min_frequency_hz,max_abs_input_slope\n";
    for (const auto& r : rows)
        out << format_double(r.value) << ',' << (r.activation_time ? format_double(*r.activation_time) : "never")
            << ',' << format_double(r.peak_input) << ',' << format_double(r.min_frequency_hz) << ','
            << format_double(r.max_input_slope) << '\n';
}

} // namespace tfc
