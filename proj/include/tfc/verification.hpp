#pragma once

// Guarantee checks over recorded trajectories. Nothing here re-simulates:
// every verdict is a function of the Trajectory (as exported) plus the
// controller configuration and equilibrium it is compared against.

#include "tfc/controller.hpp"
#include "tfc/dynamics.hpp"
#include "tfc/simulation.hpp"
#include "tfc/units.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace tfc {

struct Witness {
    Eigen::Index step = 0;
    double time = 0.0;
    std::size_t bus = 0; // 0-based; printed 1-based
    double value = 0.0;
    std::string what;
};

/// Verdict of one check. A failing result always carries a witness.
struct CheckResult {
    explicit CheckResult(std::string check_name = {}) : name(std::move(check_name)) {}

    std::string name;
    bool pass = true;
    double margin = std::numeric_limits<double>::infinity(); // worst-case slack, >= 0 is good
    std::optional<Witness> witness;
    std::map<std::string, double> values; // check-specific outputs, e.g. t0

    void fail(Witness w)
    {
        if (pass) {
            pass = false;
            witness = std::move(w);
        }
    }
};

struct GuaranteeReport {
    std::vector<CheckResult> checks;

    bool all_pass() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
    }

    const CheckResult* find(const std::string& name) const
    {
        for (const auto& c : checks)
            if (c.name == name)
                return &c;
        return nullptr;
    }

    /// `<check>.<key>=<value>` lines in a fixed order.
    std::string to_text() const
    {
        std::ostringstream os;
        os << "report.verdict=" << (all_pass() ? "pass" : "fail") << '\n';
        for (const auto& c : checks) {
            os << c.name << ".verdict=" << (c.pass ? "pass" : "fail") << '\n';
            os << c.name << ".margin=" << format_double(c.margin) << '\n';
            for (const auto& [k, v] : c.values)
                os << c.name << '.' << k << '=' << format_double(v) << '\n';
            if (c.witness) {
                const auto& w = *c.witness;
                os << c.name << ".witness.step=" << w.step << '\n';
                os << c.name << ".witness.time=" << format_double(w.time) << '\n';
                os << c.name << ".witness.bus=" << w.bus + 1 << '\n';
                os << c.name << ".witness.value=" << format_double(w.value) << '\n';
                os << c.name << ".witness.what=" << w.what << '\n';
            }
        }
        return os.str();
    }
};

namespace detail {

inline Eigen::Index first_row_at(const Trajectory& tr, double t)
{
    for (Eigen::Index k = 0; k < tr.size(); ++k)
        if (tr.time[k] >= t)
            return k;
    return tr.size();
}

} // namespace detail

/// Containment of each controlled frequency in [lower - delta, upper + delta]
/// at every grid point from `start_time` on, for buses inside that interval
/// at `start_time`.
inline CheckResult check_invariance(const Trajectory& tr, const std::vector<BusController>& controllers,
                                    double delta = 0.0, double tol = 0.0, double start_time = 0.0)
{
    CheckResult r{"invariance"};
    const Eigen::Index k0 = detail::first_row_at(tr, start_time);
    std::size_t checked = 0;
    for (const auto& c : controllers) {
        auto col = static_cast<Eigen::Index>(c.bus);
        const double lo = c.band.lower - delta, hi = c.band.upper + delta;
        if (k0 >= tr.size() || !(lo <= tr.omega(k0, col) && tr.omega(k0, col) <= hi))
            continue;
        ++checked;
        for (Eigen::Index k = k0; k < tr.size(); ++k) {
            const double w = tr.omega(k, col);
            const double slack = std::min(w - lo, hi - w);
            r.margin = std::min(r.margin, slack);
            if (slack < -tol)
                r.fail({k, tr.time[k], c.bus, w, w < lo ? "below lower bound" : "above upper bound"});
        }
    }
    r.values["buses_checked"] = static_cast<double>(checked);
    return r;
}

/// Smallest grid time t0 after which every |u_i| <= zero_tol; passes iff t0 < T.
inline CheckResult check_finite_deactivation(const Trajectory& tr, double zero_tol)
{
    CheckResult r{"deactivation"};
    Eigen::Index last_active = -1;
    double peak = 0.0;
    for (Eigen::Index k = 0; k < tr.size(); ++k)
        for (Eigen::Index c = 0; c < tr.input.cols(); ++c) {
            double a = std::abs(tr.input(k, c));
            if (a > zero_tol)
                last_active = k;
            peak = std::max(peak, a);
        }
    const double horizon = tr.size() ? tr.time[tr.size() - 1] : 0.0;
    const double t0 = last_active < 0 ? 0.0 : last_active + 1 < tr.size() ? tr.time[last_active + 1] : horizon;
    r.values["t0"] = t0;
    r.values["peak_input"] = peak;
    r.margin = horizon - t0;
    if (last_active >= 0 && last_active + 1 >= tr.size()) {
        Eigen::Index c = 0;
        for (Eigen::Index j = 0; j < tr.input.cols(); ++j)
            if (std::abs(tr.input(last_active, j)) > zero_tol)
                c = j;
        r.fail({last_active, tr.time[last_active], tr.controlled[static_cast<std::size_t>(c)],
                tr.input(last_active, c), "input still active at horizon"});
    }
    return r;
}

/// For each controlled bus outside its band at `start_time`: finite entry
/// time, non-increasing distance to the band (within `tol`) before entry,
/// and containment afterwards. Monotonicity is measured in distance to the
/// band, not per coordinate.
inline CheckResult check_attractivity(const Trajectory& tr, const std::vector<BusController>& controllers, double tol,
                                      double start_time = 0.0)
{
    CheckResult r{"attractivity"};
    const Eigen::Index k0 = detail::first_row_at(tr, start_time);
    std::size_t outside = 0;
    double latest_entry = 0.0;
    for (const auto& c : controllers) {
        auto col = static_cast<Eigen::Index>(c.bus);
        if (k0 >= tr.size() || c.band.contains(tr.omega(k0, col)))
            continue;
        ++outside;
        Eigen::Index entry = -1;
        for (Eigen::Index k = k0; k < tr.size(); ++k)
            if (c.band.contains(tr.omega(k, col))) {
                entry = k;
                break;
            }
        if (entry < 0) {
            const Eigen::Index last = tr.size() - 1;
            r.fail({last, tr.time[last], c.bus, tr.omega(last, col), "never enters band"});
            r.margin = std::min(r.margin, -c.band.distance(tr.omega(last, col)));
            continue;
        }
        r.values["entry_time_" + std::to_string(c.bus + 1)] = tr.time[entry];
        latest_entry = std::max(latest_entry, tr.time[entry]);
        for (Eigen::Index k = k0; k < entry; ++k) {
            const double rise = c.band.distance(tr.omega(k + 1, col)) - c.band.distance(tr.omega(k, col));
            r.margin = std::min(r.margin, -rise);
            if (rise > tol)
                r.fail({k + 1, tr.time[k + 1], c.bus, tr.omega(k + 1, col), "distance to band increased"});
        }
        for (Eigen::Index k = entry; k < tr.size(); ++k)
            if (!c.band.contains(tr.omega(k, col))) {
                r.margin = std::min(r.margin, -c.band.distance(tr.omega(k, col)));
                r.fail({k, tr.time[k], c.bus, tr.omega(k, col), "left band after entry"});
            }
    }
    r.values["buses_outside"] = static_cast<double>(outside);
    r.values["latest_entry"] = latest_entry;
    return r;
}

/// Final state within `tol` of (lambda_inf, omega_inf 1) and the error
/// envelope (maximum over four consecutive chunks of the last quarter)
/// non-increasing while it is above 1e-3 tol.
inline CheckResult check_convergence(const Trajectory& tr, const Equilibrium& eq, double tol)
{
    CheckResult r{"convergence"};
    if (tr.size() == 0)
        return r;
    auto error = [&](Eigen::Index k) {
        double e = (tr.omega.row(k).array() - eq.omega_inf).abs().maxCoeff();
        if (tr.lambda.cols())
            e = std::max(e, (tr.lambda.row(k).transpose() - eq.lambda_inf).lpNorm<Eigen::Infinity>());
        return e;
    };
    const Eigen::Index last = tr.size() - 1;
    const double final_error = error(last);
    r.values["final_error"] = final_error;
    r.margin = tol - final_error;
    if (final_error > tol)
        r.fail({last, tr.time[last], 0, final_error, "final state outside tolerance"});

    // increases below a small fraction of tol are integration noise, not divergence
    const double floor = 1e-3 * tol;
    const Eigen::Index start = last - last / 4;
    const Eigen::Index chunk = std::max<Eigen::Index>(1, (last - start + 1) / 4);
    double prev = std::numeric_limits<double>::infinity();
    for (Eigen::Index b = start; b + chunk <= tr.size(); b += chunk) {
        double m = 0.0;
        for (Eigen::Index k = b; k < b + chunk; ++k)
            m = std::max(m, error(k));
        if (m > floor && m > prev * (1 + 1e-9) + 1e-13)
            r.fail({b, tr.time[b], 0, m, "error envelope increased"});
        prev = m;
    }
    return r;
}

namespace detail {

inline CheckResult energy_monotone(const Eigen::VectorXd& v, const Trajectory& tr, double settle_time, double tol)
{
    CheckResult r{"energy"};
    const Eigen::Index k0 = first_row_at(tr, settle_time);
    for (Eigen::Index k = k0; k + 1 < tr.size(); ++k) {
        const double rise = v[k + 1] - v[k];
        r.margin = std::min(r.margin, -rise);
        if (rise > tol)
            r.fail({k + 1, tr.time[k + 1], 0, v[k + 1], "energy increased"});
    }
    return r;
}

} // namespace detail

/// Energy recomputed from recorded states (linear model) is non-increasing
/// between consecutive grid points for t >= settle_time, within `tol`.
inline CheckResult check_energy_monotone(const Trajectory& tr, const PowerNetwork& net, const Equilibrium& eq,
                                         double settle_time, double tol)
{
    Eigen::VectorXd v(tr.size());
    for (Eigen::Index k = 0; k < tr.size(); ++k)
        v[k] = energy_linear(net, {tr.lambda.row(k).transpose(), tr.omega.row(k).transpose()}, eq);
    return detail::energy_monotone(v, tr, settle_time, tol);
}

/// Same check over the energy column recorded by the simulator.
inline CheckResult check_energy_monotone(const Trajectory& tr, double settle_time, double tol)
{
    return detail::energy_monotone(tr.energy, tr, settle_time, tol);
}

/// Replays the stability, class-K and boundary conditions at every grid
/// point from `start_time` on. Margins are reported as -(worst slack).
inline CheckResult audit_constraints(const Trajectory& tr, const std::vector<BusController>& controllers,
                                     double omega_inf, double tol = kConstraintTolerance, double start_time = 0.0)
{
    CheckResult r{"constraints"};
    const Eigen::Index k0 = detail::first_row_at(tr, start_time);
    double worst_stability = -std::numeric_limits<double>::infinity();
    double worst_classk = -std::numeric_limits<double>::infinity();
    double worst_boundary = -std::numeric_limits<double>::infinity();
    for (const auto& c : controllers) {
        const Eigen::Index col = tr.controlled_column(c.bus);
        if (col < 0)
            continue;
        const auto wcol = static_cast<Eigen::Index>(c.bus);
        double grid_band = 0.0;
        for (Eigen::Index k = k0; k + 1 < tr.size(); ++k)
            grid_band = std::max(grid_band, std::abs(tr.omega(k + 1, wcol) - tr.omega(k, wcol)));

        for (Eigen::Index k = k0; k < tr.size(); ++k) {
            const double w = tr.omega(k, wcol), u = tr.input(k, col), q = tr.q(k, col);

            const double s5 = std::abs(w - omega_inf) <= tol ? std::abs(u) : (w - omega_inf) * u;
            worst_stability = std::max(worst_stability, s5);
            if (!stability_constraint_holds(u, w, omega_inf, tol))
                r.fail({k, tr.time[k], c.bus, u, "stability constraint (w - w_inf) u <= 0 violated"});

            if (auto s8 = classK_constraint_slack(w, u, q, c.band, c.upper_alpha, c.lower_alpha)) {
                worst_classk = std::max(worst_classk, *s8);
                if (*s8 > tol)
                    r.fail({k, tr.time[k], c.bus, *s8, "class-K constraint violated"});
            }

            if (auto s7 = boundary_slack(w, u, q, c.band, grid_band)) {
                // inside the band the class-K rate bound still allows a small inflow
                double allowance = 0.0;
                if (w < c.band.upper && w > c.band.upper_threshold && std::abs(w - c.band.upper) <= grid_band)
                    allowance = -c.upper_alpha(c.band.upper_barrier(w)) / (w - c.band.upper_threshold);
                else if (w > c.band.lower && w < c.band.lower_threshold && std::abs(w - c.band.lower) <= grid_band)
                    allowance = -c.lower_alpha(c.band.lower_barrier(w)) / (c.band.lower_threshold - w);
                const double slack = *s7 - std::max(allowance, 0.0);
                worst_boundary = std::max(worst_boundary, slack);
                if (slack > tol)
                    r.fail({k, tr.time[k], c.bus, slack, "boundary condition violated"});
            }
        }
    }
    r.values["worst_stability_slack"] = worst_stability;
    r.values["worst_classk_slack"] = worst_classk;
    r.values["worst_boundary_slack"] = worst_boundary;
    r.margin = -std::max({worst_stability, worst_classk, worst_boundary});
    return r;
}

} // namespace tfc
