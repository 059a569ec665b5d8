#pragma once

#include "tfc/controller.hpp"
#include "tfc/dynamics.hpp"
#include "tfc/errors.hpp"
#include "tfc/injection.hpp"
#include "tfc/network.hpp"
#include "tfc/units.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace tfc {

enum class DynamicsMode { linear, nonlinear };

/// `stage` evaluates the feedback inside every integrator stage;
/// `zero_order_hold` freezes u over each step.
enum class ControllerSampling { stage, zero_order_hold };

struct ControllerConfig {
    bool enabled = true;
    double activation_time = 0.0; // u = 0 for t < activation_time
    ControllerSampling sampling = ControllerSampling::stage;
    std::vector<BusController> buses; // one per controlled bus, sorted by bus

    const BusController* find(std::size_t bus) const
    {
        for (const auto& b : buses)
            if (b.bus == bus)
                return &b;
        return nullptr;
    }
};

/// Fully resolved simulation input, internal units throughout.
struct Scenario {
    PowerNetwork network;
    InjectionProfile injections;
    ControllerConfig controller;
    SystemState initial; // lambda must lie in range(D)
    DynamicsMode mode = DynamicsMode::linear;
    double step = 1e-3;
    double horizon = 60.0;
    double base_hz = 60.0;
    std::optional<UncertaintyModel> uncertainty;
};

/// Uniform-grid record. Row k of every matrix is time k * step.
struct Trajectory {
    double step = 0.0;
    std::vector<std::size_t> controlled; // bus index per u/q column
    Eigen::VectorXd time;
    Eigen::MatrixXd lambda;    // steps x m
    Eigen::MatrixXd omega;     // steps x n, rad/s
    Eigen::MatrixXd input;     // steps x |controlled|
    Eigen::MatrixXd q;         // steps x |controlled|
    Eigen::MatrixXd injection; // steps x n
    Eigen::VectorXd energy;    // steps

    Eigen::Index size() const { return time.size(); }

    /// Column of `input`/`q` for a bus, or -1.
    Eigen::Index controlled_column(std::size_t bus) const
    {
        for (std::size_t c = 0; c < controlled.size(); ++c)
            if (controlled[c] == bus)
                return static_cast<Eigen::Index>(c);
        return -1;
    }
};

/// Checks every scenario invariant; empty iff simulate() will accept it.
inline std::vector<std::string> validate(const Scenario& s)
{
    std::vector<std::string> issues = validate(s.network);
    if (!issues.empty())
        return issues;
    const auto n = static_cast<Eigen::Index>(s.network.n_buses);
    const auto m = static_cast<Eigen::Index>(s.network.line_count());
    if (!(s.step > 0.0) || !std::isfinite(s.step))
        issues.emplace_back("step size must be positive");
    if (!(s.horizon > s.injections.settle_time()) || !std::isfinite(s.horizon))
        issues.emplace_back("horizon must exceed the injection settle time");
    if (s.injections.bus_count() != s.network.n_buses)
        issues.emplace_back("injection profile must have one entry per bus");
    if (s.initial.omega.size() != n || s.initial.lambda.size() != m)
        issues.emplace_back("initial state has wrong dimensions");
    else if (!s.initial.omega.allFinite() || !s.initial.lambda.allFinite())
        issues.emplace_back("initial state must be finite");
    else if (range_residual(build_incidence(s.network), s.initial.lambda) > 1e-8)
        issues.emplace_back("initial lambda is not in range(D)");
    if (s.controller.activation_time < 0.0)
        issues.emplace_back("activation time must be nonnegative");

    if (s.controller.enabled) {
        for (std::size_t bus : s.network.controlled)
            if (!s.controller.find(bus))
                issues.push_back("controlled bus " + std::to_string(bus + 1) + " has no controller configuration");
    }
    for (const auto& c : s.controller.buses) {
        const std::string tag = "controller bus " + std::to_string(c.bus + 1) + ": ";
        if (!s.network.is_controlled(c.bus))
            issues.push_back(tag + "bus is not in the controlled set");
        for (const auto& msg : c.band.validate())
            issues.push_back(tag + msg);
        for (const auto& msg : c.upper_alpha.validate())
            issues.push_back(tag + msg);
        for (const auto& msg : c.lower_alpha.validate())
            issues.push_back(tag + msg);
    }
    if (s.uncertainty && issues.empty() && s.injections.bus_count() == s.network.n_buses) {
        const double omega_inf = s.injections.final_values().sum() / s.network.damping_vector().sum();
        for (const auto& u : s.uncertainty->buses) {
            const BusController* c = s.controller.find(u.bus);
            if (!c) {
                issues.push_back("uncertainty bus " + std::to_string(u.bus + 1) + " has no controller");
                continue;
            }
            for (const auto& msg : validate_uncertainty(u, c->band, s.network.damping[u.bus],
                                                        s.injections.peak_magnitude(u.bus), omega_inf))
                issues.push_back(msg);
        }
    }
    return issues;
}

namespace detail {

class ClosedLoop {
public:
    explicit ClosedLoop(const Scenario& s) : s_(s), d_(build_incidence(s.network)), n_(s.network.n_buses)
    {
        controlled_ = s.network.controlled;
        if (s.mode == DynamicsMode::linear) {
            Equilibrium eq = equilibrium(s.network, d_, s.injections.final_values());
            omega_inf_ = eq.omega_inf;
            lambda_inf_ = eq.lambda_inf;
        } else {
            AngleEquilibrium eq = equilibrium_nonlinear(s.network, d_, s.injections.final_values());
            omega_inf_ = eq.omega_inf;
            lambda_inf_ = eq.lambda_inf;
        }
    }

    const IncidenceMatrix& incidence() const { return d_; }
    const std::vector<std::size_t>& controlled() const { return controlled_; }

    // State vector: linear [lambda; omega], nonlinear [theta; omega].
    Eigen::VectorXd initial_vector() const
    {
        const auto n = static_cast<Eigen::Index>(n_);
        if (s_.mode == DynamicsMode::linear) {
            Eigen::VectorXd x(s_.initial.lambda.size() + n);
            x << s_.initial.lambda, s_.initial.omega;
            return x;
        }
        Eigen::MatrixXd dd = Eigen::MatrixXd(d_.transpose() * d_);
        Eigen::VectorXd theta = solve_pinned(dd, d_.transpose() * s_.initial.lambda);
        Eigen::VectorXd x(2 * n);
        x << theta, s_.initial.omega;
        return x;
    }

    Eigen::VectorXd lambda_of(const Eigen::VectorXd& x) const
    {
        if (s_.mode == DynamicsMode::linear)
            return x.head(d_.rows());
        return d_ * x.head(static_cast<Eigen::Index>(n_));
    }

    Eigen::VectorXd omega_of(const Eigen::VectorXd& x) const { return x.tail(static_cast<Eigen::Index>(n_)); }

    Eigen::VectorXd flow_of(const Eigen::VectorXd& x) const
    {
        if (s_.mode == DynamicsMode::linear)
            return aggregate_flow(s_.network, d_, x.head(d_.rows()));
        return nonlinear_flow(s_.network, x.head(static_cast<Eigen::Index>(n_)));
    }

    bool active(double t) const { return s_.controller.enabled && t >= s_.controller.activation_time; }

    /// Full n-vector of inputs at (t, x) with injections p and flows.
    Eigen::VectorXd inputs(double t, const Eigen::VectorXd& omega, const Eigen::VectorXd& flow,
                           const Eigen::VectorXd& p) const
    {
        Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_));
        if (!active(t))
            return u;
        for (const auto& c : s_.controller.buses) {
            auto i = static_cast<Eigen::Index>(c.bus);
            const BusUncertainty* err = s_.uncertainty ? s_.uncertainty->find(c.bus) : nullptr;
            if (!err) {
                u[i] = control(c, omega[i], q_value(s_.network.damping[c.bus], omega[i], flow[i], p[i]));
            } else {
                Measurement m{omega[i] + err->omega_error(t), flow[i] + err->flow_error(t),
                              p[i] + err->injection_scale * p[i] + err->injection_offset(t)};
                u[i] = control_robust(c, m, err->damping_estimate);
            }
        }
        return u;
    }

    Eigen::VectorXd derivative(double t, const Eigen::VectorXd& x, const Eigen::VectorXd* held_u) const
    {
        Eigen::VectorXd p = s_.injections.eval(t);
        Eigen::VectorXd omega = omega_of(x);
        Eigen::VectorXd flow = flow_of(x);
        Eigen::VectorXd u = held_u ? *held_u : inputs(t, omega, flow, p);
        Eigen::VectorXd dx(x.size());
        const auto lead = x.size() - omega.size();
        if (s_.mode == DynamicsMode::linear)
            dx.head(lead) = d_ * omega;
        else
            dx.head(lead) = omega;
        dx.tail(omega.size()) = frequency_rate(s_.network, omega, flow, p, u);
        return dx;
    }

    double energy(const Eigen::VectorXd& x) const
    {
        Eigen::VectorXd lambda = lambda_of(x);
        Eigen::VectorXd omega = omega_of(x);
        if (s_.mode == DynamicsMode::linear)
            return energy_linear(s_.network, {lambda, omega}, {omega_inf_, lambda_inf_});
        return energy_nonlinear(s_.network, lambda, omega, omega_inf_, lambda_inf_);
    }

private:
    const Scenario& s_;
    IncidenceMatrix d_;
    std::size_t n_;
    std::vector<std::size_t> controlled_;
    double omega_inf_ = 0.0;
    Eigen::VectorXd lambda_inf_;
};

} // namespace detail

/// Classic fourth-order Runge-Kutta integration of the closed loop on a
/// uniform grid. Throws ValidationError for invalid scenarios and
/// DivergenceError on a non-finite state.
inline Trajectory simulate(const Scenario& s)
{
    if (auto issues = validate(s); !issues.empty())
        throw ValidationError(issues.front());

    detail::ClosedLoop loop(s);
    const double h = s.step;
    const auto steps = static_cast<Eigen::Index>(std::llround(s.horizon / h));
    const auto rows = steps + 1;
    const auto n = static_cast<Eigen::Index>(s.network.n_buses);
    const auto m = static_cast<Eigen::Index>(s.network.line_count());
    const auto nc = static_cast<Eigen::Index>(loop.controlled().size());

    Trajectory tr;
    tr.step = h;
    tr.controlled = loop.controlled();
    tr.time.resize(rows);
    tr.lambda.resize(rows, m);
    tr.omega.resize(rows, n);
    tr.input.resize(rows, nc);
    tr.q.resize(rows, nc);
    tr.injection.resize(rows, n);
    tr.energy.resize(rows);

    const bool zoh = s.controller.sampling == ControllerSampling::zero_order_hold;
    Eigen::VectorXd x = loop.initial_vector();
    for (Eigen::Index k = 0; k < rows; ++k) {
        const double t = static_cast<double>(k) * h;
        if (!x.allFinite())
            throw DivergenceError("non-finite state", static_cast<std::size_t>(k));

        Eigen::VectorXd p = s.injections.eval(t);
        Eigen::VectorXd omega = loop.omega_of(x);
        Eigen::VectorXd flow = loop.flow_of(x);
        Eigen::VectorXd u = loop.inputs(t, omega, flow, p);
        tr.time[k] = t;
        tr.lambda.row(k) = loop.lambda_of(x).transpose();
        tr.omega.row(k) = omega.transpose();
        tr.injection.row(k) = p.transpose();
        for (Eigen::Index c = 0; c < nc; ++c) {
            auto bus = tr.controlled[static_cast<std::size_t>(c)];
            auto i = static_cast<Eigen::Index>(bus);
            tr.input(k, c) = u[i];
            tr.q(k, c) = q_value(s.network.damping[bus], omega[i], flow[i], p[i]);
        }
        tr.energy[k] = loop.energy(x);
        if (k == steps)
            break;

        const Eigen::VectorXd* held = zoh ? &u : nullptr;
        Eigen::VectorXd k1 = loop.derivative(t, x, held);
        Eigen::VectorXd k2 = loop.derivative(t + 0.5 * h, x + 0.5 * h * k1, held);
        Eigen::VectorXd k3 = loop.derivative(t + 0.5 * h, x + 0.5 * h * k2, held);
        Eigen::VectorXd k4 = loop.derivative(t + h, x + h * k3, held);
        x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return tr;
}

/// simulate() with controllers reading corrupted measurements; the true
/// state evolves under the true dynamics.
inline Trajectory simulate_with_uncertainty(Scenario s, const UncertaintyModel& uncertainty)
{
    s.uncertainty = uncertainty;
    return simulate(s);
}

/// Frequency in absolute Hz for plotting: base + w / (2 pi).
inline double absolute_hz(double omega, double base_hz)
{
    return base_hz + frequency_from_internal(omega, FrequencyUnit::hz);
}

} // namespace tfc
