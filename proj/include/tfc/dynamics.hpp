#pragma once

#include "tfc/errors.hpp"
#include "tfc/network.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace tfc {

/// x = (lambda, omega): edge angle differences (rad) and bus frequency
/// deviations (rad/s).
struct SystemState {
    Eigen::VectorXd lambda;
    Eigen::VectorXd omega;
};

/// (theta, omega) form used by the nonlinear model.
struct AngleState {
    Eigen::VectorXd theta;
    Eigen::VectorXd omega;
};

struct Equilibrium {
    double omega_inf = 0.0;
    Eigen::VectorXd lambda_inf;
};

namespace detail {

inline void require_inputs(const PowerNetwork& net, const Eigen::VectorXd& omega, const Eigen::VectorXd& p,
                           const Eigen::VectorXd& u)
{
    const auto n = static_cast<Eigen::Index>(net.n_buses);
    if (omega.size() != n || p.size() != n || u.size() != n)
        throw std::invalid_argument("dynamics: dimension mismatch");
    for (Eigen::Index i = 0; i < n; ++i)
        if (u[i] != 0.0 && !net.is_controlled(static_cast<std::size_t>(i)))
            throw std::invalid_argument("dynamics: nonzero input on uncontrolled bus " + std::to_string(i + 1));
}

// M^{-1} (-E w - flow + u + p)
inline Eigen::VectorXd frequency_rate(const PowerNetwork& net, const Eigen::VectorXd& omega,
                                      const Eigen::VectorXd& flow, const Eigen::VectorXd& p, const Eigen::VectorXd& u)
{
    Eigen::VectorXd rate(omega.size());
    for (Eigen::Index i = 0; i < omega.size(); ++i) {
        auto k = static_cast<std::size_t>(i);
        rate[i] = (-net.damping[k] * omega[i] - flow[i] + u[i] + p[i]) / net.inertia[k];
    }
    return rate;
}

} // namespace detail

/// Linearized closed-loop dynamics: lambda' = D omega,
/// M_i omega_i' = -E_i omega_i - [D^T Y_b]_i lambda + u_i + p_i.
/// `u` is an n-vector that must vanish off the controlled set.
inline SystemState rhs_linear(const PowerNetwork& net, const IncidenceMatrix& d, const SystemState& x,
                              const Eigen::VectorXd& p, const Eigen::VectorXd& u)
{
    detail::require_inputs(net, x.omega, p, u);
    Eigen::VectorXd flow = aggregate_flow(net, d, x.lambda);
    return {d * x.omega, detail::frequency_rate(net, x.omega, flow, p, u)};
}

/// sum_j b_ij sin(theta_i - theta_j) per bus, i.e. D^T Y_b sin(D theta).
inline Eigen::VectorXd nonlinear_flow(const PowerNetwork& net, const Eigen::VectorXd& theta)
{
    if (theta.size() != static_cast<Eigen::Index>(net.n_buses))
        throw std::invalid_argument("nonlinear_flow: dimension mismatch");
    Eigen::VectorXd flow = Eigen::VectorXd::Zero(theta.size());
    for (const auto& l : net.lines) {
        auto i = static_cast<Eigen::Index>(l.positive), j = static_cast<Eigen::Index>(l.negative);
        double f = l.susceptance * std::sin(theta[i] - theta[j]);
        flow[i] += f;
        flow[j] -= f;
    }
    return flow;
}

/// Swing dynamics with sine power flows.
inline AngleState rhs_nonlinear(const PowerNetwork& net, const AngleState& x, const Eigen::VectorXd& p,
                                const Eigen::VectorXd& u)
{
    detail::require_inputs(net, x.omega, p, u);
    Eigen::VectorXd flow = nonlinear_flow(net, x.theta);
    return {x.omega, detail::frequency_rate(net, x.omega, flow, p, u)};
}

namespace detail {

// Solves L theta = rhs with the last bus pinned to zero. L must be a
// connected-graph Laplacian.
inline Eigen::VectorXd solve_pinned(const Eigen::MatrixXd& lap, const Eigen::VectorXd& rhs)
{
    const Eigen::Index n = lap.rows();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(n);
    if (n > 1) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(lap.topLeftCorner(n - 1, n - 1));
        theta.head(n - 1) = ldlt.solve(rhs.head(n - 1));
    }
    return theta;
}

} // namespace detail

/// Synchronized frequency sum(p*) / sum(E) and the edge-angle vector
/// solving D^T Y_b lambda = p* - E omega_inf 1 inside range(D).
inline Equilibrium equilibrium(const PowerNetwork& net, const IncidenceMatrix& d, const Eigen::VectorXd& p_star)
{
    if (p_star.size() != static_cast<Eigen::Index>(net.n_buses))
        throw std::invalid_argument("equilibrium: dimension mismatch");
    Eigen::VectorXd e = net.damping_vector();
    Equilibrium eq;
    eq.omega_inf = p_star.sum() / e.sum();
    Eigen::VectorXd rhs = p_star - e * eq.omega_inf;
    eq.lambda_inf = d * detail::solve_pinned(laplacian(net), rhs);
    return eq;
}

struct AngleEquilibrium {
    double omega_inf = 0.0;
    Eigen::VectorXd theta_inf; // last bus pinned to zero
    Eigen::VectorXd lambda_inf;
};

/// Equilibrium of the sine-flow model by Newton iteration from the linear
/// solution. Throws ValidationError when the flows are infeasible.
inline AngleEquilibrium equilibrium_nonlinear(const PowerNetwork& net, const IncidenceMatrix& d,
                                              const Eigen::VectorXd& p_star, int max_iter = 50, double tol = 1e-12)
{
    Equilibrium lin = equilibrium(net, d, p_star);
    const auto n = static_cast<Eigen::Index>(net.n_buses);
    Eigen::VectorXd rhs = p_star - net.damping_vector() * lin.omega_inf;
    Eigen::VectorXd theta = detail::solve_pinned(laplacian(net), rhs);
    for (int it = 0; it < max_iter; ++it) {
        Eigen::VectorXd residual = nonlinear_flow(net, theta) - rhs;
        if (residual.head(n - 1).lpNorm<Eigen::Infinity>() <= tol * std::max(1.0, rhs.lpNorm<Eigen::Infinity>()))
            return {lin.omega_inf, theta, d * theta};
        Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
        for (const auto& l : net.lines) {
            auto i = static_cast<Eigen::Index>(l.positive), j = static_cast<Eigen::Index>(l.negative);
            double c = l.susceptance * std::cos(theta[i] - theta[j]);
            jac(i, i) += c;
            jac(j, j) += c;
            jac(i, j) -= c;
            jac(j, i) -= c;
        }
        Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
        step.head(n - 1) = jac.topLeftCorner(n - 1, n - 1).fullPivLu().solve(residual.head(n - 1));
        theta -= step;
        if (!theta.allFinite())
            break;
    }
    throw ValidationError("nonlinear power flow has no equilibrium near the linear solution");
}

/// Infinity-norm distance from lambda to its orthogonal projection on range(D).
inline double range_residual(const IncidenceMatrix& d, const Eigen::VectorXd& lambda)
{
    // least squares min |D theta - lambda| via the unweighted Laplacian D^T D
    Eigen::MatrixXd dd = Eigen::MatrixXd(d.transpose() * d);
    Eigen::VectorXd theta = detail::solve_pinned(dd, d.transpose() * lambda);
    return (d * theta - lambda).lpNorm<Eigen::Infinity>();
}

/// 1/2 sum M_i (w_i - w_inf)^2 + 1/2 (lambda - lambda_inf)^T Y_b (lambda - lambda_inf).
/// Along the linear model with constant injections its derivative is
/// -sum E_i (w_i - w_inf)^2 + sum (w_i - w_inf) u_i.
inline double energy_linear(const PowerNetwork& net, const SystemState& x, const Equilibrium& eq)
{
    Eigen::ArrayXd dw = x.omega.array() - eq.omega_inf;
    Eigen::ArrayXd dl = (x.lambda - eq.lambda_inf).array();
    return 0.5 * (net.inertia_vector().array() * dw.square()).sum() + 0.5 * (net.susceptances().array() * dl.square()).sum();
}

/// Kinetic term plus the sine-flow potential
/// sum b_k (cos(lambda_inf_k) - cos(lambda_k) - sin(lambda_inf_k)(lambda_k - lambda_inf_k)).
inline double energy_nonlinear(const PowerNetwork& net, const Eigen::VectorXd& lambda, const Eigen::VectorXd& omega,
                               double omega_inf, const Eigen::VectorXd& lambda_inf)
{
    Eigen::ArrayXd dw = omega.array() - omega_inf;
    double v = 0.5 * (net.inertia_vector().array() * dw.square()).sum();
    for (std::size_t k = 0; k < net.lines.size(); ++k) {
        auto e = static_cast<Eigen::Index>(k);
        v += net.lines[k].susceptance * (std::cos(lambda_inf[e]) - std::cos(lambda[e]) -
                                         std::sin(lambda_inf[e]) * (lambda[e] - lambda_inf[e]));
    }
    return v;
}

} // namespace tfc
