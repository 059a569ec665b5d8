#pragma once

#include "tfc/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace tfc {

struct ConstantInjection {
    double value = 0.0;
};

/// p(t) = (1 + amplitude * sin(rate * (t - t_on))) * base on (t_on, t_off),
/// base elsewhere.
struct SinusoidalWindow {
    double base = 0.0;
    double amplitude = 0.0; // fraction of base
    double rate = 0.0;      // rad/s
    double t_on = 0.0;
    double t_off = 0.0;
};

/// Holds `initial` until the first breakpoint, then each breakpoint's value
/// from its time on. Breakpoint times are strictly increasing.
struct PiecewiseConstant {
    double initial = 0.0;
    std::vector<std::pair<double, double>> breakpoints; // (time, value)
};

using BusInjection = std::variant<ConstantInjection, SinusoidalWindow, PiecewiseConstant>;

inline double eval(const BusInjection& profile, double t)
{
    return std::visit(
        [t](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ConstantInjection>) {
                return p.value;
            } else if constexpr (std::is_same_v<P, SinusoidalWindow>) {
                if (t <= p.t_on || t >= p.t_off)
                    return p.base;
                return (1.0 + p.amplitude * std::sin(p.rate * (t - p.t_on))) * p.base;
            } else {
                double v = p.initial;
                for (const auto& [bt, bv] : p.breakpoints) {
                    if (t < bt)
                        break;
                    v = bv;
                }
                return v;
            }
        },
        profile);
}

inline double settle_time(const BusInjection& profile)
{
    return std::visit(
        [](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ConstantInjection>)
                return 0.0;
            else if constexpr (std::is_same_v<P, SinusoidalWindow>)
                return p.amplitude == 0.0 || p.base == 0.0 ? 0.0 : p.t_off;
            else
                return p.breakpoints.empty() ? 0.0 : p.breakpoints.back().first;
        },
        profile);
}

inline double final_value(const BusInjection& profile)
{
    return std::visit(
        [](const auto& p) -> double {
            using P = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<P, ConstantInjection>)
                return p.value;
            else if constexpr (std::is_same_v<P, SinusoidalWindow>)
                return p.base;
            else
                return p.breakpoints.empty() ? p.initial : p.breakpoints.back().second;
        },
        profile);
}

/// Per-bus injections that become constant after a finite settle time.
/// Only families with a finite settle time can be constructed.
class InjectionProfile {
public:
    InjectionProfile() = default;

    explicit InjectionProfile(std::vector<BusInjection> buses) : buses_(std::move(buses))
    {
        for (std::size_t i = 0; i < buses_.size(); ++i)
            check(i);
        settle_ = 0.0;
        for (const auto& b : buses_)
            settle_ = std::max(settle_, tfc::settle_time(b));
    }

    std::size_t bus_count() const { return buses_.size(); }
    const BusInjection& bus(std::size_t i) const { return buses_.at(i); }
    const std::vector<BusInjection>& buses() const { return buses_; }

    Eigen::VectorXd eval(double t) const
    {
        Eigen::VectorXd p(static_cast<Eigen::Index>(buses_.size()));
        for (std::size_t i = 0; i < buses_.size(); ++i)
            p[static_cast<Eigen::Index>(i)] = tfc::eval(buses_[i], t);
        return p;
    }

    double settle_time() const { return settle_; }

    Eigen::VectorXd final_values() const
    {
        Eigen::VectorXd p(static_cast<Eigen::Index>(buses_.size()));
        for (std::size_t i = 0; i < buses_.size(); ++i)
            p[static_cast<Eigen::Index>(i)] = final_value(buses_[i]);
        return p;
    }

    /// Largest |p_i(t)| over all t; exact for every supported family.
    double peak_magnitude(std::size_t i) const
    {
        return std::visit(
            [](const auto& p) -> double {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, ConstantInjection>) {
                    return std::abs(p.value);
                } else if constexpr (std::is_same_v<P, SinusoidalWindow>) {
                    // sin reaches +-1 inside the window iff rate*(t_off-t_on) spans it
                    double span = p.rate * (p.t_off - p.t_on);
                    double smax = span >= std::numbers::pi / 2 ? 1.0 : std::sin(std::max(span, 0.0));
                    double smin = span >= 3 * std::numbers::pi / 2 ? -1.0
                                  : span > std::numbers::pi   ? std::sin(span)
                                                              : 0.0;
                    double hi = std::max(std::abs(1 + p.amplitude * smax), std::abs(1 + p.amplitude * smin));
                    return std::abs(p.base) * std::max(1.0, hi);
                } else {
                    double m = std::abs(p.initial);
                    for (const auto& bp : p.breakpoints)
                        m = std::max(m, std::abs(bp.second));
                    return m;
                }
            },
            buses_.at(i));
    }

    /// Non-fatal construction notes, e.g. a sinusoidal window that jumps at
    /// its edges.
    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    void check(std::size_t i)
    {
        const std::string tag = "injection bus " + std::to_string(i + 1) + ": ";
        std::visit(
            [&](const auto& p) {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, ConstantInjection>) {
                    if (!std::isfinite(p.value))
                        throw ValidationError(tag + "constant value must be finite");
                } else if constexpr (std::is_same_v<P, SinusoidalWindow>) {
                    if (!std::isfinite(p.t_off))
                        throw ValidationError(tag + "sinusoidal window never settles (t_off must be finite)");
                    if (!std::isfinite(p.base) || !std::isfinite(p.amplitude) || !std::isfinite(p.rate) ||
                        !std::isfinite(p.t_on))
                        throw ValidationError(tag + "sinusoidal window parameters must be finite");
                    if (p.rate < 0.0)
                        throw ValidationError(tag + "sinusoidal window rate must be nonnegative");
                    if (p.t_on < 0.0 || p.t_off < p.t_on)
                        throw ValidationError(tag + "sinusoidal window requires 0 <= t_on <= t_off");
                    double cycles = p.rate * (p.t_off - p.t_on) / std::numbers::pi;
                    if (std::abs(cycles - std::round(cycles)) > 1e-9 && p.amplitude != 0.0)
                        warnings_.push_back(tag + "rate*(t_off-t_on) is not a multiple of pi; profile jumps at t_off");
                } else {
                    if (!std::isfinite(p.initial))
                        throw ValidationError(tag + "piecewise initial value must be finite");
                    double prev = -1.0;
                    for (const auto& [bt, bv] : p.breakpoints) {
                        if (!std::isfinite(bt) || !std::isfinite(bv))
                            throw ValidationError(tag + "breakpoints must be finite");
                        if (bt < 0.0 || bt <= prev)
                            throw ValidationError(tag + "breakpoint times must be nonnegative and strictly increasing");
                        prev = bt;
                    }
                }
            },
            buses_[i]);
    }

    std::vector<BusInjection> buses_;
    double settle_ = 0.0;
    std::vector<std::string> warnings_;
};

} // namespace tfc
