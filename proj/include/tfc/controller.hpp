#pragma once

// Distributed transient-frequency controller. For a controlled bus i with
// safe band [lo, hi] and dead band [lo_thr, hi_thr]:
//
//   u_i = min{0, -a_hi(w - hi) / (w - hi_thr) + q_i}   w > hi_thr
//   u_i = 0                                            lo_thr <= w <= hi_thr
//   u_i = max{0,  a_lo(lo - w) / (lo_thr - w) + q_i}   w < lo_thr
//
// with q_i = E_i w_i + [D^T Y_b]_i lambda - p_i, so that M_i w_i' = u_i - q_i.
// The clamp makes M_i w_i' = min{-q_i, -a_hi(w - hi)/(w - hi_thr)} in the
// upper band, which renders [lo, hi] forward invariant while keeping
// (w_i - w_inf) u_i <= 0 whenever w_inf lies inside the dead band.

#include "tfc/dynamics.hpp"
#include "tfc/errors.hpp"
#include "tfc/network.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tfc {

/// Absolute tolerance for sign and equality predicates (per-unit).
inline constexpr double kConstraintTolerance = 1e-9;

struct FrequencyBand {
    double lower = 0.0;
    double lower_threshold = 0.0;
    double upper_threshold = 0.0;
    double upper = 0.0;

    /// hi barrier l(x) = w - hi; the set {l <= 0} is what the controller keeps invariant.
    double upper_barrier(double omega) const { return omega - upper; }
    double lower_barrier(double omega) const { return -omega + lower; }

    bool contains(double omega) const { return lower <= omega && omega <= upper; }

    /// Distance from omega to [lower, upper]; zero inside.
    double distance(double omega) const { return std::max({lower - omega, omega - upper, 0.0}); }

    std::vector<std::string> validate() const
    {
        std::vector<std::string> issues;
        if (!(std::isfinite(lower) && std::isfinite(lower_threshold) && std::isfinite(upper_threshold) &&
              std::isfinite(upper)))
            issues.emplace_back("band values must be finite");
        else if (!(lower < lower_threshold && lower_threshold < upper_threshold && upper_threshold < upper))
            issues.emplace_back("band must satisfy lower < lower_threshold < upper_threshold < upper");
        return issues;
    }
};

/// Strictly increasing, zero at zero, globally Lipschitz function on R.
class ClassK {
public:
    enum class Kind { linear, saturating, custom };

    static ClassK linear(double gamma)
    {
        if (!(gamma > 0.0) || !std::isfinite(gamma))
            throw ValidationError("linear class-K slope must be positive and finite");
        return ClassK(Kind::linear, gamma, 0.0, [gamma](double s) { return gamma * s; }, gamma);
    }

    /// gamma * width * tanh(s / width): slope gamma at zero, bounded by gamma * width.
    static ClassK saturating(double gamma, double width)
    {
        if (!(gamma > 0.0) || !(width > 0.0) || !std::isfinite(gamma) || !std::isfinite(width))
            throw ValidationError("saturating class-K needs positive finite gamma and width");
        return ClassK(Kind::saturating, gamma, width,
                      [gamma, width](double s) { return gamma * width * std::tanh(s / width); }, gamma);
    }

    /// Caller-supplied function; validated on a sample grid.
    static ClassK custom(std::function<double(double)> fn, double lipschitz)
    {
        ClassK k(Kind::custom, 0.0, 0.0, std::move(fn), lipschitz);
        if (auto issues = k.validate(); !issues.empty())
            throw ValidationError(issues.front());
        return k;
    }

    double operator()(double s) const { return fn_(s); }

    Kind kind() const { return kind_; }
    bool is_linear() const { return kind_ == Kind::linear; }
    double gamma() const { return gamma_; }
    double width() const { return width_; }
    double lipschitz() const { return lipschitz_; }

    std::vector<std::string> validate() const
    {
        std::vector<std::string> issues;
        if (!fn_) {
            issues.emplace_back("class-K function is empty");
            return issues;
        }
        if (std::abs(fn_(0.0)) > kConstraintTolerance)
            issues.emplace_back("class-K function must vanish at zero");
        if (!(lipschitz_ > 0.0) || !std::isfinite(lipschitz_))
            issues.emplace_back("class-K Lipschitz constant must be positive and finite");
        if (kind_ != Kind::custom)
            return issues;
        // a sampled check: increasing, sign-definite away from zero, Lipschitz
        double prev = fn_(-10.0);
        for (int k = -999; k <= 1000; ++k) {
            double s = 0.01 * k;
            double v = fn_(s);
            if (!(v >= prev) || (k > 0 && !(v > 0.0)) || (k < 0 && !(v < 0.0))) {
                issues.emplace_back("class-K function must be strictly increasing");
                break;
            }
            if (std::abs(v - prev) > lipschitz_ * 0.01 * (1 + 1e-9) + 1e-15) {
                issues.emplace_back("class-K function exceeds its declared Lipschitz constant");
                break;
            }
            prev = v;
        }
        return issues;
    }

private:
    ClassK(Kind kind, double gamma, double width, std::function<double(double)> fn, double lipschitz)
        : kind_(kind), gamma_(gamma), width_(width), fn_(std::move(fn)), lipschitz_(lipschitz)
    {
    }

    Kind kind_;
    double gamma_;
    double width_;
    std::function<double(double)> fn_;
    double lipschitz_;
};

/// Controller parameters for one controlled bus (0-based index).
struct BusController {
    std::size_t bus = 0;
    FrequencyBand band;
    ClassK upper_alpha = ClassK::linear(1.0);
    ClassK lower_alpha = ClassK::linear(1.0);
};

/// q_i = E_i w_i + flow_i - p_i, the net decelerating power at bus i.
inline double q_value(double damping, double omega, double flow, double injection)
{
    return damping * omega + flow - injection;
}

inline double q_value(const PowerNetwork& net, const IncidenceMatrix& d, const SystemState& x,
                      const Eigen::VectorXd& p, std::size_t i)
{
    Eigen::VectorXd flow = aggregate_flow(net, d, x.lambda);
    auto k = static_cast<Eigen::Index>(i);
    return q_value(net.damping.at(i), x.omega[k], flow[k], p[k]);
}

/// Control law evaluated from bus-local quantities. The exact thresholds
/// belong to the dead band.
inline double control(const FrequencyBand& band, const ClassK& upper_alpha, const ClassK& lower_alpha, double omega,
                      double q)
{
    if (omega > band.upper_threshold)
        return std::min(0.0, -upper_alpha(band.upper_barrier(omega)) / (omega - band.upper_threshold) + q);
    if (omega < band.lower_threshold)
        return std::max(0.0, lower_alpha(band.lower_barrier(omega)) / (band.lower_threshold - omega) + q);
    return 0.0;
}

inline double control(const BusController& c, double omega, double q)
{
    return control(c.band, c.upper_alpha, c.lower_alpha, omega, q);
}

/// Network-level evaluation with the linearized flow term.
inline double control(const PowerNetwork& net, const IncidenceMatrix& d, const SystemState& x, const Eigen::VectorXd& p,
                      const BusController& c)
{
    return control(c, x.omega[static_cast<Eigen::Index>(c.bus)], q_value(net, d, x, p, c.bus));
}

/// What a controller observes at bus i when measurements are imperfect.
struct Measurement {
    double omega = 0.0;     // w_hat
    double flow = 0.0;      // [D^T Y_b]_i lambda_hat
    double injection = 0.0; // p_hat
};

/// Same law, evaluated on measured state and injection with the assumed damping.
inline double control_robust(const BusController& c, const Measurement& m, double damping_estimate)
{
    return control(c, m.omega, q_value(damping_estimate, m.omega, m.flow, m.injection));
}

// ---------------------------------------------------------------------------
// Robustness under bounded uncertainty

/// Error bounds for one controlled bus: |eps_w| <= omega, |eps_lambda| <= flow,
/// |eps_p| <= injection, |E_hat - E| <= damping.
struct ErrorBounds {
    double omega = 0.0;
    double flow = 0.0;
    double injection = 0.0;
    double damping = 0.0;

    bool operator==(const ErrorBounds&) const = default;
};

struct RobustMargin {
    bool feasible = false;
    double upper_slack = 0.0; // LHS of the upper-bound inequality; <= 0 required
    double lower_slack = 0.0;
};

/// Where the class-K term of the robust inequalities is evaluated.
///
/// `published` uses the measured frequency w_bar + delta + eps_w. That is the
/// most favorable point of the measurement interval, so a feasible result
/// does not guarantee containment when eps_w > 0: with a constant offset
/// -eps_w the controller settles near w_bar + eps_w (1 - E_hat gap / gamma)
/// while the published form accepts any delta.
///
/// `worst_case` uses w_bar + delta - eps_w, the measurement that lets the
/// most power in at the inflated bound. It coincides with `published` when
/// eps_w = 0 and is never easier to satisfy.
enum class RobustForm { published, worst_case };

/// Evaluates the two robust-invariance inequalities for the linear class-K
/// slope `gamma` and inflation `delta`. Feasible iff both left-hand sides are
/// nonpositive.
inline RobustMargin robust_margin(const FrequencyBand& band, double gamma, double damping_estimate,
                                  const ErrorBounds& e, double delta, RobustForm form = RobustForm::published)
{
    const double common = damping_estimate * e.omega + e.flow + e.injection;
    const double reach = form == RobustForm::published ? delta + e.omega : delta - e.omega;
    // -gamma x / (gap + x); a nonpositive denominator means the measurement
    // can sit inside the dead band while the true frequency is at the bound
    auto pull = [&](double gap) {
        return gap + reach > 0.0 ? -gamma * reach / (gap + reach) : std::numeric_limits<double>::infinity();
    };
    RobustMargin m;
    m.upper_slack = pull(band.upper - band.upper_threshold) + e.damping * (delta + band.upper) + common;
    m.lower_slack = pull(band.lower_threshold - band.lower) + e.damping * (delta - band.lower) + common;
    m.feasible = m.upper_slack <= 0.0 && m.lower_slack <= 0.0;
    return m;
}

/// Smallest delta in [delta_min, delta_max] for which robust_margin is
/// feasible, to within `tol`. Both slacks are convex in delta, so the
/// feasible set is an interval: locate any feasible point by golden-section
/// minimization of the worse slack, then bisect toward delta_min.
inline std::optional<double> min_feasible_delta(const FrequencyBand& band, double gamma, double damping_estimate,
                                                const ErrorBounds& e, double delta_max,
                                                RobustForm form = RobustForm::published, double delta_min = 1e-6,
                                                double tol = 1e-12)
{
    auto worst = [&](double d) {
        auto m = robust_margin(band, gamma, damping_estimate, e, d, form);
        return std::max(m.upper_slack, m.lower_slack);
    };
    if (!(delta_max >= delta_min))
        return std::nullopt;
    if (worst(delta_min) <= 0.0)
        return delta_min;

    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = delta_min, b = delta_max;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = worst(c), fd = worst(d);
    for (int it = 0; it < 200 && b - a > tol; ++it) {
        if (fc <= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = worst(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = worst(d);
        }
    }
    double best = fc <= fd ? c : d;
    if (worst(delta_max) <= 0.0 && worst(delta_max) < worst(best))
        best = delta_max;
    if (worst(best) > 0.0)
        return std::nullopt;

    double lo = delta_min, hi = best; // worst(lo) > 0 >= worst(hi)
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        (worst(mid) <= 0.0 ? hi : lo) = mid;
    }
    return hi;
}

/// Deterministic, bounded error signal e(t).
struct ErrorSignal {
    enum class Kind { zero, constant, sinusoid };
    Kind kind = Kind::zero;
    double amplitude = 0.0;
    double rate = 0.0;  // rad/s
    double phase = 0.0; // rad

    double operator()(double t) const
    {
        switch (kind) {
        case Kind::constant:
            return amplitude;
        case Kind::sinusoid:
            return amplitude * std::sin(rate * t + phase);
        default:
            return 0.0;
        }
    }

    double bound() const { return kind == Kind::zero ? 0.0 : std::abs(amplitude); }
};

/// Measurement and parameter uncertainty at one controlled bus. Injection
/// errors are `injection_scale * p_i(t) + injection_offset(t)`.
struct BusUncertainty {
    std::size_t bus = 0;
    double damping_estimate = 0.0; // E_hat, internal units
    ErrorSignal omega_error;
    ErrorSignal flow_error;
    double injection_scale = 0.0;
    ErrorSignal injection_offset;
    ErrorBounds bounds;
};

struct UncertaintyModel {
    std::vector<BusUncertainty> buses;

    const BusUncertainty* find(std::size_t bus) const
    {
        for (const auto& b : buses)
            if (b.bus == bus)
                return &b;
        return nullptr;
    }
};

/// Checks that declared bounds cover the realized signals and that the
/// synchronized frequency and bounds fit inside the dead band.
/// `peak_injection` is max_t |p_i(t)| and `damping` the true E_i.
inline std::vector<std::string> validate_uncertainty(const BusUncertainty& u, const FrequencyBand& band, double damping,
                                                     double peak_injection, double omega_inf)
{
    std::vector<std::string> issues;
    const std::string tag = "uncertainty bus " + std::to_string(u.bus + 1) + ": ";
    const auto& e = u.bounds;
    if (e.omega < 0 || e.flow < 0 || e.injection < 0 || e.damping < 0)
        issues.push_back(tag + "error bounds must be nonnegative");
    const double slack = 1e-12;
    if (u.omega_error.bound() > e.omega + slack)
        issues.push_back(tag + "frequency error exceeds its bound");
    if (u.flow_error.bound() > e.flow + slack)
        issues.push_back(tag + "flow error exceeds its bound");
    if (std::abs(u.injection_scale) * peak_injection + u.injection_offset.bound() > e.injection * (1 + 1e-12) + slack)
        issues.push_back(tag + "injection error exceeds its bound");
    if (std::abs(u.damping_estimate - damping) > e.damping * (1 + 1e-12) + slack)
        issues.push_back(tag + "damping error exceeds its bound");
    if (!(u.damping_estimate > 0.0))
        issues.push_back(tag + "damping estimate must be positive");
    if (omega_inf < band.lower_threshold + e.omega || omega_inf > band.upper_threshold - e.omega)
        issues.push_back(tag + "synchronized frequency must lie in the dead band shrunk by the frequency error bound");
    if (!(e.omega < std::min(band.upper - band.upper_threshold, band.lower_threshold - band.lower)))
        issues.push_back(tag + "frequency error bound must be smaller than both band margins");
    return issues;
}

// ---------------------------------------------------------------------------
// Constraint predicates

/// (w_i - w_inf) u_i <= 0, and u_i = 0 when w_i = w_inf (both to `tol`).
inline bool stability_constraint_holds(double u, double omega, double omega_inf, double tol = kConstraintTolerance)
{
    if (std::abs(omega - omega_inf) <= tol)
        return std::abs(u) <= tol;
    return (omega - omega_inf) * u <= tol;
}

/// LHS minus RHS of the class-K condition in the active band containing
/// omega; nullopt when omega lies outside both (condition vacuous).
inline std::optional<double> classK_constraint_slack(double omega, double u, double q, const FrequencyBand& band,
                                                     const ClassK& upper_alpha, const ClassK& lower_alpha)
{
    if (band.upper_threshold < omega && omega <= band.upper)
        return (omega - band.upper_threshold) * (u - q) + upper_alpha(band.upper_barrier(omega));
    if (band.lower <= omega && omega < band.lower_threshold)
        return (band.lower_threshold - omega) * (-u + q) + lower_alpha(band.lower_barrier(omega));
    return std::nullopt;
}

inline bool classK_constraint_holds(double omega, double u, double q, const FrequencyBand& band,
                                    const ClassK& upper_alpha, const ClassK& lower_alpha,
                                    double tol = kConstraintTolerance)
{
    auto s = classK_constraint_slack(omega, u, q, band, upper_alpha, lower_alpha);
    return !s || *s <= tol;
}

/// Boundary (Nagumo) condition: u - q <= 0 at w = hi, -u + q <= 0 at w = lo.
/// `band_tol` is how close omega must be to a bound for the slice to apply.
inline std::optional<double> boundary_slack(double omega, double u, double q, const FrequencyBand& band,
                                            double band_tol)
{
    if (std::abs(omega - band.upper) <= band_tol)
        return u - q;
    if (std::abs(omega - band.lower) <= band_tol)
        return -u + q;
    return std::nullopt;
}

} // namespace tfc
