#pragma once

#include <charconv>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tfc {

/// Unit in which a file expresses frequencies. Internally everything is
/// rad/s; coefficients per unit frequency (inertia, damping) scale inversely.
enum class FrequencyUnit { rad_per_s, hz };

inline double frequency_scale(FrequencyUnit unit)
{
    return unit == FrequencyUnit::hz ? 2.0 * std::numbers::pi : 1.0;
}

inline double frequency_to_internal(double value, FrequencyUnit unit) { return value * frequency_scale(unit); }
inline double frequency_from_internal(double value, FrequencyUnit unit) { return value / frequency_scale(unit); }

// Power per unit frequency (damping) and power per unit frequency rate (inertia).
inline double coefficient_to_internal(double value, FrequencyUnit unit) { return value / frequency_scale(unit); }
inline double coefficient_from_internal(double value, FrequencyUnit unit) { return value * frequency_scale(unit); }

inline std::string_view to_string(FrequencyUnit unit) { return unit == FrequencyUnit::hz ? "hz" : "rad_per_s"; }

inline FrequencyUnit parse_frequency_unit(std::string_view s)
{
    if (s == "hz" || s == "Hz")
        return FrequencyUnit::hz;
    if (s == "rad_per_s" || s == "rad/s")
        return FrequencyUnit::rad_per_s;
    throw std::invalid_argument("unknown frequency unit '" + std::string(s) + "'");
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v)
{
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out)
{
    if (!s.empty() && s.front() == '+')
        s.remove_prefix(1);
    auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

} // namespace tfc
