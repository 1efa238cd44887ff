#pragma once

#include <cmath>
#include <stdexcept>

// Impedances are in milliohm throughout.
namespace eaf {

namespace detail {

inline void require_impedances(double z, double z_set)
{
    if (!(z > 0.0) || !(z_set > 0.0) || !std::isfinite(z) || !std::isfinite(z_set))
        throw std::domain_error("impedance and setpoint must be finite and positive");
}

} // namespace detail

/// Controlled variable y = z_set^2 / z. With the secondary voltage fixed this
/// is proportional to arc current, vanishes for an open arc and equals z_set
/// at the setpoint.
inline double scaled_variable(double z, double z_set)
{
    detail::require_impedances(z, z_set);
    return z_set * z_set / z;
}

/// Error of the controlled variable, y - y_set = (z_set / z) * (z_set - z).
/// Positive when the impedance is below setpoint (arc too short, current high).
inline double scaled_error(double z, double z_set)
{
    detail::require_impedances(z, z_set);
    return (z_set / z) * (z_set - z);
}

} // namespace eaf
