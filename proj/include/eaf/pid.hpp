#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace eaf {

/// Parallel-form gains: ki = kp / Ti, kd = kp * Td.
struct PidGains {
    double kp = 0.0; // V per error unit
    double ki = 0.0; // 1/s
    double kd = 0.0; // s

    friend bool operator==(const PidGains&, const PidGains&) = default;
};

/// Per-phase controller memory.
struct PidState {
    double integral_sum = 0.0;   // running sum of e * t_c, only while |e| <= delta
    double deriv_filtered = 0.0; // u_d of the previous cycle
    double e_prev = 0.0;
    double s_accum = 0.0;        // plain error accumulation S(k), maintained by the supervisor
    double last_command = 0.0;

    friend bool operator==(const PidState&, const PidState&) = default;
};

struct PidParams {
    double t_c = 0.1;          // control cycle [s]
    double delta = 0.0;        // integral separation band, in error units
    double n = 10.0;           // derivative filter ratio
    double u_limit = 2.5;      // actuator command magnitude [V]
};

struct PidStep {
    double command = 0.0;
    PidState state;
    bool fault = false;
};

/// Smoothing factor of the real derivative, lambda = a / (1 + a) with
/// a = Td / (t_c * n). Zero for a vanishing derivative time.
inline double derivative_lambda(double t_d, double t_c, double n)
{
    if (!(t_c > 0.0) || !(n > 0.0))
        throw std::domain_error("derivative_lambda: t_c and n must be positive");
    if (!(t_d > 0.0))
        return 0.0;
    const double a = t_d / (t_c * n);
    return a / (1.0 + a);
}

/// Td recovered from parallel gains; a zero kp degenerates to a plain difference.
inline double derivative_time(const PidGains& g) noexcept
{
    return g.kp > 0.0 ? g.kd / g.kp : 0.0;
}

inline PidState reset(const PidState&) noexcept { return PidState{}; }

/// One cycle of the separated-integral PID with filtered derivative.
///
/// The integral accumulates only while |e| <= delta and is left untouched
/// otherwise. Non-finite errors are reported as a fault and the previous
/// command is held with the state unchanged.
inline PidStep pid_step(const PidState& state, const PidGains& gains, double e, const PidParams& prm)
{
    if (!(prm.t_c > 0.0) || !(prm.n > 0.0))
        throw std::domain_error("pid_step: t_c and n must be positive");

    if (!std::isfinite(e))
        return {state.last_command, state, true};

    PidState next = state;
    const double lambda = derivative_lambda(derivative_time(gains), prm.t_c, prm.n);

    const double u_p = gains.kp * e;
    const double u_d = lambda * state.deriv_filtered
                       + (1.0 - lambda) * gains.kd * (e - state.e_prev) / prm.t_c;
    double u = u_p + u_d;
    if (std::abs(e) <= prm.delta) {
        next.integral_sum += e * prm.t_c;
        u += gains.ki * next.integral_sum;
    }

    u = std::clamp(u, -prm.u_limit, prm.u_limit);
    next.deriv_filtered = u_d;
    next.e_prev = e;
    next.last_command = u;
    return {u, next, false};
}

} // namespace eaf
