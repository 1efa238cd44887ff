#pragma once

#include "eaf/pid.hpp"
#include "eaf/scaling.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string_view>

namespace eaf {

/// Electrode-break prevention and arc-strike constants. Commands in volts,
/// positive lifts the electrode.
struct SafetyLimits {
    double i_set = 25000.0;      // A
    double i_noarc = 5000.0;     // A
    double over_factor = 1.25;
    double danger_factor = 1.5;
    double lowvolt_factor = 1.2;
    double x_react = 7.2;        // mOhm, per-phase short-network reactance
    double stop_e_frac = 0.1;    // dead band on |e| as a fraction of z_set
    double stop_s = 100.0;       // mOhm, dead band on |S|
    double v_down_fast = -1.0;
    double v_up_slow = 0.3;
    double v_up_fast = 1.5;
    double v_all_full = 2.5;
    double t_over = 1.0;         // s
    double t_escalate = 2.0;     // s

    void validate() const
    {
        if (!(i_set > 0.0) || !(i_noarc >= 0.0) || !(x_react > 0.0))
            throw std::invalid_argument("safety limits: currents and reactance must be positive");
        if (!(over_factor > 0.0 && over_factor < danger_factor))
            throw std::invalid_argument("safety limits: need 0 < over_factor < danger_factor");
        if (!(lowvolt_factor > 0.0) || !(stop_e_frac >= 0.0) || !(stop_s >= 0.0))
            throw std::invalid_argument("safety limits: factors must be non-negative");
        for (double v : {v_down_fast, v_up_slow, v_up_fast, v_all_full})
            if (!(std::abs(v) <= 2.5))
                throw std::invalid_argument("safety limits: speed commands must lie within 2.5 V");
        if (!(v_down_fast < 0.0) || !(v_up_slow > 0.0) || !(v_up_fast > 0.0) || !(v_all_full > 0.0))
            throw std::invalid_argument("safety limits: speed command signs are fixed");
        if (!(t_over > 0.0) || !(t_escalate > 0.0))
            throw std::invalid_argument("safety limits: timers must be positive");
    }
};

struct Measurement {
    double i = 0.0;  // A
    double e2 = 0.0; // V
    double z = std::numeric_limits<double>::infinity(); // mOhm
};

struct SupervisorState {
    bool arc_success = false;
    std::optional<double> overcurrent_since; // s
    std::optional<double> highlift_since;    // s
    double last_command = 0.0;

    friend bool operator==(const SupervisorState&, const SupervisorState&) = default;
};

enum class Action { Idle, BoreDown, LiftSlow, LiftFast, Escalate, Stop, Regulate, Fault };

constexpr std::string_view to_string(Action a) noexcept
{
    switch (a) {
    case Action::Idle: return "idle";
    case Action::BoreDown: return "bore_down";
    case Action::LiftSlow: return "lift_slow";
    case Action::LiftFast: return "lift_fast";
    case Action::Escalate: return "escalate";
    case Action::Stop: return "stop";
    case Action::Regulate: return "regulate";
    case Action::Fault: return "fault";
    }
    return "?";
}

/// Outcome of the break-prevention part. When `action` is
/// Regulate the caller owns the command.
struct GuardVerdict {
    Action action = Action::Idle;
    double command = 0.0;
    bool escalate_all = false;
    bool arc_lost = false;
    SupervisorState state;
};

namespace detail {
// Timer thresholds are compared with a small slack so that a run of cycles
// k * t_c reaches an exact 1 s or 2 s boundary despite rounding.
inline constexpr double kTimerSlack = 1e-9;
} // namespace detail

inline bool low_voltage(const SafetyLimits& lim, const Measurement& m) noexcept
{
    return m.e2 <= lim.lowvolt_factor * m.i * lim.x_react / 1000.0;
}

/// Over-current ladder, escalation timer, bore-down and arc latch.
inline GuardVerdict guard(const SupervisorState& in, const SafetyLimits& lim, const Measurement& m, double now)
{
    GuardVerdict v;
    v.state = in;
    SupervisorState& s = v.state;

    const bool lowv = low_voltage(lim, m);
    const bool danger = m.i >= lim.danger_factor * lim.i_set;
    const bool over = m.i >= lim.over_factor * lim.i_set;

    if (over) {
        if (!s.overcurrent_since)
            s.overcurrent_since = now;
    } else {
        s.overcurrent_since.reset();
    }
    const bool over_sustained =
        over && now - *s.overcurrent_since >= lim.t_over - detail::kTimerSlack;

    if (lowv || danger || over_sustained) {
        if (!s.highlift_since)
            s.highlift_since = now;
        v.escalate_all = now - *s.highlift_since >= lim.t_escalate - detail::kTimerSlack;
        v.action = v.escalate_all ? Action::Escalate : Action::LiftFast;
        v.command = v.escalate_all ? lim.v_all_full : lim.v_up_fast;
        s.last_command = v.command;
        return v;
    }
    s.highlift_since.reset();

    if (over) {
        v.action = Action::LiftSlow;
        v.command = lim.v_up_slow;
        s.last_command = v.command;
        return v;
    }

    if (m.i < lim.i_noarc) {
        if (s.arc_success) {
            s.arc_success = false;
            v.arc_lost = true;
        }
        v.action = Action::BoreDown;
        v.command = lim.v_down_fast;
        s.last_command = v.command;
        return v;
    }

    if (m.i > lim.i_noarc)
        s.arc_success = true;

    if (s.arc_success) {
        v.action = Action::Regulate;
        return v;
    }
    v.action = Action::Idle;
    v.command = 0.0;
    s.last_command = 0.0;
    return v;
}

struct SupervisorOutput {
    double command = 0.0;
    bool escalate_all = false;
    Action action = Action::Idle;
    double error = std::numeric_limits<double>::quiet_NaN(); // regulated error, when computed
    SupervisorState state;
    PidState pid;
};

/// Generic supervision: `regulate(const PidState&) -> SupervisorOutput`-like
/// callable supplies command, action, error and new PID state once the guard
/// hands over control. Arc loss clears the controller memory.
template <class Regulate>
SupervisorOutput supervise_with(const SupervisorState& state, const SafetyLimits& lim, const Measurement& m,
                                const PidState& pid, double now, Regulate&& regulate)
{
    GuardVerdict g = guard(state, lim, m, now);
    SupervisorOutput out;
    out.state = g.state;
    out.pid = g.arc_lost ? reset(pid) : pid;
    out.escalate_all = g.escalate_all;
    out.action = g.action;
    out.command = g.command;
    if (g.action != Action::Regulate)
        return out;

    const auto r = regulate(out.pid);
    out.action = r.action;
    out.command = r.command;
    out.error = r.error;
    out.pid = r.pid;
    out.state.last_command = r.command;
    return out;
}

struct RegulatorResult {
    Action action = Action::Regulate;
    double command = 0.0;
    double error = 0.0;
    PidState pid;
};

/// S(k) += e(k).
inline PidState accumulate_error(PidState pid, double e) noexcept
{
    pid.s_accum += e;
    return pid;
}

/// Regulation on the nonlinearly scaled impedance error: dead-band stop while
/// both |e| and |S| are small, otherwise accumulate S and run the PID. S is
/// frozen inside the dead band.
inline RegulatorResult regulate_scaled(const SafetyLimits& lim, const Measurement& m, double z_set,
                                       const PidState& pid, const PidGains& gains, const PidParams& prm)
{
    RegulatorResult r;
    r.pid = pid;
    if (!(m.z > 0.0) || !std::isfinite(m.z)) {
        r.action = Action::Fault;
        r.command = pid.last_command;
        r.error = std::numeric_limits<double>::quiet_NaN();
        return r;
    }
    r.error = scaled_error(m.z, z_set);
    if (std::abs(r.error) < lim.stop_e_frac * z_set && std::abs(pid.s_accum) < lim.stop_s) {
        r.action = Action::Stop;
        r.command = 0.0;
        r.pid.last_command = 0.0;
        return r;
    }
    const PidStep step = pid_step(accumulate_error(pid, r.error), gains, r.error, prm);
    r.action = step.fault ? Action::Fault : Action::Regulate;
    r.command = step.command;
    r.pid = step.state;
    return r;
}

/// Full per-phase supervisory step for the scaled-impedance controller.
inline SupervisorOutput supervise(const SupervisorState& state, const SafetyLimits& lim, const Measurement& m,
                                  double z_set, const PidState& pid, const PidGains& gains, const PidParams& prm,
                                  double now)
{
    return supervise_with(state, lim, m, pid, now, [&](const PidState& p) {
        return regulate_scaled(lim, m, z_set, p, gains, prm);
    });
}

} // namespace eaf
