#pragma once

#include <algorithm>
#include <stdexcept>
#include <string_view>

namespace eaf {

enum class Stage { MeltDown = 0, Oxidation = 1, Reduction = 2 };

inline constexpr int kStageCount = 3;

constexpr std::string_view to_string(Stage s) noexcept
{
    switch (s) {
    case Stage::MeltDown: return "meltdown";
    case Stage::Oxidation: return "oxidation";
    case Stage::Reduction: return "reduction";
    }
    return "?";
}

/// Empirical coefficients of the melt-progress estimators. The efficiency,
/// loss-per-minute and melt-energy constants are folded into these fits.
struct ProgressCoefficients {
    double p_w = 5.162e-5;  // 1/kWh
    double p_t = 8.641e-4;  // 1/min
    double q_w = 9.423e-5;  // 1/kWh
    double q_t = 1.949e-3;  // 1/min
};

namespace detail {

inline void require_nonnegative(double w_throw, double t_off)
{
    if (!(w_throw >= 0.0) || !(t_off >= 0.0))
        throw std::domain_error("melt progress inputs must be non-negative");
}

} // namespace detail

/// Melt-down progress p from integrated active power [kWh] and power-off time [min].
/// Clamped at 0 so long power-off periods cannot report negative progress.
inline double process_variable_p(double w_throw, double t_off, const ProgressCoefficients& c = {})
{
    detail::require_nonnegative(w_throw, t_off);
    return std::max(0.0, c.p_w * w_throw - c.p_t * t_off);
}

/// Refining progress q; q >= 1 marks the reducing period.
inline double process_variable_q(double w_throw, double t_off, const ProgressCoefficients& c = {})
{
    detail::require_nonnegative(w_throw, t_off);
    return std::max(0.0, c.q_w * w_throw - c.q_t * t_off);
}

/// Total over (p, q); the reduction test wins when both thresholds are met.
constexpr Stage classify_stage(double p, double q) noexcept
{
    if (q >= 1.0)
        return Stage::Reduction;
    if (p >= 1.0)
        return Stage::Oxidation;
    return Stage::MeltDown;
}

/// Charge-level melt bookkeeping.
///
/// `w_throw` and `t_off` run over the whole charge and feed p. The refining
/// estimator q is fed by the energy and off-time booked after melt-down has
/// ended (`w_refine`, `t_off_refine`): fed from charge start, q would cross 1
/// before p does and the oxidation window could never open.
struct MeltProgress {
    double w_throw = 0.0;      // kWh
    double t_off = 0.0;        // min
    double w_refine = 0.0;     // kWh since melt-down ended
    double t_off_refine = 0.0; // min since melt-down ended
    double p = 0.0;
    double q = 0.0;
    Stage stage = Stage::MeltDown;
};

/// Rectangle-rule integration of one control cycle. `active_power` is the
/// three-phase total in kW, `dt` in seconds. The stage is latched: it only
/// ever moves forward.
inline MeltProgress accumulate(MeltProgress m, double active_power, bool power_on, double dt,
                               const ProgressCoefficients& c = {})
{
    if (!(dt > 0.0))
        throw std::domain_error("accumulate: dt must be positive");
    if (!(active_power >= 0.0))
        throw std::domain_error("accumulate: active power must be non-negative");

    const bool refining = m.stage != Stage::MeltDown;
    if (power_on) {
        const double dw = active_power * dt / 3600.0;
        m.w_throw += dw;
        if (refining)
            m.w_refine += dw;
    } else {
        const double dtoff = dt / 60.0;
        m.t_off += dtoff;
        if (refining)
            m.t_off_refine += dtoff;
    }

    m.p = process_variable_p(m.w_throw, m.t_off, c);
    m.q = refining ? process_variable_q(m.w_refine, m.t_off_refine, c) : 0.0;
    m.stage = std::max(m.stage, classify_stage(m.p, m.q));
    return m;
}

} // namespace eaf
