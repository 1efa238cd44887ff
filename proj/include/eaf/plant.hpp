#pragma once

#include "eaf/stage_estimator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

namespace eaf {

/// Per-stage values, indexed by Stage.
using StageValues = std::array<double, kStageCount>;

inline double at(const StageValues& v, Stage s) noexcept { return v[static_cast<std::size_t>(s)]; }

/// Static plant, transformer and disturbance constants. Lengths in mm,
/// impedances in mOhm, e2 is the per-phase secondary voltage.
struct FurnaceConfig {
    // Electrode lifting device, K / (T s + 1) from command voltage to velocity.
    double servo_gain = 15.0; // (mm/s)/V
    double servo_tau = 0.1;   // s

    double e2_nominal = 300.0; // V per phase (520 V line-to-line)
    double i_rated = 30000.0;  // A
    double i_set = 25000.0;    // A
    double z_set = 12.0;       // mOhm, must equal 1000 * e2 / i_set
    double x_react = 7.2;      // mOhm
    double r_short = 0.4;      // mOhm

    double arc_v_offset = 40.0; // V, electrode fall voltages
    double arc_v_per_mm = 1.0;  // V/mm, melt-down column gradient
    // Column gradient relative to melt-down; the arc is progressively buried in slag.
    StageValues arc_gradient_scale{1.0, 0.7, 0.45};

    double t_c = 0.1; // s

    // Arc-length disturbance: unit-variance first-order filtered noise scaled
    // by the stage standard deviation, plus melt-down scrap cave-ins.
    StageValues noise_std{25.0, 34.0, 64.3};      // mm
    StageValues noise_corner_hz{1.0, 0.3, 0.05}; // Hz
    double cavein_rate = 1.0 / 60.0; // 1/s, melt-down only
    double cavein_min = 10.0;        // mm
    double cavein_max = 30.0;        // mm

    double initial_gap = 300.0; // mm, electrode tip above the charge at power-on

    double secondary_line_min = 180.0; // V
    double secondary_line_max = 540.0; // V

    void validate() const
    {
        if (!(servo_gain > 0.0) || !(servo_tau > 0.0))
            throw std::invalid_argument("furnace config: servo gain and time constant must be positive");
        const double line = std::sqrt(3.0) * e2_nominal;
        if (!(line >= secondary_line_min && line <= secondary_line_max))
            throw std::invalid_argument("furnace config: secondary voltage outside the transformer range");
        if (!(i_set > 0.0) || !(i_rated > 0.0) || !(x_react > 0.0) || !(r_short >= 0.0))
            throw std::invalid_argument("furnace config: circuit constants must be positive");
        if (!(z_set > 0.0) || std::abs(z_set - 1000.0 * e2_nominal / i_set) > 1e-6 * z_set)
            throw std::invalid_argument("furnace config: z_set must equal e2_nominal / i_set");
        if (!(arc_v_offset >= 0.0) || !(arc_v_per_mm > 0.0))
            throw std::invalid_argument("furnace config: arc voltage model must be non-negative");
        for (double s : arc_gradient_scale)
            if (!(s > 0.0))
                throw std::invalid_argument("furnace config: gradient scales must be positive");
        for (double s : noise_std)
            if (!(s >= 0.0))
                throw std::invalid_argument("furnace config: noise std must be non-negative");
        for (double f : noise_corner_hz)
            if (!(f > 0.0))
                throw std::invalid_argument("furnace config: noise corner frequencies must be positive");
        if (!(t_c > 0.0) || !(cavein_rate >= 0.0))
            throw std::invalid_argument("furnace config: rates must be positive");
        if (!(cavein_min >= 0.0 && cavein_max >= cavein_min))
            throw std::invalid_argument("furnace config: cave-in range is empty");
        if (!(arc_v_offset < e2_nominal))
            throw std::invalid_argument("furnace config: arc cannot strike at zero length");
    }
};

struct PhaseState {
    double h = 0.0;          // electrode tip height above the reference charge level, mm
    double v = 0.0;          // electrode velocity, mm/s (positive up)
    double l_arc = 0.0;      // mm
    double bath_level = 0.0; // mm, shifted by cave-ins
    double noise = 0.0;      // unit-variance filtered noise state
    double d = 0.0;          // current length disturbance, mm
};

/// Exact zero-order-hold update of the first-order servo; positive u lifts.
inline PhaseState servo_step(PhaseState s, double u, double dt, double gain, double tau)
{
    if (!(dt > 0.0))
        throw std::domain_error("servo_step: dt must be positive");
    const double target = gain * u;
    const double a = std::exp(-dt / tau);
    s.h += target * dt + (s.v - target) * tau * (1.0 - a);
    s.v = target + (s.v - target) * a;
    return s;
}

inline PhaseState servo_step(const PhaseState& s, double u, double dt, const FurnaceConfig& cfg)
{
    return servo_step(s, u, dt, cfg.servo_gain, cfg.servo_tau);
}

inline double arc_voltage(const FurnaceConfig& cfg, double l_arc, Stage stage) noexcept
{
    return cfg.arc_v_offset + cfg.arc_v_per_mm * at(cfg.arc_gradient_scale, stage) * l_arc;
}

struct CircuitSolution {
    double i = 0.0;  // A
    double e2 = 0.0; // V
    double z = std::numeric_limits<double>::infinity(); // mOhm
    double u_arc = 0.0;    // V
    double p_active = 0.0; // kW, this phase only
    bool arc = false;
};

/// Single-phase RMS circuit: e2^2 = (i R + U_arc)^2 + (i X)^2, with the
/// arc as a length-proportional counter-voltage in phase with the current.
inline CircuitSolution circuit_solve(const FurnaceConfig& cfg, double l_arc, Stage stage = Stage::MeltDown)
{
    if (!(l_arc >= 0.0))
        throw std::domain_error("circuit_solve: arc length must be non-negative");
    CircuitSolution c;
    c.e2 = cfg.e2_nominal;
    c.u_arc = arc_voltage(cfg, l_arc, stage);
    if (c.u_arc >= c.e2)
        return c;

    const double r = cfg.r_short / 1000.0;
    const double x = cfg.x_react / 1000.0;
    const double a = r * r + x * x;
    const double b = 2.0 * r * c.u_arc;
    const double minus_c = c.e2 * c.e2 - c.u_arc * c.u_arc; // > 0
    // Positive root of a i^2 + b i - minus_c = 0 in the cancellation-free form.
    c.i = 2.0 * minus_c / (b + std::sqrt(b * b + 4.0 * a * minus_c));
    c.z = 1000.0 * c.e2 / c.i;
    c.p_active = (c.i * c.i * r + c.u_arc * c.i) / 1000.0;
    c.arc = true;
    return c;
}

/// Arc length that yields current `i` in `stage`, inverse of circuit_solve.
inline double arc_length_for_current(const FurnaceConfig& cfg, double i, Stage stage)
{
    const double r = cfg.r_short / 1000.0;
    const double x = cfg.x_react / 1000.0;
    const double ix = i * x;
    if (!(i > 0.0) || ix >= cfg.e2_nominal)
        throw std::domain_error("arc_length_for_current: current out of range");
    const double u_arc = std::sqrt(cfg.e2_nominal * cfg.e2_nominal - ix * ix) - i * r;
    const double l = (u_arc - cfg.arc_v_offset) / (cfg.arc_v_per_mm * at(cfg.arc_gradient_scale, stage));
    if (!(l >= 0.0))
        throw std::domain_error("arc_length_for_current: current exceeds the zero-length arc current");
    return l;
}

/// Independent random stream for one phase of one charge. Streams depend only
/// on (seed, charge, phase), so neither phase order nor controller mode changes
/// the realisation.
class PhaseRng {
public:
    PhaseRng(std::uint64_t seed, std::uint64_t charge, std::uint64_t phase)
    {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(charge), static_cast<std::uint32_t>(phase), 0x6561u};
        engine_.seed(seq);
    }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Advances the disturbance one cycle and recomputes the arc length. Every
/// call consumes the same number of draws regardless of stage.
inline PhaseState disturb(PhaseState s, Stage stage, PhaseRng& rng, double dt, const FurnaceConfig& cfg)
{
    if (!(dt > 0.0))
        throw std::domain_error("disturb: dt must be positive");
    const double xi = rng.normal();
    const double hit = rng.uniform();
    const double mag = rng.uniform();
    const double sign = rng.uniform();

    const double phi = std::exp(-dt * 2.0 * M_PI * at(cfg.noise_corner_hz, stage));
    s.noise = phi * s.noise + std::sqrt(1.0 - phi * phi) * xi;
    s.d = at(cfg.noise_std, stage) * s.noise;

    if (stage == Stage::MeltDown && hit < cfg.cavein_rate * dt) {
        const double step = cfg.cavein_min + (cfg.cavein_max - cfg.cavein_min) * mag;
        s.bath_level += sign < 0.5 ? step : -step;
    }
    s.l_arc = std::max(0.0, s.h - s.bath_level + s.d);
    return s;
}

} // namespace eaf
