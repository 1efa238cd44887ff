#pragma once

#include "eaf/config.hpp"
#include "eaf/fuzzy.hpp"
#include "eaf/pid.hpp"
#include "eaf/plant.hpp"
#include "eaf/scaling.hpp"
#include "eaf/stage_estimator.hpp"
#include "eaf/supervisor.hpp"

#include <fmt/format.h>
#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eaf {

enum class Mode { CurrentPid, ImpedancePid, FuzzyNls };

inline constexpr std::array<Mode, 3> kAllModes{Mode::CurrentPid, Mode::ImpedancePid, Mode::FuzzyNls};

constexpr std::string_view to_string(Mode m) noexcept
{
    switch (m) {
    case Mode::CurrentPid: return "current-pid";
    case Mode::ImpedancePid: return "impedance-pid";
    case Mode::FuzzyNls: return "fuzzy-nls";
    }
    return "?";
}

/// Column letter used in the comparison table.
constexpr char column_letter(Mode m) noexcept
{
    switch (m) {
    case Mode::CurrentPid: return 'A';
    case Mode::ImpedancePid: return 'B';
    case Mode::FuzzyNls: return 'C';
    }
    return '?';
}

inline Mode parse_mode(std::string_view s)
{
    for (Mode m : kAllModes)
        if (s == to_string(m))
            return m;
    throw std::invalid_argument("unknown mode '" + std::string(s) + "'");
}

/// Running moments of the arc-current deviation i - i_set.
struct StageStats {
    std::size_t n = 0;
    double sum = 0.0;
    double sum_sq = 0.0;

    void add(double dev) noexcept
    {
        ++n;
        sum += dev;
        sum_sq += dev * dev;
    }
    void merge(const StageStats& o) noexcept
    {
        n += o.n;
        sum += o.sum;
        sum_sq += o.sum_sq;
    }
    double mean() const noexcept { return n ? sum / static_cast<double>(n) : 0.0; }
    double stddev() const noexcept
    {
        if (n == 0)
            return 0.0;
        const double m = mean();
        return std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - m * m));
    }
};

using StageStatsSet = std::array<StageStats, kStageCount>;

struct ChargeMetrics {
    int charge = 0;
    Mode mode = Mode::FuzzyNls;
    StageStatsSet stages{};
    std::size_t samples = 0;        // phase-cycles simulated
    std::size_t arc_on_samples = 0; // phase-cycles with arc_success set
    double meltdown_time_s = 0.0;   // time at which the melt-down period ended
    double duration_s = 0.0;
    double energy_kwh = 0.0;
    bool completed = false;          // reached the end-of-charge threshold before the cap
};

/// One phase, one cycle.
struct TelemetryRow {
    double t = 0.0;
    int phase = 0;
    std::string_view state;
    double u = 0.0;
    double h = 0.0;
    double v = 0.0;
    double l_arc = 0.0;
    double i = 0.0;
    double e2 = 0.0;
    double z = 0.0;
    double y = 0.0;
    double e = 0.0;
    PidGains gains;
    double p = 0.0;
    double q = 0.0;
    Stage stage = Stage::MeltDown;
};

inline constexpr std::string_view kTelemetryHeader = "t,phase,state,u,h,v,l_arc,i,e2,z,y,e,kp,ki,kd,p,q,stage";

/// CSV sink; writes every `stride`-th cycle.
class CsvTelemetry {
public:
    CsvTelemetry(std::ostream& out, int stride) : out_(out), stride_(stride < 1 ? 1 : stride)
    {
        out_ << kTelemetryHeader << '\n';
    }

    bool wants(long cycle) const noexcept { return cycle % stride_ == 0; }

    void operator()(const TelemetryRow& r)
    {
        buf_.clear();
        fmt::format_to(std::back_inserter(buf_), "{:.3f},{},{},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},"
                                                 "{:.6g},{:.6g},{:.6g},{:.6g},{:.6g},{}\n",
                       r.t, r.phase, r.state, r.u, r.h, r.v, r.l_arc, r.i, r.e2, r.z, r.y, r.e, r.gains.kp, r.gains.ki,
                       r.gains.kd, r.p, r.q, to_string(r.stage));
        out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    }

private:
    std::ostream& out_;
    int stride_;
    fmt::memory_buffer buf_;
};

/// Discards telemetry.
struct NullTelemetry {
    bool wants(long) const noexcept { return false; }
    void operator()(const TelemetryRow&) const noexcept {}
};

inline constexpr int kPhases = 3;

/// Fixed-gain regulation of the conventional modes: the error is the raw
/// current or impedance deviation, signed so that a positive value lifts.
inline RegulatorResult regulate_baseline(Mode mode, const Config& cfg, const Measurement& m, const PidState& pid)
{
    RegulatorResult r;
    r.pid = pid;
    PidParams prm{cfg.plant.t_c, 0.0, cfg.controller.n, cfg.controller.u_limit};
    PidGains gains;
    if (mode == Mode::CurrentPid) {
        r.error = m.i - cfg.plant.i_set;
        prm.delta = cfg.controller.delta_frac * cfg.plant.i_set;
        gains = cfg.baseline.current;
    } else {
        r.error = std::isfinite(m.z) ? cfg.plant.z_set - m.z : std::numeric_limits<double>::quiet_NaN();
        prm.delta = cfg.controller.delta_frac * cfg.plant.z_set;
        gains = cfg.baseline.impedance;
    }
    const PidStep st = pid_step(pid, gains, r.error, prm);
    r.action = st.fault ? Action::Fault : Action::Regulate;
    r.command = st.command;
    r.pid = st.state;
    return r;
}

inline bool power_on_at(const SimConfig& sim, double t) noexcept
{
    return !(sim.power_off_duration_s > 0.0 && t >= sim.power_off_start_s
             && t < sim.power_off_start_s + sim.power_off_duration_s);
}

/// Simulates one charge from power-on until the reducing period reaches
/// `sim.q_end` or the time cap. Each cycle: measure, estimate stage, form the
/// mode's error, supervise, actuate, disturb. Throws ConfigError when the
/// configuration is inconsistent.
template <class Sink>
ChargeMetrics run_charge(const Config& cfg, Mode mode, std::uint64_t seed, int charge, Sink&& sink)
{
    try {
        cfg.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    const FurnaceConfig& plant = cfg.plant;
    const SafetyLimits limits = cfg.safety_limits();
    const double t_c = plant.t_c;
    const PidParams scaled_prm{t_c, cfg.controller.delta_frac * plant.z_set, cfg.controller.n, cfg.controller.u_limit};

    std::array<PhaseState, kPhases> phases{};
    std::array<SupervisorState, kPhases> sup{};
    std::array<PidState, kPhases> pid{};
    std::vector<PhaseRng> rng;
    rng.reserve(kPhases);
    for (int ph = 0; ph < kPhases; ++ph) {
        phases[ph].h = plant.initial_gap;
        phases[ph].l_arc = plant.initial_gap;
        rng.emplace_back(seed, static_cast<std::uint64_t>(charge), static_cast<std::uint64_t>(ph));
    }

    MeltProgress progress;
    ChargeMetrics met;
    met.charge = charge;
    met.mode = mode;
    bool meltdown_done = false;

    const auto max_cycles = static_cast<long>(std::ceil(cfg.sim.time_cap_s / t_c));
    long k = 0;
    for (; k < max_cycles; ++k) {
        const double t = static_cast<double>(k) * t_c;
        const bool on = power_on_at(cfg.sim, t);
        const Stage stage = progress.stage;

        std::array<CircuitSolution, kPhases> circ{};
        std::array<SupervisorOutput, kPhases> out{};
        std::array<PidGains, kPhases> gains{};
        bool escalate = false;

        for (int ph = 0; ph < kPhases; ++ph) {
            if (!on) {
                circ[ph] = CircuitSolution{};
                sup[ph] = SupervisorState{};
                pid[ph] = reset(pid[ph]);
                out[ph] = SupervisorOutput{};
                out[ph].state = sup[ph];
                out[ph].pid = pid[ph];
                continue;
            }
            circ[ph] = circuit_solve(plant, phases[ph].l_arc, stage);
            const Measurement meas{circ[ph].i, circ[ph].e2, circ[ph].z};

            if (mode == Mode::FuzzyNls) {
                if (circ[ph].arc)
                    gains[ph] = infer_gains(cfg.rules, progress.p, std::abs(scaled_error(meas.z, plant.z_set)), stage);
                out[ph] = supervise(sup[ph], limits, meas, plant.z_set, pid[ph], gains[ph], scaled_prm, t);
            } else {
                gains[ph] = mode == Mode::CurrentPid ? cfg.baseline.current : cfg.baseline.impedance;
                out[ph] = supervise_with(sup[ph], limits, meas, pid[ph], t, [&](const PidState& p) {
                    return regulate_baseline(mode, cfg, meas, p);
                });
            }
            escalate = escalate || out[ph].escalate_all;
        }

        double p_total = 0.0;
        for (int ph = 0; ph < kPhases; ++ph) {
            double u = out[ph].command;
            if (escalate)
                u = limits.v_all_full;
            sup[ph] = out[ph].state;
            pid[ph] = out[ph].pid;

            ++met.samples;
            if (on && sup[ph].arc_success) {
                ++met.arc_on_samples;
                met.stages[static_cast<std::size_t>(stage)].add(circ[ph].i - plant.i_set);
            }

            if (sink.wants(k)) {
                TelemetryRow row;
                row.t = t;
                row.phase = ph + 1;
                row.state = on ? (escalate ? to_string(Action::Escalate) : to_string(out[ph].action))
                               : std::string_view("off");
                row.u = u;
                row.h = phases[ph].h;
                row.v = phases[ph].v;
                row.l_arc = phases[ph].l_arc;
                row.i = circ[ph].i;
                row.e2 = circ[ph].e2;
                row.z = circ[ph].z;
                row.y = circ[ph].arc ? scaled_variable(circ[ph].z, plant.z_set) : 0.0;
                row.e = out[ph].error;
                row.gains = gains[ph];
                row.p = progress.p;
                row.q = progress.q;
                row.stage = stage;
                sink(row);
            }

            p_total += circ[ph].p_active;
            phases[ph] = servo_step(phases[ph], u, t_c, plant);
            phases[ph] = disturb(phases[ph], stage, rng[ph], t_c, plant);
        }

        progress = accumulate(progress, p_total, on, t_c, cfg.progress);
        if (on)
            met.energy_kwh += p_total * t_c / 3600.0;
        if (!meltdown_done && progress.stage != Stage::MeltDown) {
            meltdown_done = true;
            met.meltdown_time_s = static_cast<double>(k + 1) * t_c;
        }
        if (progress.stage == Stage::Reduction && progress.q >= cfg.sim.q_end) {
            met.completed = true;
            ++k;
            break;
        }
    }
    met.duration_s = static_cast<double>(k) * t_c;
    return met;
}

inline ChargeMetrics run_charge(const Config& cfg, Mode mode, std::uint64_t seed, int charge)
{
    return run_charge(cfg, mode, seed, charge, NullTelemetry{});
}

struct RunReport {
    Mode mode = Mode::FuzzyNls;
    std::uint64_t seed = 0;
    std::vector<ChargeMetrics> charges;

    StageStatsSet pooled() const
    {
        StageStatsSet s{};
        for (const auto& c : charges)
            for (int k = 0; k < kStageCount; ++k)
                s[k].merge(c.stages[k]);
        return s;
    }
};

/// Runs `charges` charges of one mode with common seeds. When `out_dir` is
/// set, writes one CSV per charge named by `prefix`.
inline RunReport run_mode(const Config& cfg, Mode mode, std::uint64_t seed, int charges,
                          const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                          const std::string& prefix = "charge")
{
    if (charges < 1)
        throw std::invalid_argument("run_mode: at least one charge is required");
    RunReport rep;
    rep.mode = mode;
    rep.seed = seed;
    for (int c = 0; c < charges; ++c) {
        if (out_dir) {
            const auto path = *out_dir / fmt::format("{}_{:03d}.csv", prefix, c);
            std::ofstream f(path, std::ios::binary);
            if (!f)
                throw std::runtime_error("cannot write " + path.string());
            CsvTelemetry sink(f, cfg.sim.telemetry_stride);
            rep.charges.push_back(run_charge(cfg, mode, seed, c, sink));
        } else {
            rep.charges.push_back(run_charge(cfg, mode, seed, c));
        }
    }
    return rep;
}

inline nlohmann::ordered_json stage_json(const StageStats& s)
{
    return {{"samples", s.n}, {"static_error_a", s.mean()}, {"std_a", s.stddev()}};
}

inline nlohmann::ordered_json to_json(const RunReport& r)
{
    nlohmann::ordered_json j;
    j["mode"] = std::string(to_string(r.mode));
    j["seed"] = r.seed;
    auto stages = [](const StageStatsSet& s) {
        nlohmann::ordered_json o;
        for (int k = 0; k < kStageCount; ++k)
            o[std::string(to_string(static_cast<Stage>(k)))] = stage_json(s[k]);
        return o;
    };
    j["pooled"] = stages(r.pooled());
    auto& arr = j["charges"] = nlohmann::ordered_json::array();
    for (const auto& c : r.charges) {
        arr.push_back({{"charge", c.charge},
                       {"completed", c.completed},
                       {"duration_s", c.duration_s},
                       {"meltdown_time_s", c.meltdown_time_s},
                       {"energy_kwh", c.energy_kwh},
                       {"samples", c.samples},
                       {"arc_on_samples", c.arc_on_samples},
                       {"stages", stages(c.stages)}});
    }
    return j;
}

struct Comparison {
    std::array<RunReport, 3> runs; // indexed like kAllModes

    const RunReport& operator[](Mode m) const { return runs[static_cast<std::size_t>(m)]; }
};

/// Runs all three modes on identical seeds and plant.
inline Comparison compare(const Config& cfg, std::uint64_t seed, int charges,
                          const std::optional<std::filesystem::path>& out_dir = std::nullopt)
{
    Comparison c;
    for (Mode m : kAllModes)
        c.runs[static_cast<std::size_t>(m)] = run_mode(cfg, m, seed, charges, out_dir, std::string(to_string(m)));
    return c;
}

/// Three-mode, three-stage table of static error and standard deviation of the arc current.
inline std::string format_comparison(const Comparison& c)
{
    std::string s;
    auto out = std::back_inserter(s);
    fmt::format_to(out, "{:<44}{:>10}{:>10}{:>10}\n", "evaluation criterion", "A", "B", "C");
    const char* stage_names[] = {"melting-down stage", "oxidation stage", "reduction stage"};
    std::array<StageStatsSet, 3> pooled{};
    for (Mode m : kAllModes)
        pooled[static_cast<std::size_t>(m)] = c[m].pooled();
    auto block = [&](const char* title, auto value) {
        fmt::format_to(out, "{}\n", title);
        for (int k = 0; k < kStageCount; ++k) {
            fmt::format_to(out, "  {:<42}", stage_names[k]);
            for (std::size_t m = 0; m < 3; ++m)
                fmt::format_to(out, "{:>10.0f}", value(pooled[m][k]));
            fmt::format_to(out, "\n");
        }
    };
    block("Static error of the arc current (A)", [](const StageStats& x) { return x.mean(); });
    block("Standard deviation of the arc current (A)", [](const StageStats& x) { return x.stddev(); });
    fmt::format_to(out, "A: {}, B: {}, C: {}\n", to_string(Mode::CurrentPid), to_string(Mode::ImpedancePid),
                   to_string(Mode::FuzzyNls));
    return s;
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + path.string());
    f << text;
}

/// Scales the per-stage noise so that impedance-mode current fluctuation
/// matches `target_std` [A]. Fixed-point iteration on std ~ noise.
inline StageValues calibrate_noise(Config cfg, std::uint64_t seed, int charges, const StageValues& target_std,
                                   int iterations = 8)
{
    for (int it = 0; it < iterations; ++it) {
        const auto pooled = run_mode(cfg, Mode::ImpedancePid, seed, charges).pooled();
        for (int k = 0; k < kStageCount; ++k) {
            const double got = pooled[k].stddev();
            if (got > 0.0)
                cfg.plant.noise_std[k] *= std::pow(target_std[k] / got, 0.8);
        }
    }
    return cfg.plant.noise_std;
}

} // namespace eaf
