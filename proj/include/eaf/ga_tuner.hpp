#pragma once

#include "eaf/fuzzy.hpp"
#include "eaf/pid.hpp"
#include "eaf/plant.hpp"
#include "eaf/scaling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace eaf {

/// Linearised electrode-lifting loop around one rule's operating point.
///
/// The error obeys e(t) = e_step - gain * integral(w), where w is the servo
/// velocity in error units. The sign is folded so that a positive command
/// reduces a positive error.
struct LocalLinearModel {
    Stage stage = Stage::MeltDown;
    double p_point = 0.0;
    double e_point = 0.0;      // mOhm, error magnitude of the operating point and step size
    double arc_length = 0.0;   // mm, where the circuit was linearised
    double dy_dh = 0.0;        // mOhm/mm, circuit sensitivity after sign folding
    double loop_gain = 0.0;    // mOhm/(V s) = servo K * dy_dh
    double tau = 0.1;          // s, servo lag
    int delay = 0;             // cycles of transport delay
    double delta = 0.0;        // integral separation band, mOhm
    double u_limit = std::numeric_limits<double>::infinity(); // V, unlimited in the linear model
    double n = 10.0;
};

struct LinearizeOptions {
    double fd_step = 1e-3;  // mm, central-difference half-width
    double delta = 1.2;     // mOhm, integral separation band used in the fitness
    double u_limit = std::numeric_limits<double>::infinity();
    double n = 10.0;
    int delay = 0;
};

/// Scaled variable seen at arc length `l` in `stage`.
inline double scaled_variable_at(const FurnaceConfig& cfg, double l, Stage stage)
{
    const CircuitSolution c = circuit_solve(cfg, l, stage);
    if (!c.arc)
        throw std::domain_error("scaled_variable_at: no arc at this length");
    return scaled_variable(c.z, cfg.z_set);
}

/// Linearises at the long-arc point where y = y_set - e_point, i.e. where an
/// error of the rule's magnitude is reached. That side of the characteristic
/// exists for every e_point < z_set; the short-arc side runs into the
/// zero-length current for the larger melt-down magnitudes.
inline LocalLinearModel linearize(const FurnaceConfig& cfg, Stage stage, double p_point, double e_point,
                                  const LinearizeOptions& opt = {})
{
    if (!(e_point >= 0.0) || !(e_point < cfg.z_set))
        throw std::domain_error("linearize: operating point puts the arc out");
    const double y = cfg.z_set - e_point;
    const double i = 1000.0 * cfg.e2_nominal * y / (cfg.z_set * cfg.z_set);
    const double l = arc_length_for_current(cfg, i, stage);

    const double hstep = std::min(opt.fd_step, 0.5 * l > 0.0 ? 0.5 * l : opt.fd_step);
    const double lo = std::max(0.0, l - hstep);
    const double hi = l + hstep;
    const CircuitSolution c_hi = circuit_solve(cfg, hi, stage);
    if (!c_hi.arc)
        throw std::domain_error("linearize: operating point puts the arc out");
    const double slope = (scaled_variable_at(cfg, hi, stage) - scaled_variable_at(cfg, lo, stage)) / (hi - lo);

    LocalLinearModel m;
    m.stage = stage;
    m.p_point = p_point;
    m.e_point = e_point;
    m.arc_length = l;
    m.dy_dh = -slope;
    m.loop_gain = cfg.servo_gain * m.dy_dh;
    m.tau = cfg.servo_tau;
    m.delay = opt.delay;
    m.delta = opt.delta;
    m.u_limit = opt.u_limit;
    m.n = opt.n;
    return m;
}

/// Large finite fitness assigned to diverging responses. Any response that
/// stays within the divergence bound scores below it.
inline double ise_penalty(const LocalLinearModel& m, double horizon)
{
    return 1e6 * m.e_point * m.e_point * horizon;
}

inline constexpr double kDivergenceFactor = 100.0;

/// Integral of squared error for a setpoint step of size e_point, under the
/// full separated-integral, filtered-derivative controller.
inline double ise(const LocalLinearModel& m, const PidGains& gains, double horizon, double t_c)
{
    if (!(t_c > 0.0) || !(horizon >= t_c))
        throw std::domain_error("ise: horizon must cover at least one cycle");
    const auto steps = static_cast<long>(std::llround(horizon / t_c));
    const double a = std::exp(-t_c / m.tau);
    const PidParams prm{t_c, m.delta, m.n, m.u_limit};
    const double bound = kDivergenceFactor * std::max(m.e_point, 1e-12);

    PidState pid;
    std::deque<double> pipe(static_cast<std::size_t>(std::max(0, m.delay)), 0.0);
    double e = m.e_point;
    double w = 0.0; // servo velocity in error units per second
    double acc = 0.0;
    for (long k = 0; k < steps; ++k) {
        acc += e * e * t_c;
        const PidStep st = pid_step(pid, gains, e, prm);
        pid = st.state;
        double u = st.command;
        if (!pipe.empty()) {
            pipe.push_back(u);
            u = pipe.front();
            pipe.pop_front();
        }
        const double target = m.loop_gain * u;
        e -= target * t_c + (w - target) * m.tau * (1.0 - a);
        w = target + (w - target) * a;
        if (!std::isfinite(e) || std::abs(e) > bound)
            return ise_penalty(m, horizon);
    }
    return acc;
}

struct GeneBounds {
    PidGains lo{};
    PidGains hi{};
};

/// Bounds [0, 4 * max(table)] per gain, so the shipped singletons are interior points.
inline GeneBounds default_bounds(const FuzzyRuleBank& bank)
{
    auto max_of = [](const GainTable& t) {
        double m = 0.0;
        for (const auto& row : t)
            for (double g : row)
                m = std::max(m, g);
        return m;
    };
    return {{0.0, 0.0, 0.0}, {4.0 * max_of(bank.kp), 4.0 * max_of(bank.ki), 4.0 * max_of(bank.kd)}};
}

struct GaConfig {
    int population = 40;
    int generations = 60;
    double crossover_rate = 0.9;
    double mutation_rate = 0.2;
    double mutation_scale = 0.1; // fraction of the gene range
    int elite = 2;
    int tournament = 3;
    double blend_alpha = 0.5;
    std::uint64_t seed = 1;
    double horizon = 20.0; // s
    double t_c = 0.1;      // s
    GeneBounds bounds = default_bounds(FuzzyRuleBank{});

    void validate() const
    {
        if (population < 2 || generations < 0 || elite < 0 || elite >= population || tournament < 1)
            throw std::invalid_argument("ga config: population, elite and tournament sizes are inconsistent");
        for (double r : {crossover_rate, mutation_rate})
            if (!(r >= 0.0 && r <= 1.0))
                throw std::invalid_argument("ga config: rates must lie in [0, 1]");
        if (!(mutation_scale >= 0.0) || !(blend_alpha >= 0.0))
            throw std::invalid_argument("ga config: mutation scale and blend alpha must be non-negative");
        if (!(bounds.lo.kp >= 0.0 && bounds.lo.ki >= 0.0 && bounds.lo.kd >= 0.0))
            throw std::invalid_argument("ga config: gene bounds must be non-negative");
        if (!(bounds.hi.kp > bounds.lo.kp && bounds.hi.ki > bounds.lo.ki && bounds.hi.kd > bounds.lo.kd))
            throw std::invalid_argument("ga config: gene bounds must be positive intervals");
        if (!(t_c > 0.0) || !(horizon >= t_c))
            throw std::invalid_argument("ga config: horizon must cover at least one cycle");
    }
};

struct GaResult {
    PidGains gains;
    double ise = 0.0;
    std::vector<double> best_per_generation; // index 0 is the initial population
    std::vector<double> initial_population;  // fitness of every initial individual
};

namespace detail {

using Genome = std::array<double, 3>;

inline Genome to_genome(const PidGains& g) { return {g.kp, g.ki, g.kd}; }
inline PidGains to_gains(const Genome& x) { return {x[0], x[1], x[2]}; }

/// Stream for one individual of one generation, split off the master seed.
inline std::mt19937_64 individual_stream(std::uint64_t seed, int generation, int index)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(generation), static_cast<std::uint32_t>(index), 0x6741u};
    return std::mt19937_64(seq);
}

} // namespace detail

/// Real-coded GA over (kp, ki, kd): tournament selection, blend crossover,
/// Gaussian mutation with clipping and elitism. Each child is bred from its
/// own stream, so the result does not depend on evaluation order.
inline GaResult evolve(const GaConfig& cfg, const LocalLinearModel& model)
{
    cfg.validate();
    using detail::Genome;
    const Genome lo = detail::to_genome(cfg.bounds.lo);
    const Genome hi = detail::to_genome(cfg.bounds.hi);
    const auto fitness = [&](const Genome& x) { return ise(model, detail::to_gains(x), cfg.horizon, cfg.t_c); };

    const auto pop_size = static_cast<std::size_t>(cfg.population);
    std::vector<Genome> pop(pop_size);
    std::vector<double> fit(pop_size);
    for (std::size_t n = 0; n < pop_size; ++n) {
        auto rng = detail::individual_stream(cfg.seed, 0, static_cast<int>(n));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (std::size_t g = 0; g < 3; ++g)
            pop[n][g] = lo[g] + (hi[g] - lo[g]) * unit(rng);
        fit[n] = fitness(pop[n]);
    }

    GaResult res;
    res.initial_population = fit;
    auto best_idx = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
    Genome best = pop[best_idx];
    double best_fit = fit[best_idx];
    res.best_per_generation.push_back(best_fit);

    std::vector<std::size_t> order(pop_size);
    for (int gen = 1; gen <= cfg.generations; ++gen) {
        for (std::size_t n = 0; n < pop_size; ++n)
            order[n] = n;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });

        std::vector<Genome> next(pop_size);
        std::vector<double> next_fit(pop_size);
        const auto elite = static_cast<std::size_t>(cfg.elite);
        for (std::size_t n = 0; n < elite; ++n) {
            next[n] = pop[order[n]];
            next_fit[n] = fit[order[n]];
        }
        for (std::size_t n = elite; n < pop_size; ++n) {
            auto rng = detail::individual_stream(cfg.seed, gen, static_cast<int>(n));
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::uniform_int_distribution<std::size_t> pick(0, pop_size - 1);
            std::normal_distribution<double> gauss(0.0, 1.0);

            auto tournament = [&] {
                std::size_t w = pick(rng);
                for (int t = 1; t < cfg.tournament; ++t) {
                    const std::size_t c = pick(rng);
                    if (fit[c] < fit[w])
                        w = c;
                }
                return w;
            };
            const Genome& a = pop[tournament()];
            const Genome& b = pop[tournament()];

            Genome child = a;
            const bool cross = unit(rng) < cfg.crossover_rate;
            for (std::size_t g = 0; g < 3; ++g) {
                const double r = unit(rng);
                const double m = gauss(rng);
                const double mut = unit(rng);
                if (cross) {
                    const double cmin = std::min(a[g], b[g]);
                    const double span = std::abs(a[g] - b[g]);
                    const double l = cmin - cfg.blend_alpha * span;
                    child[g] = l + r * (span * (1.0 + 2.0 * cfg.blend_alpha));
                }
                if (mut < cfg.mutation_rate)
                    child[g] += m * cfg.mutation_scale * (hi[g] - lo[g]);
                child[g] = std::clamp(child[g], lo[g], hi[g]);
            }
            next[n] = child;
            next_fit[n] = fitness(child);
        }
        pop.swap(next);
        fit.swap(next_fit);
        best_idx = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
        if (fit[best_idx] < best_fit) {
            best_fit = fit[best_idx];
            best = pop[best_idx];
        }
        res.best_per_generation.push_back(best_fit);
    }
    res.gains = detail::to_gains(best);
    res.ise = best_fit;
    return res;
}

/// Stage associated with each process-variable set.
inline constexpr std::array<Stage, kProcessSets> kProcessSetStage{
    Stage::MeltDown, Stage::MeltDown, Stage::MeltDown, Stage::Oxidation, Stage::Reduction};

struct TuneReport {
    FuzzyRuleBank bank;
    std::array<std::array<LocalLinearModel, kErrorSets>, kProcessSets> models{};
    std::array<std::array<double, kErrorSets>, kProcessSets> ise{};
};

/// Re-derives all 15 singleton triples, one GA run per rule's local model.
/// Premise partitions are carried over from `base`.
inline TuneReport tune_rule_bank(const FurnaceConfig& plant, const FuzzyRuleBank& base, const GaConfig& ga,
                                 const LinearizeOptions& lin)
{
    TuneReport rep;
    rep.bank = base;
    for (std::size_t i = 0; i < kProcessSets; ++i) {
        const Stage st = kProcessSetStage[i];
        for (std::size_t j = 0; j < kErrorSets; ++j) {
            const double e_pt = base.y_peaks[static_cast<std::size_t>(st)][j];
            const LocalLinearModel m = linearize(plant, st, base.p_peaks[i], e_pt, lin);
            GaConfig local = ga;
            local.seed = ga.seed + 1000 * i + j;
            const GaResult r = evolve(local, m);
            rep.models[i][j] = m;
            rep.ise[i][j] = r.ise;
            rep.bank.kp[i][j] = r.gains.kp;
            rep.bank.ki[i][j] = r.gains.ki;
            rep.bank.kd[i][j] = r.gains.kd;
        }
    }
    return rep;
}

} // namespace eaf
