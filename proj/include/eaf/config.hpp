#pragma once

#include "eaf/fuzzy.hpp"
#include "eaf/ga_tuner.hpp"
#include "eaf/pid.hpp"
#include "eaf/plant.hpp"
#include "eaf/stage_estimator.hpp"
#include "eaf/supervisor.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <array>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace eaf {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ControllerConfig {
    double n = 10.0;          // derivative filter ratio
    double delta_frac = 0.1;  // integral separation band as a fraction of the setpoint
    double u_limit = 2.5;     // V
};

/// Fixed gains of the two conventional modes. The current-mode error is in
/// amperes, the impedance-mode error in milliohm.
struct BaselineConfig {
    PidGains current{6.34e-4, 8.64e-7, 1.44e-6};
    PidGains impedance{1.321, 0.0018, 0.0030};
};

struct SimConfig {
    double time_cap_s = 3.0 * 3600.0;
    double q_end = 1.3;              // charge ends once q reaches this in the reducing period
    int telemetry_stride = 10;       // cycles between CSV rows
    int compare_charges = 20;
    double power_off_start_s = 0.0;  // optional power-off window
    double power_off_duration_s = 0.0;
};

/// Everything the tools read from one config file.
struct Config {
    FurnaceConfig plant;
    ProgressCoefficients progress;
    SafetyLimits safety; // i_set and x_react are taken from `plant`
    ControllerConfig controller;
    FuzzyRuleBank rules;
    BaselineConfig baseline;
    GaConfig ga;
    SimConfig sim;

    SafetyLimits safety_limits() const
    {
        SafetyLimits s = safety;
        s.i_set = plant.i_set;
        s.x_react = plant.x_react;
        return s;
    }

    void validate() const
    {
        plant.validate();
        safety_limits().validate();
        rules.validate();
        ga.validate();
        if (!(controller.n > 0.0) || !(controller.delta_frac >= 0.0) || !(controller.u_limit > 0.0))
            throw ConfigError("controller section: n and u_limit must be positive");
        if (!(sim.time_cap_s > 0.0) || !(sim.q_end >= 1.0) || sim.telemetry_stride < 1 || sim.compare_charges < 1)
            throw ConfigError("sim section: invalid run limits");
        if (!(sim.power_off_start_s >= 0.0) || !(sim.power_off_duration_s >= 0.0))
            throw ConfigError("sim section: power-off window must be non-negative");
    }
};

namespace detail {

using boost::property_tree::ptree;

inline std::string format_number(double v) { return fmt::format("{}", v); }

template <std::size_t N>
std::string format_list(const std::array<double, N>& v)
{
    std::string s;
    for (std::size_t k = 0; k < N; ++k) {
        if (k)
            s += ' ';
        s += format_number(v[k]);
    }
    return s;
}

inline double parse_number(const std::string& key, const std::string& text)
{
    std::istringstream in(text);
    in.imbue(std::locale::classic());
    double v = 0.0;
    if (!(in >> v))
        throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
    std::string rest;
    if (in >> rest)
        throw ConfigError("config key '" + key + "': trailing text '" + rest + "'");
    return v;
}

template <std::size_t N>
std::array<double, N> parse_list(const std::string& key, const std::string& text)
{
    std::istringstream in(text);
    in.imbue(std::locale::classic());
    std::array<double, N> out{};
    for (std::size_t k = 0; k < N; ++k)
        if (!(in >> out[k]))
            throw ConfigError(fmt::format("config key '{}': expected {} numbers", key, N));
    std::string rest;
    if (in >> rest)
        throw ConfigError(fmt::format("config key '{}': expected {} numbers", key, N));
    return out;
}

/// Binds each known "section.key" to a field; drives both reading and writing.
class Binder {
public:
    void number(const std::string& key, double& field)
    {
        entries_[key] = {[&field, key](const std::string& t) { field = parse_number(key, t); },
                         [&field] { return format_number(field); }};
    }
    void integer(const std::string& key, int& field)
    {
        entries_[key] = {[&field, key](const std::string& t) {
                             const double v = parse_number(key, t);
                             if (v != static_cast<double>(static_cast<int>(v)))
                                 throw ConfigError("config key '" + key + "': expected an integer");
                             field = static_cast<int>(v);
                         },
                         [&field] { return std::to_string(field); }};
    }
    void seed(const std::string& key, std::uint64_t& field)
    {
        entries_[key] = {[&field, key](const std::string& t) {
                             try {
                                 std::size_t used = 0;
                                 field = std::stoull(t, &used);
                                 if (used != t.size())
                                     throw ConfigError("config key '" + key + "': expected an unsigned integer");
                             } catch (const std::logic_error&) {
                                 throw ConfigError("config key '" + key + "': expected an unsigned integer");
                             }
                         },
                         [&field] { return std::to_string(field); }};
    }
    template <std::size_t N>
    void list(const std::string& key, std::array<double, N>& field)
    {
        entries_[key] = {[&field, key](const std::string& t) { field = parse_list<N>(key, t); },
                         [&field] { return format_list(field); }};
    }

    void read(const ptree& tree) const
    {
        for (const auto& [section, body] : tree) {
            if (body.empty() && !body.data().empty())
                throw ConfigError("config key '" + section + "' is outside any section");
            for (const auto& [key, value] : body) {
                const std::string full = section + "." + key;
                const auto it = entries_.find(full);
                if (it == entries_.end())
                    throw ConfigError("unknown config key '" + full + "'");
                it->second.set(value.get_value<std::string>());
            }
        }
    }

    ptree write(const std::string& only_section = {}) const
    {
        ptree tree;
        for (const auto& [key, e] : entries_) {
            const auto dot = key.find('.');
            const std::string section = key.substr(0, dot);
            if (!only_section.empty() && section != only_section)
                continue;
            auto it = tree.find(section);
            ptree& sec = it == tree.not_found() ? tree.push_back({section, ptree{}})->second : it->second;
            sec.push_back({key.substr(dot + 1), ptree(e.get())});
        }
        return tree;
    }

private:
    struct Entry {
        std::function<void(const std::string&)> set;
        std::function<std::string()> get;
    };
    std::map<std::string, Entry> entries_;
};

inline void bind_rules(Binder& b, FuzzyRuleBank& r)
{
    b.list("rules.p_peaks", r.p_peaks);
    b.list("rules.beta", r.beta);
    b.list("rules.y_peaks_meltdown", r.y_peaks[0]);
    b.list("rules.y_peaks_oxidation", r.y_peaks[1]);
    b.list("rules.y_peaks_reduction", r.y_peaks[2]);
    for (std::size_t i = 0; i < kProcessSets; ++i) {
        const std::string row = "P" + std::to_string(i + 1);
        b.list("rules.kp_" + row, r.kp[i]);
        b.list("rules.ki_" + row, r.ki[i]);
        b.list("rules.kd_" + row, r.kd[i]);
    }
}

inline void bind_all(Binder& b, Config& c)
{
    auto& p = c.plant;
    b.number("plant.servo_gain", p.servo_gain);
    b.number("plant.servo_tau", p.servo_tau);
    b.number("plant.e2_nominal", p.e2_nominal);
    b.number("plant.i_rated", p.i_rated);
    b.number("plant.i_set", p.i_set);
    b.number("plant.z_set", p.z_set);
    b.number("plant.x_react", p.x_react);
    b.number("plant.r_short", p.r_short);
    b.number("plant.arc_v_offset", p.arc_v_offset);
    b.number("plant.arc_v_per_mm", p.arc_v_per_mm);
    b.list("plant.arc_gradient_scale", p.arc_gradient_scale);
    b.number("plant.t_c", p.t_c);
    b.list("plant.noise_std", p.noise_std);
    b.list("plant.noise_corner_hz", p.noise_corner_hz);
    b.number("plant.cavein_rate", p.cavein_rate);
    b.number("plant.cavein_min", p.cavein_min);
    b.number("plant.cavein_max", p.cavein_max);
    b.number("plant.initial_gap", p.initial_gap);

    b.number("estimator.p_coeff_w", c.progress.p_w);
    b.number("estimator.p_coeff_t", c.progress.p_t);
    b.number("estimator.q_coeff_w", c.progress.q_w);
    b.number("estimator.q_coeff_t", c.progress.q_t);

    auto& s = c.safety;
    b.number("safety.i_noarc", s.i_noarc);
    b.number("safety.over_factor", s.over_factor);
    b.number("safety.danger_factor", s.danger_factor);
    b.number("safety.lowvolt_factor", s.lowvolt_factor);
    b.number("safety.stop_e_frac", s.stop_e_frac);
    b.number("safety.stop_s", s.stop_s);
    b.number("safety.v_down_fast", s.v_down_fast);
    b.number("safety.v_up_slow", s.v_up_slow);
    b.number("safety.v_up_fast", s.v_up_fast);
    b.number("safety.v_all_full", s.v_all_full);
    b.number("safety.t_over", s.t_over);
    b.number("safety.t_escalate", s.t_escalate);

    b.number("controller.n", c.controller.n);
    b.number("controller.delta_frac", c.controller.delta_frac);
    b.number("controller.u_limit", c.controller.u_limit);

    bind_rules(b, c.rules);

    b.number("baseline.current_kp", c.baseline.current.kp);
    b.number("baseline.current_ki", c.baseline.current.ki);
    b.number("baseline.current_kd", c.baseline.current.kd);
    b.number("baseline.impedance_kp", c.baseline.impedance.kp);
    b.number("baseline.impedance_ki", c.baseline.impedance.ki);
    b.number("baseline.impedance_kd", c.baseline.impedance.kd);

    auto& g = c.ga;
    b.integer("ga.population", g.population);
    b.integer("ga.generations", g.generations);
    b.number("ga.crossover_rate", g.crossover_rate);
    b.number("ga.mutation_rate", g.mutation_rate);
    b.number("ga.mutation_scale", g.mutation_scale);
    b.integer("ga.elite", g.elite);
    b.integer("ga.tournament", g.tournament);
    b.number("ga.blend_alpha", g.blend_alpha);
    b.seed("ga.seed", g.seed);
    b.number("ga.horizon", g.horizon);
    b.number("ga.kp_max", g.bounds.hi.kp);
    b.number("ga.ki_max", g.bounds.hi.ki);
    b.number("ga.kd_max", g.bounds.hi.kd);

    b.number("sim.time_cap_s", c.sim.time_cap_s);
    b.number("sim.q_end", c.sim.q_end);
    b.integer("sim.telemetry_stride", c.sim.telemetry_stride);
    b.integer("sim.compare_charges", c.sim.compare_charges);
    b.number("sim.power_off_start_s", c.sim.power_off_start_s);
    b.number("sim.power_off_duration_s", c.sim.power_off_duration_s);
}

inline ptree parse_ini(std::istream& in)
{
    ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config syntax: ") + e.what());
    }
    return tree;
}

} // namespace detail

/// Reads a config; keys not present keep their defaults. Unknown keys are rejected.
inline Config load_config(std::istream& in)
{
    Config c;
    detail::Binder b;
    detail::bind_all(b, c);
    b.read(detail::parse_ini(in));
    c.ga.t_c = c.plant.t_c;
    try {
        c.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return c;
}

inline void save_config(std::ostream& out, const Config& c)
{
    Config copy = c;
    detail::Binder b;
    detail::bind_all(b, copy);
    boost::property_tree::ini_parser::write_ini(out, b.write());
}

/// Reads a rule bank file ([rules] section only).
inline FuzzyRuleBank load_rule_bank(std::istream& in)
{
    FuzzyRuleBank bank;
    detail::Binder b;
    detail::bind_rules(b, bank);
    b.read(detail::parse_ini(in));
    try {
        bank.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return bank;
}

inline void save_rule_bank(std::ostream& out, const FuzzyRuleBank& bank)
{
    FuzzyRuleBank copy = bank;
    detail::Binder b;
    detail::bind_rules(b, copy);
    boost::property_tree::ini_parser::write_ini(out, b.write("rules"));
}

} // namespace eaf
