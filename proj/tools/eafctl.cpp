// eafctl: run simulated charges, the three-mode comparison, and GA tuning.

#include "eaf/config.hpp"
#include "eaf/ga_tuner.hpp"
#include "eaf/harness.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;

namespace {

eaf::Config read_config(const std::string& path, const std::string& rules_path)
{
    eaf::Config cfg;
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f)
            throw eaf::ConfigError("cannot open config file " + path);
        cfg = eaf::load_config(f);
    }
    if (!rules_path.empty()) {
        std::ifstream f(rules_path);
        if (!f)
            throw eaf::ConfigError("cannot open rule bank " + rules_path);
        cfg.rules = eaf::load_rule_bank(f);
    }
    return cfg;
}

void ensure_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Electrode position control simulator for UHP arc furnaces"};
    app.require_subcommand(1);

    std::string config_path;
    std::string rules_path;
    std::string out;
    std::string mode_name = "fuzzy-nls";
    std::uint64_t seed = 42;
    int charges = 1;

    auto* sim = app.add_subcommand("simulate", "Simulate charges under one controller mode");
    sim->add_option("--mode", mode_name, "current-pid | impedance-pid | fuzzy-nls")
        ->check(CLI::IsMember({"current-pid", "impedance-pid", "fuzzy-nls"}));
    sim->add_option("--charges", charges, "Number of charges")->check(CLI::PositiveNumber);
    sim->add_option("--seed", seed, "Disturbance seed");
    sim->add_option("--config", config_path, "Config file (INI)");
    sim->add_option("--rules", rules_path, "Rule bank file overriding the config's [rules]");
    sim->add_option("--out", out, "Output directory")->required();

    std::optional<int> compare_charges;
    auto* cmp = app.add_subcommand("compare", "Run modes A, B and C on common seeds");
    cmp->add_option("--seed", seed, "Disturbance seed");
    cmp->add_option("--config", config_path, "Config file (INI)");
    cmp->add_option("--rules", rules_path, "Rule bank file overriding the config's [rules]");
    cmp->add_option("--charges", compare_charges, "Charges per mode (default: sim.compare_charges)")
        ->check(CLI::PositiveNumber);
    cmp->add_option("--out", out, "Output directory")->required();

    auto* tune = app.add_subcommand("tune", "GA-tune the 15 rule singletons on local linear models");
    tune->add_option("--config", config_path, "Config file (INI)");
    tune->add_option("--out", out, "Rule bank file to write")->required();

    int iterations = 8;
    auto* cal = app.add_subcommand("calibrate", "Fit per-stage noise to impedance-mode fluctuation targets");
    cal->add_option("--config", config_path, "Config file (INI)");
    cal->add_option("--seed", seed, "Disturbance seed");
    cal->add_option("--charges", charges, "Charges per iteration")->check(CLI::PositiveNumber);
    cal->add_option("--iterations", iterations, "Fixed-point iterations")->check(CLI::PositiveNumber);

    auto* dump = app.add_subcommand("dump-config", "Write the effective configuration");
    dump->add_option("--config", config_path, "Config file (INI)");
    dump->add_option("--out", out, "Output file (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) {
            const eaf::Config cfg = read_config(config_path, rules_path);
            const eaf::Mode mode = eaf::parse_mode(mode_name);
            ensure_dir(out);
            const eaf::RunReport rep = eaf::run_mode(cfg, mode, seed, charges, fs::path(out));
            eaf::write_text(fs::path(out) / "report.json", eaf::to_json(rep).dump(2) + "\n");
            for (const auto& c : rep.charges)
                fmt::print("charge {:3d}: {} after {:.1f} min, melt-down {:.1f} min, {:.0f} kWh\n", c.charge,
                           c.completed ? "complete" : "capped", c.duration_s / 60.0, c.meltdown_time_s / 60.0,
                           c.energy_kwh);
        } else if (*cmp) {
            const eaf::Config cfg = read_config(config_path, rules_path);
            const int n = compare_charges.value_or(cfg.sim.compare_charges);
            ensure_dir(out);
            const eaf::Comparison c = eaf::compare(cfg, seed, n, fs::path(out));
            nlohmann::ordered_json j;
            j["seed"] = seed;
            j["charges"] = n;
            for (eaf::Mode m : eaf::kAllModes)
                j["modes"][std::string(eaf::to_string(m))] = eaf::to_json(c[m]);
            eaf::write_text(fs::path(out) / "report.json", j.dump(2) + "\n");
            const std::string table = eaf::format_comparison(c);
            eaf::write_text(fs::path(out) / "comparison.txt", table);
            fmt::print("{}", table);
        } else if (*tune) {
            const eaf::Config cfg = read_config(config_path, rules_path);
            eaf::LinearizeOptions lin;
            lin.delta = cfg.controller.delta_frac * cfg.plant.z_set;
            lin.n = cfg.controller.n;
            const eaf::TuneReport rep = eaf::tune_rule_bank(cfg.plant, cfg.rules, cfg.ga, lin);
            std::ofstream f(out);
            if (!f)
                throw std::runtime_error("cannot write " + out);
            eaf::save_rule_bank(f, rep.bank);
            for (std::size_t i = 0; i < eaf::kProcessSets; ++i)
                for (std::size_t j = 0; j < eaf::kErrorSets; ++j)
                    fmt::print("P{} Y{}: kp={:.4g} ki={:.4g} kd={:.4g} ISE={:.4g} (loop gain {:.4g})\n", i + 1, j + 1,
                               rep.bank.kp[i][j], rep.bank.ki[i][j], rep.bank.kd[i][j], rep.ise[i][j],
                               rep.models[i][j].loop_gain);
        } else if (*cal) {
            const eaf::Config cfg = read_config(config_path, rules_path);
            const eaf::StageValues target{4500.0, 3900.0, 3400.0};
            const auto fitted = eaf::calibrate_noise(cfg, seed, charges, target, iterations);
            fmt::print("noise_std = {} {} {}\n", fitted[0], fitted[1], fitted[2]);
        } else if (*dump) {
            const eaf::Config cfg = read_config(config_path, rules_path);
            if (out.empty()) {
                eaf::save_config(std::cout, cfg);
            } else {
                std::ofstream f(out);
                if (!f)
                    throw std::runtime_error("cannot write " + out);
                eaf::save_config(f, cfg);
            }
        }
    } catch (const eaf::ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
