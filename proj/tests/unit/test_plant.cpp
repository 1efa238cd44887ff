#include "eaf/plant.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace eaf;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Analytic response of K/(Ts+1) to a held command from rest.
double v_exact(double k, double tau, double u, double t) { return k * u * (1.0 - std::exp(-t / tau)); }
double h_exact(double k, double tau, double u, double t)
{
    return k * u * (t - tau * (1.0 - std::exp(-t / tau)));
}

FurnaceConfig quiet()
{
    FurnaceConfig c;
    c.noise_std = {0.0, 0.0, 0.0};
    c.cavein_rate = 0.0;
    return c;
}

} // namespace

TEST_CASE("servo step response")
{
    PhaseState s;
    CHECK(servo_step(s, 0.0, 0.1, 15.0, 0.1).v == 0.0);
    s = servo_step(s, -1.0, 0.1, 15.0, 0.1);
    CHECK_THAT(s.v, WithinAbs(-9.482, 5e-4));

    PhaseState held;
    for (int k = 0; k < 100; ++k)
        held = servo_step(held, 1.0, 0.1, 15.0, 0.1);
    CHECK_THAT(held.v, WithinRel(15.0, 1e-9));
}

TEST_CASE("servo matches the analytic curve at T, 2T and 5T")
{
    for (double dt : {0.1, 0.001}) {
        PhaseState s;
        const auto n = static_cast<int>(std::llround(0.5 / dt));
        const int every = static_cast<int>(std::llround(0.1 / dt));
        for (int k = 1; k <= n; ++k) {
            s = servo_step(s, 1.0, dt, 15.0, 0.1);
            if (k == every || k == 2 * every || k == 5 * every) {
                const double t = k * dt;
                CHECK_THAT(s.v, WithinRel(v_exact(15.0, 0.1, 1.0, t), 0.01));
                CHECK_THAT(s.h, WithinRel(h_exact(15.0, 0.1, 1.0, t), 1e-9));
            }
        }
    }
}

TEST_CASE("servo at dt and dt/100 agree on a varying command")
{
    auto run = [](double dt) {
        PhaseState s;
        const auto n = static_cast<long>(std::llround(3.0 / dt));
        for (long k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * dt;
            s = servo_step(s, 2.0 * std::sin(2.0 * t), dt, 15.0, 0.1);
        }
        return s;
    };
    const PhaseState coarse = run(0.01), fine = run(1e-4);
    const PhaseState coarser = run(0.02);
    const double err = std::abs(coarse.h - fine.h), err2 = std::abs(coarser.h - fine.h);
    CHECK(err < 0.05 * std::abs(fine.h) + 0.2);
    CHECK(err < err2);
}

TEST_CASE("short circuit and no-strike limits")
{
    FurnaceConfig c;
    c.arc_v_offset = 0.0;
    const CircuitSolution sc = circuit_solve(c, 0.0);
    CHECK_THAT(sc.i, WithinRel(1000.0 * c.e2_nominal / std::hypot(c.r_short, c.x_react), 1e-12));

    const FurnaceConfig d;
    const CircuitSolution out = circuit_solve(d, 1000.0);
    CHECK_FALSE(out.arc);
    CHECK(out.i == 0.0);
    CHECK(std::isinf(out.z));
    CHECK_THROWS_AS(circuit_solve(d, -1.0), std::domain_error);
}

TEST_CASE("current falls and impedance rises with arc length")
{
    const FurnaceConfig c;
    for (Stage st : {Stage::MeltDown, Stage::Oxidation, Stage::Reduction}) {
        const double i10 = circuit_solve(c, 10.0, st).i;
        const double i50 = circuit_solve(c, 50.0, st).i;
        const double i100 = circuit_solve(c, 100.0, st).i;
        CHECK(i10 > i50);
        CHECK(i50 > i100);
        double z_prev = 0.0;
        for (double l = 0.0; l < 250.0; l += 0.5) {
            const CircuitSolution s = circuit_solve(c, l, st);
            if (!s.arc)
                break;
            CHECK(s.z > z_prev);
            z_prev = s.z;
            CHECK_THAT(s.z, WithinRel(1000.0 * s.e2 / s.i, 1e-9));
            // The phasor equation holds at the solution.
            const double lhs = std::pow(s.i * c.r_short / 1000.0 + s.u_arc, 2) + std::pow(s.i * c.x_react / 1000.0, 2);
            CHECK_THAT(lhs, WithinRel(s.e2 * s.e2, 1e-9));
        }
    }
}

TEST_CASE("arc length for a current inverts the circuit")
{
    const FurnaceConfig c;
    for (Stage st : {Stage::MeltDown, Stage::Oxidation, Stage::Reduction})
        for (double i : {8000.0, 15000.0, 25000.0, 31000.0}) {
            const double l = arc_length_for_current(c, i, st);
            CHECK_THAT(circuit_solve(c, l, st).i, WithinRel(i, 1e-9));
        }
    CHECK_THROWS_AS(arc_length_for_current(c, 45000.0, Stage::MeltDown), std::domain_error);
    CHECK_THROWS_AS(arc_length_for_current(c, 0.0, Stage::MeltDown), std::domain_error);
}

TEST_CASE("setpoint current is reachable with headroom below the low-voltage trip")
{
    const FurnaceConfig c;
    CHECK_THAT(c.z_set, WithinRel(1000.0 * c.e2_nominal / c.i_set, 1e-9));
    const double l = arc_length_for_current(c, c.i_set, Stage::MeltDown);
    CHECK(l > 50.0);
    const double i0 = circuit_solve(c, 0.0, Stage::MeltDown).i;
    CHECK(i0 > 1.25 * c.i_set);
}

TEST_CASE("disturbance off leaves the geometric gap")
{
    const FurnaceConfig c = quiet();
    PhaseRng rng(1, 0, 0);
    PhaseState s;
    s.h = 180.0;
    s.bath_level = 12.0;
    for (int k = 0; k < 1000; ++k) {
        s = disturb(s, static_cast<Stage>(k % 3), rng, 0.1, c);
        CHECK(s.l_arc == 168.0);
    }
    const double i = circuit_solve(c, s.l_arc).i;
    for (int k = 0; k < 100; ++k) {
        s = servo_step(s, 0.0, 0.1, c);
        s = disturb(s, Stage::MeltDown, rng, 0.1, c);
        CHECK(circuit_solve(c, s.l_arc).i == i);
    }
}

TEST_CASE("disturbance streams are reproducible and distinct per phase")
{
    const FurnaceConfig c;
    auto trace = [&](std::uint64_t seed, std::uint64_t phase) {
        PhaseRng rng(seed, 3, phase);
        PhaseState s;
        s.h = 200.0;
        std::vector<double> out;
        for (int k = 0; k < 5000; ++k) {
            s = disturb(s, Stage::MeltDown, rng, 0.1, c);
            out.push_back(s.l_arc);
        }
        return out;
    };
    CHECK(trace(7, 0) == trace(7, 0));
    CHECK(trace(7, 0) != trace(7, 1));
    CHECK(trace(7, 0) != trace(8, 0));
}

TEST_CASE("filtered noise has the configured spread")
{
    FurnaceConfig c = quiet();
    c.noise_std = {40.0, 20.0, 10.0};
    for (Stage st : {Stage::MeltDown, Stage::Oxidation, Stage::Reduction}) {
        PhaseRng rng(5, 0, 0);
        PhaseState s;
        double sum = 0.0, sq = 0.0;
        const int n = 400000;
        for (int k = 0; k < n; ++k) {
            s = disturb(s, st, rng, 0.1, c);
            sum += s.d;
            sq += s.d * s.d;
        }
        const double mean = sum / n;
        const double sd = std::sqrt(sq / n - mean * mean);
        CHECK_THAT(sd, WithinRel(at(c.noise_std, st), 0.1));
    }
}

TEST_CASE("cave-ins only shift the bath during melt-down")
{
    FurnaceConfig c = quiet();
    c.cavein_rate = 1.0;
    PhaseRng rng(2, 0, 0);
    PhaseState s;
    for (int k = 0; k < 1000; ++k)
        s = disturb(s, Stage::Oxidation, rng, 0.1, c);
    CHECK(s.bath_level == 0.0);
    int moves = 0;
    for (int k = 0; k < 1000; ++k) {
        const double before = s.bath_level;
        s = disturb(s, Stage::MeltDown, rng, 0.1, c);
        const double step = std::abs(s.bath_level - before);
        if (step > 0.0) {
            ++moves;
            CHECK(step >= 10.0);
            CHECK(step <= 30.0);
        }
    }
    CHECK(moves > 50);
    CHECK(moves < 150);
}

TEST_CASE("furnace config validation")
{
    FurnaceConfig c;
    CHECK_NOTHROW(c.validate());
    c.z_set = 10.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = FurnaceConfig{};
    c.e2_nominal = 400.0; // 693 V line
    c.z_set = 16.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = FurnaceConfig{};
    c.servo_tau = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
