#include "eaf/ga_tuner.hpp"

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

using namespace eaf;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// d y / d h from implicit differentiation of the phasor equation.
double analytic_dy_dh(const FurnaceConfig& c, double l, Stage st)
{
    const CircuitSolution s = circuit_solve(c, l, st);
    const double r = c.r_short / 1000.0, x = c.x_react / 1000.0;
    const double g = s.i * r + s.u_arc;
    const double dF_di = 2.0 * g * r + 2.0 * s.i * x * x;
    const double dF_du = 2.0 * g;
    const double du_dl = c.arc_v_per_mm * at(c.arc_gradient_scale, st);
    const double di_dl = -dF_du * du_dl / dF_di;
    const double dy_di = c.z_set * c.z_set / (1000.0 * c.e2_nominal);
    return -dy_di * di_dl;
}

GaConfig small_ga()
{
    GaConfig g;
    g.population = 30;
    g.generations = 40;
    return g;
}

} // namespace

TEST_CASE("linearised gain matches the chain rule")
{
    const FurnaceConfig c;
    for (Stage st : {Stage::MeltDown, Stage::Oxidation, Stage::Reduction})
        for (double e : {2.0, 4.0, 6.0, 9.0}) {
            const LocalLinearModel m = linearize(c, st, 0.5, e);
            CHECK(m.dy_dh > 0.0);
            CHECK(m.loop_gain > 0.0);
            CHECK_THAT(m.dy_dh, WithinRel(analytic_dy_dh(c, m.arc_length, st), 1e-4));
            CHECK_THAT(m.loop_gain, WithinRel(15.0 * m.dy_dh, 1e-12));
            CHECK_THAT(scaled_variable_at(c, m.arc_length, st), WithinRel(c.z_set - e, 1e-9));
        }
}

TEST_CASE("doubling the column gradient doubles the sensitivity")
{
    const FurnaceConfig c;
    FurnaceConfig d = c;
    d.arc_v_per_mm *= 2.0;
    for (double e : {2.0, 6.0}) {
        const LocalLinearModel a = linearize(c, Stage::MeltDown, 0.2, e);
        const LocalLinearModel b = linearize(d, Stage::MeltDown, 0.2, e);
        CHECK_THAT(b.dy_dh, WithinRel(2.0 * a.dy_dh, 1e-6));
        CHECK_THAT(b.arc_length, WithinRel(0.5 * a.arc_length, 1e-9));
    }
}

TEST_CASE("linearisation rejects points without an arc")
{
    const FurnaceConfig c;
    CHECK_THROWS_AS(linearize(c, Stage::MeltDown, 0.2, c.z_set), std::domain_error);
    CHECK_THROWS_AS(linearize(c, Stage::MeltDown, 0.2, -1.0), std::domain_error);
}

TEST_CASE("open loop ISE")
{
    const LocalLinearModel m = linearize(FurnaceConfig{}, Stage::MeltDown, 0.2, 3.0);
    CHECK_THAT(ise(m, {}, 20.0, 0.1), WithinRel(9.0 * 20.0, 1e-12));
}

TEST_CASE("ISE falls as proportional gain rises from zero")
{
    const LocalLinearModel m = linearize(FurnaceConfig{}, Stage::Oxidation, 1.2, 4.8);
    double prev = ise(m, {}, 20.0, 0.1);
    for (int k = 1; k <= 20; ++k) {
        const double j = ise(m, {0.02 * k, 0.0, 0.0}, 20.0, 0.1);
        CHECK(j < prev);
        prev = j;
    }
}

TEST_CASE("proportional control of a lag-free integrator matches the exponential ISE")
{
    LocalLinearModel m;
    m.e_point = 2.0;
    m.loop_gain = 4.0;
    m.tau = 1e-6;
    m.delta = 0.0;
    m.u_limit = 1e9;
    const double kp = 0.5; // closed-loop time constant 1 / (g kp) = 0.5 s
    const double tc = 1.0 / (m.loop_gain * kp);
    const double j = ise(m, {kp, 0.0, 0.0}, 20.0, 1e-3);
    CHECK_THAT(j, WithinRel(m.e_point * m.e_point * tc / 2.0, 0.01));
}

TEST_CASE("diverging responses take the penalty, which every bounded response beats")
{
    LocalLinearModel m = linearize(FurnaceConfig{}, Stage::MeltDown, 0.2, 3.0);
    m.u_limit = 1e9;
    m.delay = 3;
    const double bad = ise(m, {48.0, 0.4, 0.0}, 20.0, 0.1);
    CHECK(bad == ise_penalty(m, 20.0));
    const double good = ise(m, {1.0, 0.0, 0.0}, 20.0, 0.1);
    CHECK(good < bad);
    CHECK(std::isfinite(ise(m, {1e300, 0.0, 0.0}, 20.0, 0.1)));
}

TEST_CASE("GA is deterministic and elitist")
{
    const LocalLinearModel m = linearize(FurnaceConfig{}, Stage::MeltDown, 0.5, 6.0);
    const GaConfig g = small_ga();
    const GaResult a = evolve(g, m);
    const GaResult b = evolve(g, m);
    CHECK(a.gains == b.gains);
    CHECK(a.ise == b.ise);
    CHECK(a.ise <= *std::min_element(a.initial_population.begin(), a.initial_population.end()));
    for (std::size_t k = 1; k < a.best_per_generation.size(); ++k)
        CHECK(a.best_per_generation[k] <= a.best_per_generation[k - 1]);
    CHECK(a.ise == a.best_per_generation.back());
    CHECK(a.gains.kp <= g.bounds.hi.kp);
    CHECK(a.gains.kd >= 0.0);

    GaConfig other = g;
    other.seed = 99;
    CHECK_FALSE(evolve(other, m).gains == a.gains);
}

TEST_CASE("GA lands close to a grid search")
{
    const LocalLinearModel m = linearize(FurnaceConfig{}, Stage::Reduction, 1.8, 4.0);
    const GaConfig g;
    const GaResult r = evolve(g, m);
    double grid = INFINITY;
    const int n = 12;
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) {
                const PidGains x{g.bounds.hi.kp * a / (n - 1), g.bounds.hi.ki * b / (n - 1),
                                 g.bounds.hi.kd * c / (n - 1)};
                grid = std::min(grid, ise(m, x, g.horizon, g.t_c));
            }
    CHECK(r.ise <= 1.05 * grid);
}

TEST_CASE("GA config validation")
{
    GaConfig g;
    CHECK_NOTHROW(g.validate());
    g.elite = g.population;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = GaConfig{};
    g.mutation_rate = 1.5;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    g = GaConfig{};
    g.bounds.hi.ki = 0.0;
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
}

TEST_CASE("tuned bank keeps the growth of kp toward the later periods")
{
    GaConfig g = small_ga();
    LinearizeOptions lin;
    const TuneReport rep = tune_rule_bank(FurnaceConfig{}, FuzzyRuleBank{}, g, lin);
    CHECK_NOTHROW(rep.bank.validate());
    CHECK(rep.bank.p_peaks == FuzzyRuleBank{}.p_peaks);
    for (std::size_t j = 0; j < kErrorSets; ++j) {
        CHECK(rep.bank.kp[4][j] > rep.bank.kp[3][j]);
        CHECK(rep.bank.kp[3][j] > rep.bank.kp[2][j]);
    }
    for (std::size_t i = 0; i < kProcessSets; ++i)
        for (std::size_t j = 0; j < kErrorSets; ++j)
            CHECK(rep.ise[i][j] < ise(rep.models[i][j], {}, g.horizon, g.t_c));
}
