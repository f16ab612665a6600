#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "test_util.hpp"
#include "unisoft/bounds.hpp"

using namespace unisoft;
using nlohmann::json;

namespace {

ProblemConstants constants(int d, int h, double delta, double dmin, double lp, double c1 = 8.0,
                           double c2 = 1.0, double c_beta = 0.2) {
    ProblemConstants pc;
    pc.d = d;
    pc.horizon = h;
    pc.delta = delta;
    pc.delta_min = dmin;
    pc.lambda_plus = lp;
    pc.c1 = c1;
    pc.c2 = c2;
    pc.c_beta = c_beta;
    return pc;
}

double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

}  // namespace

TEST_CASE("formulas match the extended-precision golden grid") {
    std::ifstream in(std::string(TEST_DATA_DIR) + "/bounds_golden.json");
    REQUIRE(in.good());
    const json golden = json::parse(in);
    REQUIRE(golden.at("entries").size() == 20);

    for (const auto& e : golden.at("entries")) {
        const ProblemConstants pc =
            constants(e.at("d"), e.at("horizon"), e.at("delta"), e.at("delta_min"),
                      e.at("lambda_plus"), e.at("c1"), e.at("c2"), e.at("c_beta"));
        const KappaResult lsvi = kappa_bar_lsvi(pc);
        const KappaResult eleanor = kappa_bar_eleanor(pc);
        CHECK(rel_err(lsvi.value, e.at("kappa_lsvi")) <= 1e-9);
        CHECK(rel_err(lsvi.branch_exploration, e.at("kappa_lsvi_branch_exploration")) <= 1e-9);
        CHECK(rel_err(lsvi.branch_gap, e.at("kappa_lsvi_branch_gap")) <= 1e-9);
        CHECK(rel_err(eleanor.value, e.at("kappa_eleanor")) <= 1e-9);
        const ConstantRegretExpressions expr = constant_regret_expressions(pc, lsvi.value);
        CHECK(rel_err(expr.lsvi, e.at("expr_lsvi")) <= 1e-9);
        CHECK(rel_err(expr.eleanor, e.at("expr_eleanor")) <= 1e-9);
        for (const auto& gp : e.at("g"))
            CHECK(rel_err(g_worstcase(gp.at("k"), pc, gp.at("beta")), gp.at("value")) <= 1e-9);
    }
}

TEST_CASE("worst-case envelope") {
    const ProblemConstants pc = constants(2, 2, 0.05, 0.1, 0.1);

    SUBCASE("direct substitution at the first episode") {
        const double beta1 = 1.7;
        const double expect = 2.0 * beta1 * std::sqrt(2.0 * 2.0 * std::log(2.0)) +
                              2.0 * 4.0 * std::sqrt(std::log(2.0 * 2.0 / 0.05));
        CHECK_NEAR(g_worstcase(1, pc, beta1), expect, 1e-12);
    }
    SUBCASE("doubling the episode count grows the envelope by at most sqrt(2) up to logs") {
        // Both terms scale by sqrt(2) times sqrt of a log ratio bounded by
        // 1 + log(2)/log(1+k).
        const double beta = 3.0;
        const long k = 1000000;
        const double ratio = g_worstcase(2 * k, pc, beta) / g_worstcase(k, pc, beta);
        const double inflation = std::sqrt(1.0 + std::log(2.0) / std::log(1.0 + k));
        CHECK(ratio <= std::sqrt(2.0) * inflation);
        CHECK(ratio >= 1.0);
    }
    SUBCASE("sublinearity witness at quadrupled horizon") {
        const double beta = 3.0;
        for (long k : {1000L, 10000L, 100000L})
            CHECK(g_worstcase(4 * k, pc, beta) / g_worstcase(k, pc, beta) <= 2.2);
    }
    SUBCASE("invalid k") { CHECK_THROWS_AS(g_worstcase(0, pc, 1.0), std::invalid_argument); }
}

TEST_CASE("critical-time calculators") {
    const ProblemConstants base = constants(2, 2, 0.05, 3.0 / 32.0, 0.0197, 8.0, 1.0);

    SUBCASE("the result is the max of its two independently computed branches") {
        for (const auto& calc : {kappa_bar_lsvi, kappa_bar_eleanor}) {
            const KappaResult r = calc(base);
            CHECK(r.value == std::max(r.branch_exploration, r.branch_gap));
            CHECK(r.binding_branch == (r.branch_exploration >= r.branch_gap ? 1 : 2));
        }
    }
    SUBCASE("vanishing lambda_plus blows up through the gap branch") {
        auto small = base;
        small.lambda_plus = 1e-9;
        const KappaResult r = kappa_bar_lsvi(small);
        CHECK(r.binding_branch == 2);
        CHECK(r.value > kappa_bar_lsvi(base).value * 1e6);
    }
    SUBCASE("halving the gap at least quadruples the gap branch") {
        auto half = base;
        half.delta_min = base.delta_min / 2.0;
        CHECK(kappa_bar_lsvi(half).branch_gap >= 4.0 * kappa_bar_lsvi(base).branch_gap);
    }
    SUBCASE("the global-optimism variant never exceeds the single-rep one") {
        for (int d = 1; d <= 8; ++d) {
            const auto pc = constants(d, 3, 0.05, 0.1, 0.05);
            CHECK(kappa_bar_eleanor(pc).value <= kappa_bar_lsvi(pc).value);
        }
    }
    SUBCASE("at d = 1 the exploration branches coincide") {
        const auto pc = constants(1, 3, 0.05, 0.1, 0.05);
        CHECK(kappa_bar_eleanor(pc).branch_exploration ==
              kappa_bar_lsvi(pc).branch_exploration);
    }
    SUBCASE("non-positive inputs are rejected") {
        auto bad = base;
        bad.lambda_plus = 0.0;
        CHECK_THROWS_AS(kappa_bar_lsvi(bad), std::invalid_argument);
        bad = base;
        bad.delta_min = -1.0;
        CHECK_THROWS_AS(kappa_bar_eleanor(bad), std::invalid_argument);
    }
}

TEST_CASE("critical times are monotone over a parameter sweep") {
    const ProblemConstants base = constants(3, 3, 0.05, 0.1, 0.05, 8.0, 1.0);
    for (const auto& calc : {kappa_bar_lsvi, kappa_bar_eleanor}) {
        const double v0 = calc(base).value;
        auto bump = base;
        bump.lambda_plus *= 2.0;
        CHECK(calc(bump).value <= v0);
        bump = base;
        bump.delta_min *= 2.0;
        CHECK(calc(bump).value <= v0);
        bump = base;
        bump.d += 1;
        CHECK(calc(bump).value >= v0);
        bump = base;
        bump.horizon += 1;
        CHECK(calc(bump).value >= v0);
        bump = base;
        bump.c1 += 1.0;
        CHECK(calc(bump).value >= v0);
        bump = base;
        bump.c2 += 1.0;
        CHECK(calc(bump).value >= v0);
        bump = base;
        bump.delta /= 2.0;
        CHECK(calc(bump).value >= v0);
    }
}

TEST_CASE("constant-regret expressions") {
    SUBCASE("unit substitution") {
        const auto pc = constants(1, 1, std::exp(-1.0), 1.0, 1.0);
        const auto expr = constant_regret_expressions(pc, 1.0);
        CHECK_NEAR(expr.lsvi, 1.0, 1e-12);
        CHECK_NEAR(expr.eleanor, 1.0, 1e-12);
    }
    SUBCASE("the single-rep expression does not increase with the gap") {
        double prev = std::numeric_limits<double>::infinity();
        for (double dmin : {0.01, 0.05, 0.25, 1.0}) {
            const auto pc = constants(2, 2, 0.05, dmin, 0.1);
            const double value = constant_regret_expressions(pc, 1e6).lsvi;
            CHECK(value <= prev);
            prev = value;
        }
    }
    SUBCASE("non-positive critical time is rejected") {
        CHECK_THROWS_AS(constant_regret_expressions(constants(2, 2, 0.05, 0.1, 0.1), 0.0),
                        std::invalid_argument);
    }
}

TEST_CASE("constants validation flags the proof floor") {
    auto pc = constants(2, 2, 0.05, 0.1, 0.1, 4.0);
    CHECK(pc.c1_below_floor());
    pc.c1 = 8.0;
    CHECK_FALSE(pc.c1_below_floor());
}
