#include <catch2/catch_amalgamated.hpp>

#include <cryorf/uncertainty.hpp>

using namespace cryorf;

namespace {
UncertaintyBudget only(double UncertaintyBudget::*field, double value) {
    auto b = UncertaintyBudget::zero();
    b.*field = value;
    return b;
}
} // namespace

TEST_CASE("zero budget propagates to zero") {
    const auto op = reference_operating_point();
    const auto r = propagate_tdut(UncertaintyBudget::zero(), op);
    CHECK(r.sigma_t_dut_k == 0.0);
    const auto mc = monte_carlo_tdut(UncertaintyBudget::zero(), op, 10000, 1);
    CHECK_THAT(mc.sigma_t_dut_k, Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("T_A-only budget has the closed-form sensitivity") {
    const auto op = reference_operating_point();
    const auto r = propagate_tdut(only(&UncertaintyBudget::t_a_k, 0.005), op);
    const double want = (op.y / (op.y - 1.0)) * (1.0 - 1.0 / op.l_a) * 0.005;
    CHECK_THAT(r.sigma_t_dut_k, Catch::Matchers::WithinRel(want, 1e-12));
}

TEST_CASE("T_A sensitivity approaches unity for large Y and L_A") {
    auto op = reference_operating_point();
    op.y = 1e6;
    const auto r = propagate_tdut(only(&UncertaintyBudget::t_a_k, 1.0), op);
    CHECK_THAT(std::abs(r.term("T_A").sensitivity), Catch::Matchers::WithinAbs(1.0, 1e-3));
}

TEST_CASE("single-parameter budgets match Monte Carlo within 3%") {
    const auto op = reference_operating_point();
    const std::size_t n = 100000;
    struct Case {
        const char* name;
        UncertaintyBudget budget;
    };
    const std::vector<Case> cases = {
        {"ENR", only(&UncertaintyBudget::enr_db, 0.18)},
        {"L_A", only(&UncertaintyBudget::l_a_db, 0.033)},
        {"L_cable", only(&UncertaintyBudget::l_cable_db, 0.033)},
        {"T_cable", only(&UncertaintyBudget::t_cable_k, 32.0)},
        {"T_A", only(&UncertaintyBudget::t_a_k, 0.005)},
        {"G_DUT", only(&UncertaintyBudget::g_dut_db, 0.033)},
    };
    std::uint64_t seed = 100;
    for (const auto& c : cases) {
        INFO(c.name);
        const auto analytic = propagate_tdut(c.budget, op);
        const auto mc = monte_carlo_tdut(c.budget, op, n, seed++);
        CHECK(std::abs(mc.sigma_t_dut_k - analytic.sigma_t_dut_k) <=
              0.03 * analytic.sigma_t_dut_k);
    }
}

TEST_CASE("default budget at the reference point") {
    const auto op = reference_operating_point();
    const auto r = propagate_tdut(UncertaintyBudget{}, op);
    INFO("sigma = " << r.sigma_t_dut_k * 1e3 << " mK");
    CHECK(r.sigma_t_dut_k > 0.120);
    CHECK(r.sigma_t_dut_k < 0.180);

    SECTION("Monte Carlo agrees within 10%") {
        const auto mc = monte_carlo_tdut(UncertaintyBudget{}, op, 100000, 42);
        CHECK(std::abs(mc.sigma_t_dut_k - r.sigma_t_dut_k) <= 0.10 * r.sigma_t_dut_k);
    }

    SECTION("per-term breakdown covers every budget entry once") {
        REQUIRE(r.terms.size() == 7);
        const auto& enr = r.term("ENR");
        CHECK(enr.in_default_sum);
        CHECK_FALSE(r.term("T_eff").in_default_sum);
        // the ENR path dominates at this operating point
        for (const auto& t : r.terms)
            if (t.parameter != "ENR") CHECK(t.contribution_k < enr.contribution_k);
    }

    SECTION("alternative aggregation swaps ENR for T_eff") {
        const auto alt = propagate_tdut(UncertaintyBudget{}, op,
                                        BudgetAggregation::t_eff_alternative);
        CHECK_FALSE(alt.term("ENR").in_default_sum);
        CHECK(alt.term("T_eff").in_default_sum);
        CHECK(alt.sigma_t_dut_k < r.sigma_t_dut_k);
    }
}

TEST_CASE("sigma is monotone nondecreasing in every budget entry") {
    const auto op = reference_operating_point();
    const UncertaintyBudget base{};
    const double sigma0 = propagate_tdut(base, op).sigma_t_dut_k;
    const std::vector<double UncertaintyBudget::*> fields = {
        &UncertaintyBudget::g_dut_db, &UncertaintyBudget::l_cable_db,
        &UncertaintyBudget::l_a_db,   &UncertaintyBudget::t_cable_k,
        &UncertaintyBudget::t_a_k,    &UncertaintyBudget::enr_db};
    for (auto f : fields) {
        auto b = base;
        b.*f *= 2.0;
        CHECK(propagate_tdut(b, op).sigma_t_dut_k >= sigma0);
    }
}

TEST_CASE("monte carlo is deterministic under a fixed seed") {
    const auto op = reference_operating_point();
    const auto a = monte_carlo_tdut(UncertaintyBudget{}, op, 20000, 7);
    const auto b = monte_carlo_tdut(UncertaintyBudget{}, op, 20000, 7);
    CHECK(a.sigma_t_dut_k == b.sigma_t_dut_k);
    CHECK(a.mean_t_dut_k == b.mean_t_dut_k);
    const auto c = monte_carlo_tdut(UncertaintyBudget{}, op, 20000, 8);
    CHECK(a.sigma_t_dut_k != c.sigma_t_dut_k);
}

TEST_CASE("operating point validation") {
    auto op = reference_operating_point();
    op.y = 0.9;
    CHECK_THROWS_AS(propagate_tdut(UncertaintyBudget{}, op), Error);
    op = reference_operating_point();
    op.t_cold_k = 10.0; // inconsistent with the loss/temperature fields
    CHECK_THROWS_AS(propagate_tdut(UncertaintyBudget{}, op), Error);
}

TEST_CASE("budget and operating point JSON round trip") {
    const UncertaintyBudget b{};
    const auto b2 = budget_from_json(to_json(b));
    CHECK(b2.enr_db == b.enr_db);
    CHECK(b2.t_cable_k == b.t_cable_k);
    const auto op = reference_operating_point();
    const auto op2 = operating_point_from_json(to_json(op));
    CHECK(op2.y == op.y);
    CHECK(op2.t_hot_k == op.t_hot_k);
    CHECK(op2.t_receiver_k == op.t_receiver_k);
}
