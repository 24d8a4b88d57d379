#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dermarket/community.hpp"
#include "dermarket/errors.hpp"
#include "dermarket/fixtures.hpp"
#include "dermarket/solver/solver.hpp"

using namespace dermarket;
using solver::ConicProgram;
using solver::LinExpr;

namespace {

HouseholdSpec household(const std::string& id, std::vector<std::string> partners, BatterySpec bat = {}) {
    HouseholdSpec h;
    h.id = id;
    h.bus = 1;
    h.battery = bat;
    h.partners = std::move(partners);
    return h;
}

BatterySpec battery(double eta, double e_min, double e_max, double p_max, double e0, double ef) {
    return {eta, e_min, e_max, p_max, e0, ef, 1.0};
}

}  // namespace

TEST(BatteryStep, Examples) {
    BatterySpec b = battery(0.95, 0.0, 13.5, 3.3, 5.0, 5.0);
    EXPECT_NEAR(battery_step(b, 5.0, 2.0, 0.0), 6.9, 1e-12);
    EXPECT_NEAR(battery_step(b, 5.0, 0.0, 1.9), 3.0, 1e-12);
    EXPECT_EQ(battery_step(b, 5.0, 0.0, 0.0), 5.0);
}

TEST(BatteryStep, OutOfBoundsThrows) {
    BatterySpec b = battery(0.95, 1.0, 6.0, 3.3, 5.0, 5.0);
    EXPECT_THROW(battery_step(b, 5.0, 3.0, 0.0), BoundsError);
    EXPECT_THROW(battery_step(b, 1.5, 0.0, 3.0), BoundsError);
}

TEST(BatterySpec, Validation) {
    EXPECT_NO_THROW(BatterySpec{}.validate());
    EXPECT_THROW(battery(1.2, 0, 1, 1, 0, 0).validate(), ValidationError);
    EXPECT_THROW(battery(0.9, 2, 1, 1, 2, 2).validate(), ValidationError);
    EXPECT_THROW(battery(0.9, 0, 1, 1, 0, 3).validate(), ValidationError);
    BatterySpec none = BatterySpec::none(0.0);
    EXPECT_NO_THROW(none.validate());
    EXPECT_EQ(none.e_min, none.e_max);
    EXPECT_EQ(none.p_max, 0.0);
}

TEST(Partners, AsymmetryAndSelfPartnershipAreConfigErrors) {
    EXPECT_NO_THROW(check_partners({household("a", {"b"}), household("b", {"a"})}));
    EXPECT_THROW(check_partners({household("a", {"b"}), household("b", {})}), ConfigError);
    EXPECT_THROW(check_partners({household("a", {"a"})}), ConfigError);
    EXPECT_THROW(check_partners({household("a", {"z"})}), ConfigError);
}

TEST(Households, JsonRoundTrip) {
    Study st = fixtures::feeder15();
    auto back = parse_households(households_to_json(st.households));
    ASSERT_EQ(back.size(), st.households.size());
    EXPECT_EQ(households_to_json(back), households_to_json(st.households));
    EXPECT_DOUBLE_EQ(back.front().reactive_ratio, st.households.front().reactive_ratio);
}

TEST(HouseholdBlock, IdleHouseholdIsAllZero) {
    ConicProgram prog;
    HouseholdSpec h = household("a", {}, battery(0.95, 0.5, 5.0, 2.0, 1.0, 1.0));
    auto block = model::build_household_block(prog, h, {{0.0}}, {{0.0}});
    const auto& x = block.scenarios[0];
    prog.add_objective(x.grid_buy[0], 0.2);
    prog.add_objective(x.grid_sell[0], -0.1);
    auto sol = solver::solve_mixed(prog);
    EXPECT_NEAR(sol.value(block.battery.charge[0]), 0.0, 1e-7);
    EXPECT_NEAR(sol.value(block.battery.discharge[0]), 0.0, 1e-7);
    EXPECT_NEAR(sol.value(x.grid_buy[0]), 0.0, 1e-7);
    EXPECT_NEAR(sol.value(x.grid_sell[0]), 0.0, 1e-7);
    EXPECT_NEAR(sol.value(x.p_net[0]), 0.0, 1e-7);
}

TEST(HouseholdBlock, BalanceOverChargeGrid) {
    // pv 2, demand 1: exports equal 1 - charge for every fixed charge level.
    for (double c : {0.0, 0.5, 1.0}) {
        const double eta = 0.9;
        ConicProgram prog;
        HouseholdSpec h = household("a", {}, battery(eta, 0.0, 5.0, 2.0, 1.0, 1.0 + eta * c));
        auto block = model::build_household_block(prog, h, {{2.0}}, {{1.0}});
        const auto& x = block.scenarios[0];
        prog.fix(block.battery.charge[0], c);
        prog.fix(block.battery.mode[0], 1.0);
        prog.add_objective(x.grid_buy[0], 0.2);
        prog.add_objective(x.grid_sell[0], -0.1);
        auto sol = solver::solve_continuous(prog);
        EXPECT_NEAR(sol.value(x.grid_sell[0]) - sol.value(x.grid_buy[0]), 1.0 - c, 1e-7) << c;
        EXPECT_NEAR(sol.value(x.p_net[0]), 1.0 - c, 1e-7) << c;
        EXPECT_NEAR(x.q_net[0], -h.reactive_ratio * 1.0, 1e-15);
    }
}

TEST(HouseholdBlock, ScenarioTagsShareBatteryVariables) {
    ConicProgram one, two;
    HouseholdSpec h = household("a", {"b"});
    const std::vector<double> pv(24, 1.0), de(24, 0.5);
    auto b1 = model::build_household_block(one, h, {pv}, {de});
    auto b2 = model::build_household_block(two, h, {pv, pv}, {de, de});
    EXPECT_EQ(b1.battery.soc.size(), b2.battery.soc.size());
    EXPECT_EQ(b1.battery.charge.size(), b2.battery.charge.size());
    EXPECT_EQ(b1.battery.mode.size(), b2.battery.mode.size());
    EXPECT_EQ(b1.scenarios.size(), 1u);
    EXPECT_EQ(b2.scenarios.size(), 2u);
    EXPECT_EQ(one.num_binaries(), two.num_binaries());
    // Battery: 25 soc + 3 * 24; exchange per scenario: grid buy/sell and one sell/buy pair per partner.
    const std::size_t battery_vars = 25 + 3 * 24, exchange_vars = 4 * 24;
    EXPECT_EQ(one.num_variables(), battery_vars + exchange_vars);
    EXPECT_EQ(two.num_variables(), battery_vars + 2 * exchange_vars);
}

TEST(Reciprocity, RowCounts) {
    auto count = [](const std::vector<HouseholdSpec>& hh, int T) {
        ConicProgram prog;
        std::map<std::string, model::HouseholdBlock> blocks;
        std::map<std::string, const model::ExchangeVars*> scen;
        const std::vector<double> z(static_cast<std::size_t>(T), 0.0);
        for (const auto& h : hh) blocks.emplace(h.id, model::build_household_block(prog, h, {z}, {z}));
        for (const auto& [id, b] : blocks) scen[id] = &b.scenarios[0];
        return model::enforce_reciprocity(prog, hh, scen);
    };
    EXPECT_EQ(count({household("a", {"b"}), household("b", {"a"})}, 1), 2);
    EXPECT_EQ(count({household("a", {}), household("b", {})}, 1), 0);
    EXPECT_EQ(count({household("a", {"b", "c"}), household("b", {"a", "c"}), household("c", {"a", "b"})}, 24), 144);
}

TEST(Consolidate, KeepsNetPositionsAndRoutesSurplusToPartners) {
    std::vector<HouseholdSpec> hh = {household("a", {"b"}), household("b", {"a", "c"}), household("c", {"b"})};
    std::map<std::string, TradeLedger> l;
    l["a"].grid_sell = 2.0;  // surplus 2
    l["b"].grid_buy = 0.5;   // deficit 0.5
    l["c"].grid_buy = 3.0;   // deficit 3, not a partner of a
    l["c"].sell["b"] = 1.0;  // degenerate round trip through b
    l["b"].buy["c"] = 1.0;
    l["b"].sell["c"] = 1.0;
    l["c"].buy["b"] = 1.0;
    std::map<std::string, double> before;
    for (const auto& [id, t] : l) before[id] = net_position(t);
    consolidate_ledgers(l, hh);
    for (const auto& [id, t] : l) EXPECT_NEAR(net_position(t), before[id], 1e-12) << id;
    EXPECT_NEAR(l["a"].sell["b"], 0.5, 1e-12);
    EXPECT_NEAR(l["a"].grid_sell, 1.5, 1e-12);
    EXPECT_EQ(l["b"].grid_buy, 0.0);
    EXPECT_EQ(l["c"].sell["b"], 0.0);
    EXPECT_NEAR(l["c"].grid_buy, 3.0, 1e-12);
    EXPECT_EQ(l["a"].sell["b"], l["b"].buy["a"]);
}

TEST(Consolidate, MissingLedgerThrows) {
    std::vector<HouseholdSpec> hh = {household("a", {"b"}), household("b", {"a"})};
    std::map<std::string, TradeLedger> l;
    l["a"].grid_buy = 1.0;
    EXPECT_THROW(consolidate_ledgers(l, hh), UnknownHousehold);
}

TEST(Reconcile, AveragesBothSidesOfEachTrade) {
    std::map<std::string, std::vector<TradeLedger>> l;
    l["a"].resize(1);
    l["b"].resize(1);
    l["a"][0].sell["b"] = 1.0;
    l["b"][0].buy["a"] = 1.0 + 2e-9;
    l["b"][0].sell["a"] = 0.0;
    l["a"][0].buy["b"] = 1e-9;
    reconcile_reciprocity(l);
    EXPECT_EQ(l["a"][0].sell["b"], l["b"][0].buy["a"]);
    EXPECT_EQ(l["b"][0].sell["a"], l["a"][0].buy["b"]);
    EXPECT_NEAR(l["a"][0].sell["b"], 1.0 + 1e-9, 1e-15);
}

TEST(CommunityProperty, SocTelescopesOverRandomSequences) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int c = 0; c < 1000; ++c) {
        BatterySpec b = battery(0.8 + 0.2 * u(rng), 0.0, 1e6, 5.0, 500.0, 500.0);
        b.dt = 0.25 + u(rng);
        const int T = 1 + c % 48;
        double e = b.e_initial, sum = 0.0;
        for (int t = 0; t < T; ++t) {
            const bool charging = u(rng) < 0.5;
            const double ch = charging ? b.p_max * u(rng) : 0.0;
            const double dis = charging ? 0.0 : b.p_max * u(rng);
            e = battery_step(b, e, ch, dis);
            sum += (b.eta * ch - dis / b.eta) * b.dt;
        }
        ASSERT_NEAR(e - b.e_initial, sum, 1e-9 * std::max(1.0, std::abs(sum)));
    }
}

TEST(CommunityProperty, ConsolidationPreservesPositionsAndReciprocity) {
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::bernoulli_distribution edge(0.5);
    for (int c = 0; c < 1000; ++c) {
        const int n = 2 + c % 6;
        std::vector<HouseholdSpec> hh;
        for (int i = 0; i < n; ++i) hh.push_back(household("h" + std::to_string(i), {}));
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (edge(rng)) {
                    hh[static_cast<std::size_t>(i)].partners.push_back(hh[static_cast<std::size_t>(j)].id);
                    hh[static_cast<std::size_t>(j)].partners.push_back(hh[static_cast<std::size_t>(i)].id);
                }
        std::map<std::string, TradeLedger> l;
        std::map<std::string, double> before;
        for (const auto& h : hh) {
            const double p = u(rng);
            (p > 0 ? l[h.id].grid_sell : l[h.id].grid_buy) = std::abs(p);
            before[h.id] = p;
        }
        consolidate_ledgers(l, hh);
        double grid_before = 0.0, grid_after = 0.0;
        for (const auto& h : hh) {
            const TradeLedger& t = l.at(h.id);
            ASSERT_NEAR(net_position(t), before[h.id], 1e-12);
            ASSERT_TRUE(t.grid_buy == 0.0 || t.grid_sell == 0.0);
            grid_before += std::abs(before[h.id]);
            grid_after += t.grid_buy + t.grid_sell;
            for (const auto& m : h.partners) {
                ASSERT_EQ(t.sell.at(m), l.at(m).buy.at(h.id));
                ASSERT_EQ(t.net(m), -l.at(m).net(h.id));
            }
        }
        ASSERT_LE(grid_after, grid_before + 1e-12);
    }
}
