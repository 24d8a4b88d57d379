#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dermarket/errors.hpp"
#include "dermarket/fixtures.hpp"
#include "dermarket/scenarios.hpp"
#include "test_util.hpp"

using namespace dermarket;

namespace {

QuantileScenarioSet make_set(std::vector<double> levels, std::vector<std::vector<double>> rows) {
    QuantileScenarioSet s;
    s.household = "h";
    s.quantiles = std::move(levels);
    s.trajectories = std::move(rows);
    return s;
}

std::vector<HistoryRecord> history_of(const std::vector<std::vector<double>>& days) {
    std::vector<HistoryRecord> h;
    for (std::size_t d = 0; d < days.size(); ++d) {
        h.push_back({"h", SeriesKind::pv, "d" + std::to_string(d), days[d]});
        h.push_back({"h", SeriesKind::demand, "d" + std::to_string(d), days[d]});
    }
    return h;
}

}  // namespace

TEST(QuantileLoss, Branches) {
    EXPECT_NEAR(quantile_loss(0.9, 1.0, 2.0), 0.9, 1e-15);
    EXPECT_NEAR(quantile_loss(0.9, 2.0, 1.0), 0.1, 1e-15);
    EXPECT_EQ(quantile_loss(0.3, 4.2, 4.2), 0.0);
}

TEST(QuantileLoss, LevelOutsideUnitIntervalThrows) {
    EXPECT_THROW(quantile_loss(0.0, 1.0, 1.0), DomainError);
    EXPECT_THROW(quantile_loss(1.0, 1.0, 1.0), DomainError);
    EXPECT_THROW(quantile_loss(-0.2, 1.0, 1.0), DomainError);
}

TEST(ScenarioSetLoss, SingleTerm) {
    auto s = make_set({0.5}, {{3.0}});
    EXPECT_NEAR(scenario_set_loss(s, {5.0}), 1.0, 1e-15);
}

TEST(ScenarioSetLoss, PerfectForecastIsZero) {
    auto s = make_set({0.25, 0.5, 0.75}, {{1, 2}, {1, 2}, {1, 2}});
    EXPECT_EQ(scenario_set_loss(s, {1, 2}), 0.0);
}

TEST(ScenarioSetLoss, MatchesHandComputedTable) {
    // |Q| = 3, T = 2
    auto s = make_set({0.25, 0.5, 0.75}, {{1.0, 0.5}, {2.0, 1.5}, {3.0, 2.5}});
    // t1, y = 2: 0.25*1, 0, 0.25*1 ; t2, y = 1: 0.25*0.5, 0.5*0.5, 0.25*1.5
    double expected = (0.25 + 0.0 + 0.25 + 0.125 + 0.25 + 0.375) / 3.0;
    EXPECT_NEAR(scenario_set_loss(s, {2.0, 1.0}), expected, 1e-15);
}

TEST(ScenarioSetLoss, DimensionMismatch) {
    auto s = make_set({0.5}, {{1.0, 2.0}});
    EXPECT_THROW(scenario_set_loss(s, {1.0}), DimensionMismatch);
}

TEST(EmpiricalQuantile, LinearBetweenOrderStatistics) {
    // Nine points 1..9: position (n - 1) q = 8 q.
    std::vector<double> v = {9, 3, 1, 7, 5, 2, 8, 4, 6};
    auto levels = equally_spaced_quantiles(9);
    for (std::size_t j = 0; j < levels.size(); ++j) {
        double expected = 1.0 + 8.0 * levels[j];
        EXPECT_NEAR(empirical_quantile(v, levels[j]), expected, 1e-12);
    }
    EXPECT_NEAR(empirical_quantile(v, 0.1), 1.8, 1e-12);
    EXPECT_NEAR(empirical_quantile(v, 0.9), 8.2, 1e-12);
}

TEST(EmpiricalScenarios, NineDaysNineLevels) {
    std::vector<std::vector<double>> days;
    for (int d = 1; d <= 9; ++d) days.push_back({static_cast<double>(d)});
    auto sets = generate_empirical_scenarios(history_of(days), 9);
    ASSERT_EQ(sets.size(), 2u);
    for (const auto& s : sets) {
        ASSERT_EQ(s.trajectories.size(), 9u);
        for (int j = 0; j < 9; ++j) EXPECT_NEAR(s.trajectories[static_cast<std::size_t>(j)][0], 1.0 + 0.8 * (j + 1), 1e-12);
        EXPECT_NO_THROW(s.validate());
    }
}

TEST(EmpiricalScenarios, ConstantHistoryGivesIdenticalRows) {
    std::vector<std::vector<double>> days(5, {1.5, 0.0, 2.5});
    auto sets = generate_empirical_scenarios(history_of(days), 3);
    for (const auto& s : sets)
        for (const auto& row : s.trajectories) EXPECT_EQ(row, days[0]);
}

TEST(EmpiricalScenarios, SingleLevelIsMedian) {
    std::vector<std::vector<double>> days = {{1.0}, {4.0}, {2.0}, {10.0}};
    auto sets = generate_empirical_scenarios(history_of(days), 1);
    ASSERT_EQ(sets.front().quantiles, std::vector<double>{0.5});
    EXPECT_NEAR(sets.front().trajectories[0][0], 3.0, 1e-12);
}

TEST(EmpiricalScenarios, InsufficientHistory) {
    std::vector<std::vector<double>> days = {{1.0}, {2.0}};
    EXPECT_THROW(generate_empirical_scenarios(history_of(days), 3), InsufficientHistory);
}

TEST(Scenarios, LevelsAreEquallySpaced) {
    auto q = equally_spaced_quantiles(9);
    ASSERT_EQ(q.size(), 9u);
    for (int j = 0; j < 9; ++j) EXPECT_NEAR(q[static_cast<std::size_t>(j)], 0.1 * (j + 1), 1e-15);
}

TEST(Scenarios, ValidateRejectsBadSets) {
    EXPECT_THROW(make_set({0.3}, {{1.0}}).validate(), ValidationError);
    EXPECT_THROW(make_set({0.5}, {{-1.0}}).validate(), ValidationError);
    EXPECT_THROW(make_set({0.25, 0.5, 0.75}, {{1.0}, {1.0, 2.0}, {1.0}}).validate(), ValidationError);
}

TEST(Scenarios, CrossingIsRepairedBySorting) {
    auto s = make_set({0.25, 0.5, 0.75}, {{3.0, 1.0}, {1.0, 2.0}, {2.0, 3.0}});
    EXPECT_TRUE(s.repair_crossing());
    EXPECT_EQ(s.trajectories[0], (std::vector<double>{1.0, 1.0}));
    EXPECT_EQ(s.trajectories[2], (std::vector<double>{3.0, 3.0}));
    EXPECT_FALSE(s.repair_crossing());
}

TEST(Scenarios, CsvRoundTripAndCrossingRepairOnLoad) {
    testutil::TempDir dir("scen");
    Study st = fixtures::three_bus(false);
    write_scenarios_csv(st.scenarios, dir.file("s.csv"));
    ScenarioBook back = load_scenarios_csv(dir.file("s.csv"));
    ASSERT_EQ(back.households(), st.scenarios.households());
    for (const auto& h : back.households()) {
        EXPECT_EQ(back.pv(h).trajectories, st.scenarios.pv(h).trajectories);
        EXPECT_EQ(back.demand(h).trajectories, st.scenarios.demand(h).trajectories);
    }

    testutil::write_file(dir.file("x.csv"),
                         "household,kind,quantile,t1,t2\n"
                         "a,pv,0.25,2,0\na,pv,0.5,1,0\na,pv,0.75,3,0\n"
                         "a,demand,0.25,1,1\na,demand,0.5,1,1\na,demand,0.75,1,1\n");
    ScenarioBook crossed = load_scenarios_csv(dir.file("x.csv"));
    EXPECT_EQ(crossed.pv("a").trajectories[0][0], 1.0);
    EXPECT_EQ(crossed.pv("a").trajectories[1][0], 2.0);
}

TEST(Scenarios, RealizationAndHistoryRoundTrip) {
    testutil::TempDir dir("real");
    Study st = fixtures::single_scenario();
    write_realizations_csv(st.realizations, dir.file("r.csv"));
    auto back = load_realizations_csv(dir.file("r.csv"));
    ASSERT_EQ(back.size(), st.realizations.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        EXPECT_EQ(back[i].household, st.realizations[i].household);
        EXPECT_EQ(back[i].pv, st.realizations[i].pv);
        EXPECT_EQ(back[i].demand, st.realizations[i].demand);
    }
    auto hist = fixtures::synthetic_history(st, 4, 1);
    write_history_csv(hist, dir.file("h.csv"));
    auto hist_back = load_history_csv(dir.file("h.csv"));
    ASSERT_EQ(hist_back.size(), hist.size());
    for (std::size_t i = 0; i < hist.size(); ++i) EXPECT_EQ(hist_back[i].values, hist[i].values);
}

TEST(Scenarios, MedianBookHasOneScenario) {
    Study st = fixtures::feeder15(2024, 9);
    ScenarioBook med = st.scenarios.median();
    EXPECT_EQ(med.num_pv(), 1);
    EXPECT_EQ(med.num_demand(), 1);
    for (const auto& h : med.households())
        EXPECT_EQ(med.pv(h).trajectories[0], st.scenarios.pv(h).trajectories[4]);
}

TEST(ScenarioProperty, GeneratedTrajectoriesAreMonotoneInLevel) {
    std::mt19937_64 rng(21);
    std::lognormal_distribution<double> value(0.0, 1.0);
    std::uniform_int_distribution<int> n_days(1, 40), horizon(1, 24), n_q(1, 9);
    for (int c = 0; c < 1000; ++c) {
        const int q = n_q(rng);
        const int days = std::max(q, n_days(rng));
        const int T = horizon(rng);
        std::vector<std::vector<double>> hist(static_cast<std::size_t>(days), std::vector<double>(static_cast<std::size_t>(T)));
        for (auto& d : hist)
            for (auto& v : d) v = value(rng);
        auto sets = generate_empirical_scenarios(history_of(hist), q);
        for (const auto& s : sets) {
            ASSERT_NO_THROW(s.validate());
            for (int t = 0; t < T; ++t)
                for (int j = 1; j < q; ++j)
                    ASSERT_LE(s.trajectories[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(t)],
                              s.trajectories[static_cast<std::size_t>(j)][static_cast<std::size_t>(t)]);
        }
    }
}

TEST(ScenarioProperty, LossIsNonnegativeAndZeroOnlyWhenExact) {
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int c = 0; c < 1000; ++c) {
        const int q = 1 + c % 9, T = 1 + c % 5;
        auto levels = equally_spaced_quantiles(q);
        std::vector<double> actual(static_cast<std::size_t>(T));
        for (auto& v : actual) v = u(rng);
        std::vector<std::vector<double>> rows(static_cast<std::size_t>(q), actual);
        auto exact = make_set(levels, rows);
        ASSERT_EQ(scenario_set_loss(exact, actual), 0.0);
        rows[static_cast<std::size_t>(c % q)][static_cast<std::size_t>(c % T)] += 0.5;
        auto off = make_set(levels, rows);
        ASSERT_GT(scenario_set_loss(off, actual), 0.0);
    }
}

TEST(ScenarioProperty, BundledFixturesAreMonotone) {
    for (const char* name : {"feeder15", "three_bus", "three_bus_congested", "single_scenario"}) {
        Study st = fixtures::by_name(name);
        for (const auto& set : st.scenarios.sets()) {
            ASSERT_NO_THROW(set.validate()) << name;
            for (std::size_t j = 1; j < set.trajectories.size(); ++j)
                for (std::size_t t = 0; t < set.trajectories[j].size(); ++t)
                    ASSERT_LE(set.trajectories[j - 1][t], set.trajectories[j][t]) << name;
        }
    }
}
