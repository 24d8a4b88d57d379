#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>

#include "dermarket/cli.hpp"
#include "dermarket/fixtures.hpp"
#include "dermarket/reports.hpp"
#include "test_util.hpp"

using namespace dermarket;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out, err;
};

Outcome run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dermarket");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Outcome o;
    o.code = cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

std::string data_dir(const std::string& name) { return (fs::path(DERMARKET_DATA_DIR) / name).string(); }

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> v;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) v.push_back(l);
    return v;
}

}  // namespace

TEST(Cli, ValidateBundledFeeder) {
    const std::string d = data_dir("three_bus");
    Outcome o = run_cli({"validate", "--network", d + "/network.json", "--households", d + "/households.json"});
    EXPECT_EQ(o.code, cli::kOk) << o.err;
    EXPECT_EQ(o.out, "OK\n");
}

TEST(Cli, ValidateReportsUnknownBus) {
    testutil::TempDir dir("cli_bad");
    const std::string d = data_dir("three_bus");
    std::string hh = testutil::read_file(d + "/households.json");
    const auto pos = hh.find("\"bus\":");
    ASSERT_NE(pos, std::string::npos);
    hh.replace(pos, 6, "\"bus\": 99,\"_x\":");
    testutil::write_file(dir.file("h.json"), hh);
    Outcome o = run_cli({"validate", "--network", d + "/network.json", "--households", dir.file("h.json")});
    EXPECT_EQ(o.code, cli::kValidation);
    EXPECT_NE(o.err.find("invalid"), std::string::npos);
}

TEST(Cli, MissingRequiredOptionIsUsageError) {
    const std::string d = data_dir("three_bus");
    Outcome o = run_cli({"day-ahead", "--network", d + "/network.json", "--households", d + "/households.json",
                         "--scenarios", d + "/scenarios.csv"});
    EXPECT_EQ(o.code, cli::kUsage);
    EXPECT_NE(o.err.find("--tariff"), std::string::npos);
    EXPECT_EQ(run_cli({}).code, cli::kUsage);
    EXPECT_EQ(run_cli({"no-such-command"}).code, cli::kUsage);
}

TEST(Cli, MissingFileIsReported) {
    Outcome o = run_cli({"validate", "--network", "/nonexistent/net.json", "--households", "/nonexistent/h.json"});
    EXPECT_EQ(o.code, cli::kValidation);
    EXPECT_FALSE(o.err.empty());
}

TEST(Cli, StepByStepPipeline) {
    testutil::TempDir dir("cli_steps");
    const std::string d = data_dir("three_bus_congested");
    const std::vector<std::string> common = {"--network", d + "/network.json", "--households", d + "/households.json",
                                             "--params", d + "/params.json"};
    auto with = [&](std::vector<std::string> head, std::vector<std::string> tail) {
        head.insert(head.end(), common.begin(), common.end());
        head.insert(head.end(), tail.begin(), tail.end());
        return head;
    };

    Outcome da = run_cli(with({"day-ahead", "-q"}, {"--scenarios", d + "/scenarios.csv", "--tariff", d + "/tariff.csv",
                                                     "--out", dir.file("da")}));
    ASSERT_EQ(da.code, cli::kOk) << da.err;
    EXPECT_EQ(testutil::read_file(dir.file("da/manifest.txt")),
              "schedule.json\nprices.csv\nslack.csv\nday_ahead_flows.csv\n");
    EXPECT_EQ(lines_of(da.out).size(), 5u);

    Outcome rt = run_cli(with({"real-time", "-q"}, {"--day-ahead", dir.file("da/schedule.json"), "--realization",
                                                     d + "/realization.csv", "--tariff", d + "/tariff.csv", "--out",
                                                     dir.file("rt")}));
    ASSERT_EQ(rt.code, cli::kOk) << rt.err;
    EXPECT_EQ(testutil::read_file(dir.file("rt/manifest.txt")), "real_time.json\nreal_time_flows.csv\n");

    Outcome st = run_cli({"settle", "-q", "--real-time", dir.file("rt/real_time.json"), "--tariff", d + "/tariff.csv",
                          "--out", dir.file("st")});
    ASSERT_EQ(st.code, cli::kOk) << st.err;
    EXPECT_EQ(testutil::read_file(dir.file("st/manifest.txt")), "settlement.csv\nsettlement.json\n");

    Outcome gen = run_cli({"gen-scenarios", "-q", "--history", d + "/history.csv", "--quantiles", "3", "--out",
                           dir.file("gen.csv")});
    ASSERT_EQ(gen.code, cli::kOk) << gen.err;
    ScenarioBook book = load_scenarios_csv(dir.file("gen.csv"));
    EXPECT_EQ(book.num_pv(), 3);
}

TEST(Cli, RedecideModeFlagRuns) {
    testutil::TempDir dir("cli_redecide");
    const std::string d = data_dir("three_bus");
    Outcome da = run_cli({"day-ahead", "-q", "--network", d + "/network.json", "--households", d + "/households.json",
                          "--scenarios", d + "/scenarios.csv", "--tariff", d + "/tariff.csv", "--no-flows", "--out",
                          dir.file("da")});
    ASSERT_EQ(da.code, cli::kOk) << da.err;
    EXPECT_FALSE(fs::exists(dir.file("da/day_ahead_flows.csv")));
    Outcome rt = run_cli({"real-time", "-q", "--redecide-mode", "--network", d + "/network.json", "--households",
                          d + "/households.json", "--day-ahead", dir.file("da/schedule.json"), "--realization",
                          d + "/realization.csv", "--tariff", d + "/tariff.csv", "--out", dir.file("rt")});
    EXPECT_EQ(rt.code, cli::kOk) << rt.err;
}

TEST(Cli, DemoWritesManifestAndIsDeterministic) {
    testutil::TempDir dir("cli_demo");
    Outcome a = run_cli({"demo", "-q", "--fixture", "three_bus_congested", "--out", dir.file("a")});
    ASSERT_EQ(a.code, cli::kOk) << a.err;
    const std::vector<std::string> expected = {
        "inputs/network.json",         "inputs/households.json",     "inputs/params.json",
        "inputs/scenarios.csv",        "inputs/tariff.csv",          "inputs/realization.csv",
        "day_ahead/schedule.json",     "day_ahead/prices.csv",       "day_ahead/slack.csv",
        "day_ahead/day_ahead_flows.csv", "real_time/real_time.json", "real_time/real_time_flows.csv",
        "settlement/settlement.csv",   "settlement/settlement.json", "point_forecast/real_time.json",
        "point_forecast/real_time_flows.csv", "comparison/comparison.csv", "comparison/comparison.json"};
    // The manifest lists everything but itself; stdout adds it last.
    EXPECT_EQ(lines_of(testutil::read_file(dir.file("a/manifest.txt"))), expected);
    EXPECT_EQ(lines_of(a.out).back(), (fs::path(dir.file("a")) / "manifest.txt").string());
    for (const auto& f : expected) EXPECT_TRUE(fs::exists(dir.file("a/" + f))) << f;

    auto rows = reports::load_comparison_csv(dir.file("a/comparison/comparison.csv"));
    ASSERT_EQ(rows.size(), 3u);
    for (const auto& r : rows) EXPECT_GE(r.gap, -1e-6) << r.method;

    Outcome b = run_cli({"demo", "-q", "--fixture", "three_bus_congested", "--out", dir.file("b")});
    ASSERT_EQ(b.code, cli::kOk) << b.err;
    for (const auto& f : expected)
        EXPECT_EQ(testutil::read_file(dir.file("a/" + f)), testutil::read_file(dir.file("b/" + f))) << f;
}

TEST(Cli, CompareMatchesDemoComparison) {
    testutil::TempDir dir("cli_cmp");
    const std::string d = data_dir("single_scenario");
    Outcome c = run_cli({"compare", "-q", "--network", d + "/network.json", "--households", d + "/households.json",
                         "--params", d + "/params.json", "--scenarios", d + "/scenarios.csv", "--tariff",
                         d + "/tariff.csv", "--realization", d + "/realization.csv", "--out", dir.file("c")});
    ASSERT_EQ(c.code, cli::kOk) << c.err;
    Outcome demo = run_cli({"demo", "-q", "--fixture", "single_scenario", "--out", dir.file("d")});
    ASSERT_EQ(demo.code, cli::kOk) << demo.err;
    EXPECT_EQ(testutil::read_file(dir.file("c/comparison.csv")),
              testutil::read_file(dir.file("d/comparison/comparison.csv")));
}

TEST(Cli, BundledDataMatchesFixtureGenerator) {
    for (const char* name : {"three_bus", "three_bus_congested", "single_scenario", "feeder15"}) {
        testutil::TempDir dir(std::string("cli_fx_") + name);
        Outcome o = run_cli({"fixture", "-q", "--name", name, "--out", dir.str()});
        ASSERT_EQ(o.code, cli::kOk) << o.err;
        for (const auto& f : lines_of(testutil::read_file(dir.file("manifest.txt"))))
            EXPECT_EQ(testutil::read_file(dir.file(f)), testutil::read_file(data_dir(name) + "/" + f))
                << name << "/" << f;
    }
}

TEST(Reports, EmptyRealTimeRunWritesNothing) {
    testutil::TempDir dir("rep_empty");
    RealTimeRun run;
    reports::Manifest m = reports::emit_real_time(run, dir.file("rt"));
    EXPECT_TRUE(m.files.empty());
    m = reports::write_manifest(m, dir.file("rt"));
    EXPECT_EQ(m.files, std::vector<std::string>{"manifest.txt"});
    EXPECT_EQ(testutil::read_file(dir.file("rt/manifest.txt")), "");
}

TEST(Reports, DayAheadFilesRoundTrip) {
    testutil::TempDir dir("rep_da");
    Study st = fixtures::three_bus(true);
    DayAheadResult da = run_day_ahead(st.net, st.households, st.scenarios, st.tariff, st.params);
    reports::emit_day_ahead(da, dir.str());

    auto schedule = reports::load_schedule_json(dir.file("schedule.json"));
    ASSERT_EQ(schedule.size(), da.schedule.size());
    for (const auto& [id, b] : da.schedule) {
        EXPECT_EQ(schedule.at(id).soc, b.soc);
        EXPECT_EQ(schedule.at(id).charge, b.charge);
        EXPECT_EQ(schedule.at(id).discharge, b.discharge);
        EXPECT_EQ(schedule.at(id).mode, b.mode);
    }

    auto slack = reports::load_slack_csv(dir.file("slack.csv"));
    double total = 0.0;
    for (const auto& r : slack) {
        EXPECT_EQ(r.xi, da.slack.flow_slack[static_cast<std::size_t>(r.scenario)][static_cast<std::size_t>(r.slot)]
                                           [static_cast<std::size_t>(r.bus)]);
        EXPECT_EQ(r.phi, da.slack.volt_slack[static_cast<std::size_t>(r.scenario)][static_cast<std::size_t>(r.slot)]
                                            [static_cast<std::size_t>(r.bus)]);
        total += r.xi + r.phi;
    }
    EXPECT_NEAR(total, da.slack.total(), 1e-12);

    auto flows = reports::load_flows_csv(dir.file("day_ahead_flows.csv"));
    ASSERT_FALSE(flows.empty());
    for (const auto& r : flows) {
        const SlotFlows& f = da.flows[static_cast<std::size_t>(r.scenario)][static_cast<std::size_t>(r.slot)];
        const std::size_t b = static_cast<std::size_t>(r.bus);
        // The root row carries the substation injection.
        EXPECT_EQ(r.p_flow, b == 0 ? f.g0_p : f.f_p[b]);
        EXPECT_EQ(r.q_flow, b == 0 ? f.g0_q : f.f_q[b]);
        EXPECT_EQ(r.voltage_sq, f.v[b]);
        EXPECT_NEAR(r.voltage * r.voltage, r.voltage_sq, 1e-12);
    }

    auto prices = reports::load_prices_csv(dir.file("prices.csv"));
    ASSERT_FALSE(prices.empty());
    bool saw_gmp = false;
    for (const auto& p : prices) {
        EXPECT_TRUE(p.kind == "nodal" || p.kind == "elp" || p.kind == "gmp") << p.kind;
        if (p.kind == "gmp") {
            saw_gmp = true;
            EXPECT_EQ(p.value, grid_mid_price(st.tariff, p.slot));
        }
    }
    EXPECT_TRUE(saw_gmp);
}

TEST(Reports, RealTimeAndComparisonRoundTrip) {
    testutil::TempDir dir("rep_rt");
    Study st = fixtures::three_bus(false);
    Comparison c = compare_methods(st.net, st.households, st.scenarios, st.tariff, st.params, st.realizations);
    reports::emit_comparison(c, dir.str());
    auto rows = reports::load_comparison_csv(dir.file("comparison.csv"));
    ASSERT_EQ(rows.size(), c.runs.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        EXPECT_EQ(rows[i].method, to_string(c.runs[i].method));
        EXPECT_EQ(rows[i].profit, c.runs[i].profit);
        EXPECT_EQ(rows[i].congested_slots, c.runs[i].congested_slots);
        EXPECT_EQ(rows[i].per_day_profit, c.runs[i].per_day_profit);
    }

    const RealTimeRun& rt = *c.run(Method::proposed).real_time;
    RealTimeRun back = reports::parse_real_time_json(reports::real_time_json(rt));
    ASSERT_EQ(back.slots.size(), rt.slots.size());
    EXPECT_EQ(back.complete, rt.complete);
    EXPECT_EQ(back.total_cost(), rt.total_cost());
    EXPECT_EQ(reports::real_time_json(back), reports::real_time_json(rt));
}
