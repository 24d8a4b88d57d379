#include "dermarket/cli.hpp"

#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "dermarket/baselines.hpp"
#include "dermarket/errors.hpp"
#include "dermarket/fixtures.hpp"
#include "dermarket/reports.hpp"
#include "dermarket/settlement.hpp"

namespace dermarket::cli {

namespace fs = std::filesystem;

namespace {

struct Inputs {
    std::string network, households, scenarios, tariff, realization, params, schedule, real_time, history;
    std::optional<double> theta;
    std::string out = "out";
    std::string dump_lp;
    bool no_flows = false;
    bool redecide_mode = false;
    std::uint64_t seed = 2024;
    int quantiles = 9;
    std::string fixture = "feeder15";
};

MarketParams market_params(const Inputs& in) {
    MarketParams p = in.params.empty() ? MarketParams{} : load_params(in.params);
    if (in.theta) p.theta = *in.theta;
    p.validate();
    return p;
}

DayAheadOptions day_ahead_options(const Inputs& in) {
    DayAheadOptions o;
    o.dump_lp_dir = in.dump_lp;
    o.keep_flows = !in.no_flows;
    if (!o.dump_lp_dir.empty()) fs::create_directories(o.dump_lp_dir);
    return o;
}

void finish(reports::Manifest m, const std::string& dir, std::ostream& out) {
    m = reports::write_manifest(std::move(m), dir);
    for (const auto& f : m.files) out << (fs::path(dir) / f).string() << '\n';
}

int cmd_validate(const Inputs& in, std::ostream& out, std::ostream& err) {
    const NetworkModel net = load_network(in.network);
    const auto households = load_households(in.households);
    std::vector<std::string> problems = validate_radial(net);
    try {
        check_partners(households);
        with_households(net, households);
    } catch (const Error& e) {
        problems.push_back(e.what());
    }
    if (!problems.empty()) {
        for (const auto& p : problems) err << "invalid: " << p << '\n';
        return kValidation;
    }
    out << "OK\n";
    return kOk;
}

int cmd_gen_scenarios(const Inputs& in, std::ostream& out) {
    const auto history = load_history_csv(in.history);
    ScenarioBook book(generate_empirical_scenarios(history, in.quantiles));
    write_scenarios_csv(book, in.out);
    out << in.out << '\n';
    return kOk;
}

int cmd_day_ahead(const Inputs& in, std::ostream& out) {
    const NetworkModel net = load_network(in.network);
    const auto households = load_households(in.households);
    const ScenarioBook scenarios = load_scenarios_csv(in.scenarios);
    const TariffSchedule tariff = load_tariff_csv(in.tariff);
    const DayAheadResult r =
        run_day_ahead(net, households, scenarios, tariff, market_params(in), day_ahead_options(in));
    finish(reports::emit_day_ahead(r, in.out), in.out, out);
    return kOk;
}

int cmd_real_time(const Inputs& in, std::ostream& out) {
    const NetworkModel net = load_network(in.network);
    const auto households = load_households(in.households);
    const auto plan = reports::load_schedule_json(in.schedule);
    const auto realizations = load_realizations_csv(in.realization);
    const TariffSchedule tariff = load_tariff_csv(in.tariff);
    RealTimeOptions o;
    o.redecide_mode = in.redecide_mode;
    const RealTimeRun run = run_real_time(net, households, plan, realizations, tariff, market_params(in), o);
    finish(reports::emit_real_time(run, in.out), in.out, out);
    if (!run.complete) throw Infeasible("real-time market stopped: " + run.failure, "");
    return kOk;
}

int cmd_settle(const Inputs& in, std::ostream& out) {
    const RealTimeRun run = reports::load_real_time_json(in.real_time);
    const TariffSchedule tariff = load_tariff_csv(in.tariff);
    finish(reports::emit_settlement(settle_real_time(run, tariff), in.out), in.out, out);
    return kOk;
}

BaselineOptions baseline_options(const Inputs& in) {
    BaselineOptions o;
    o.day_ahead = day_ahead_options(in);
    o.real_time.redecide_mode = in.redecide_mode;
    return o;
}

int cmd_compare(const Inputs& in, std::ostream& out) {
    const NetworkModel net = load_network(in.network);
    const auto households = load_households(in.households);
    const ScenarioBook scenarios = load_scenarios_csv(in.scenarios);
    const TariffSchedule tariff = load_tariff_csv(in.tariff);
    const auto realizations = load_realizations_csv(in.realization);
    const Comparison c =
        compare_methods(net, households, scenarios, tariff, market_params(in), realizations, baseline_options(in));
    finish(reports::emit_comparison(c, in.out), in.out, out);
    return kOk;
}

int cmd_fixture(const Inputs& in, std::ostream& out) {
    const Study s = fixtures::by_name(in.fixture, in.seed, in.quantiles);
    write_study(s, in.out);
    write_history_csv(fixtures::synthetic_history(s, 30, in.seed), (fs::path(in.out) / "history.csv").string());
    finish({{"network.json", "households.json", "params.json", "scenarios.csv", "tariff.csv", "realization.csv",
             "history.csv"}},
           in.out, out);
    return kOk;
}

int cmd_demo(const Inputs& in, std::ostream& out) {
    Study s = fixtures::by_name(in.fixture, in.seed, in.quantiles);
    if (in.theta) s.params.theta = *in.theta;
    const fs::path root(in.out);
    reports::Manifest all;
    auto under = [&](const std::string& sub, const reports::Manifest& m) {
        for (const auto& f : m.files) all.files.push_back(sub + "/" + f);
    };

    write_study(s, (root / "inputs").string());
    // Reload so the run uses exactly what was written.
    const Study study = load_study((root / "inputs").string());
    under("inputs", {{"network.json", "households.json", "params.json", "scenarios.csv", "tariff.csv",
                      "realization.csv"}});

    const BaselineOptions opts = baseline_options(in);
    MethodRun offline = run_offline(study.net, study.households, study.realizations, study.tariff, opts);
    MethodRun proposed = run_proposed(study.net, study.households, study.scenarios, study.tariff, study.params,
                                      study.realizations, opts);
    MethodRun point = run_point_forecast(study.net, study.households, study.scenarios, study.tariff, study.params,
                                         study.realizations, opts);

    under("day_ahead", reports::emit_day_ahead(*proposed.day_ahead, (root / "day_ahead").string()));
    under("real_time", reports::emit_real_time(*proposed.real_time, (root / "real_time").string()));
    under("settlement", reports::emit_settlement(settle_real_time(*proposed.real_time, study.tariff),
                                                 (root / "settlement").string()));
    under("point_forecast",
          reports::emit_real_time(*point.real_time, (root / "point_forecast").string()));
    const Comparison c = assemble_comparison({std::move(offline), std::move(proposed), std::move(point)});
    under("comparison", reports::emit_comparison(c, (root / "comparison").string()));
    finish(std::move(all), in.out, out);
    return kOk;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto logger = std::make_shared<spdlog::logger>("dermarket", sink);
    logger->set_pattern("[%l] %v");
    auto previous = spdlog::default_logger();
    spdlog::set_default_logger(logger);
    struct Restore {
        std::shared_ptr<spdlog::logger> p;
        ~Restore() { spdlog::set_default_logger(p); }
    } restore{previous};

    CLI::App app{"Bilateral distribution energy market simulator"};
    app.require_subcommand(1);
    app.fallthrough();
    Inputs in;
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

    auto net_opts = [&](CLI::App* c) {
        c->add_option("--network", in.network, "Feeder JSON")->required();
        c->add_option("--households", in.households, "Household JSON")->required();
    };
    auto market_opts = [&](CLI::App* c) {
        c->add_option("--params", in.params, "Market parameter JSON");
        c->add_option("--theta", in.theta, "SOC deviation price (currency/kWh)");
    };
    auto out_opt = [&](CLI::App* c, const std::string& help) { c->add_option("--out", in.out, help); };

    CLI::App* validate = app.add_subcommand("validate", "Check a feeder and its households");
    net_opts(validate);

    CLI::App* gen = app.add_subcommand("gen-scenarios", "Empirical quantile scenarios from history");
    gen->add_option("--history", in.history, "History CSV")->required();
    gen->add_option("--quantiles", in.quantiles, "Number of quantile levels")->check(CLI::PositiveNumber);
    gen->add_option("--out", in.out, "Scenario CSV to write")->required();

    CLI::App* da = app.add_subcommand("day-ahead", "Iterative day-ahead market");
    net_opts(da);
    da->add_option("--scenarios", in.scenarios, "Scenario CSV")->required();
    da->add_option("--tariff", in.tariff, "Tariff CSV")->required();
    market_opts(da);
    out_opt(da, "Report directory");
    da->add_option("--dump-lp", in.dump_lp, "Write every solved program in LP format here");
    da->add_flag("--no-flows", in.no_flows, "Skip per-scenario flow reports");

    CLI::App* rt = app.add_subcommand("real-time", "Slot-by-slot real-time clearing");
    net_opts(rt);
    rt->add_option("--day-ahead", in.schedule, "schedule.json from day-ahead")->required();
    rt->add_option("--realization", in.realization, "Realized pv/demand CSV")->required();
    rt->add_option("--tariff", in.tariff, "Tariff CSV")->required();
    market_opts(rt);
    rt->add_flag("--redecide-mode", in.redecide_mode, "Re-optimize battery charge/discharge mode each slot");
    out_opt(rt, "Report directory");

    CLI::App* st = app.add_subcommand("settle", "End-of-day payments from a real-time report");
    st->add_option("--real-time", in.real_time, "real_time.json")->required();
    st->add_option("--tariff", in.tariff, "Tariff CSV")->required();
    out_opt(st, "Report directory");

    CLI::App* cmp = app.add_subcommand("compare", "Offline, proposed and point-forecast methods");
    net_opts(cmp);
    cmp->add_option("--scenarios", in.scenarios, "Scenario CSV")->required();
    cmp->add_option("--tariff", in.tariff, "Tariff CSV")->required();
    cmp->add_option("--realization", in.realization, "Realized pv/demand CSV")->required();
    market_opts(cmp);
    cmp->add_option("--dump-lp", in.dump_lp, "Write every solved program in LP format here");
    cmp->add_flag("--redecide-mode", in.redecide_mode, "Re-optimize battery mode in real time");
    out_opt(cmp, "Report directory");

    CLI::App* demo = app.add_subcommand("demo", "Bundled fixture end to end");
    demo->add_option("--fixture", in.fixture, "feeder15, three_bus, three_bus_congested or single_scenario");
    demo->add_option("--seed", in.seed, "Fixture seed");
    demo->add_option("--quantiles", in.quantiles, "Quantile levels per series")->check(CLI::PositiveNumber);
    demo->add_option("--theta", in.theta, "SOC deviation price (currency/kWh)");
    out_opt(demo, "Report directory");

    CLI::App* fx = app.add_subcommand("fixture", "Write a bundled fixture's input files");
    fx->add_option("--name", in.fixture, "feeder15, three_bus, three_bus_congested or single_scenario");
    fx->add_option("--seed", in.seed, "Fixture seed");
    fx->add_option("--quantiles", in.quantiles, "Quantile levels per series")->check(CLI::PositiveNumber);
    fx->add_option("--out", in.out, "Directory to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        err << app.help();
        return kUsage;
    }
    logger->set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::warn : spdlog::level::info);

    try {
        if (*validate) return cmd_validate(in, out, err);
        if (*gen) return cmd_gen_scenarios(in, out);
        if (*da) return cmd_day_ahead(in, out);
        if (*rt) return cmd_real_time(in, out);
        if (*st) return cmd_settle(in, out);
        if (*cmp) return cmd_compare(in, out);
        if (*demo) return cmd_demo(in, out);
        if (*fx) return cmd_fixture(in, out);
    } catch (const SolverError& e) {
        err << "solver failure: " << e.what() << '\n';
        return kSolver;
    } catch (const NegativeGap& e) {
        err << "inconsistent results: " << e.what() << '\n';
        return kSolver;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kValidation;
    }
    return kUsage;
}

}  // namespace dermarket::cli
