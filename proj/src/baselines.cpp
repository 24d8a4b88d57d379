#include "dermarket/baselines.hpp"

#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "dermarket/errors.hpp"

namespace dermarket {

using solver::ConicProgram;
using solver::LinExpr;
using solver::Solution;

std::string to_string(Method m) {
    switch (m) {
        case Method::offline: return "offline";
        case Method::point_forecast: return "point_forecast";
        case Method::proposed: return "proposed";
    }
    return "unknown";
}

namespace {

const Realization& realization_of(const std::vector<Realization>& realizations, const std::string& id, int T) {
    for (const auto& r : realizations) {
        if (r.household != id) continue;
        if (static_cast<int>(r.pv.size()) != T || static_cast<int>(r.demand.size()) != T)
            throw DimensionMismatch("realization of '" + id + "' does not cover " + std::to_string(T) + " slots");
        return r;
    }
    throw ConfigError("no realization for household '" + id + "'");
}

std::vector<double> per_day(const std::vector<double>& slot_cost, int slots_per_day) {
    std::vector<double> out;
    for (std::size_t t = 0; t < slot_cost.size(); ++t) {
        if (t % static_cast<std::size_t>(slots_per_day) == 0) out.push_back(0.0);
        out.back() -= slot_cost[t];
    }
    return out;
}

}  // namespace

ConicProgram build_p0_offline(const NetworkModel& net_in, const std::vector<HouseholdSpec>& households,
                              const std::vector<Realization>& realizations, const TariffSchedule& tariff,
                              P0Layout* layout) {
    tariff.validate();
    check_partners(households);
    const NetworkModel net = with_households(net_in, households);
    const int T = tariff.horizon();
    const double dt = tariff.dt;
    const double kw = net.kw_per_pu();
    ConicProgram prog("P0");
    P0Layout local;
    P0Layout& lay = layout ? *layout : local;
    lay = P0Layout{};

    std::vector<std::vector<LinExpr>> hp(static_cast<std::size_t>(T), std::vector<LinExpr>(net.num_buses()));
    std::vector<std::vector<LinExpr>> hq = hp;
    for (const auto& h : households) {
        const Realization& r = realization_of(realizations, h.id, T);
        auto block = model::build_household_block(prog, h, {r.pv}, {r.demand});
        const auto& x = block.scenarios.front();
        for (int t = 0; t < T; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            prog.add_objective(x.grid_buy[ts], tariff.buy[ts] * dt);
            prog.add_objective(x.grid_sell[ts], -tariff.sell[ts] * dt);
            hp[ts][static_cast<std::size_t>(h.bus)] += (1.0 / kw) * x.p_net[ts];
            hq[ts][static_cast<std::size_t>(h.bus)] += x.q_net[ts] / kw;
        }
        lay.blocks.emplace(h.id, std::move(block));
    }
    std::map<std::string, const model::ExchangeVars*> xs;
    for (const auto& [id, b] : lay.blocks) xs[id] = &b.scenarios.front();
    model::enforce_reciprocity(prog, households, xs);

    for (int t = 0; t < T; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        auto vars = model::add_network_slot(prog, net, hp[ts], hq[ts], "t" + std::to_string(t), false);
        prog.add_objective(vars.g0_p, tariff.buy[ts] * kw * dt);
        lay.slots.push_back(std::move(vars));
    }
    return prog;
}

OfflineResult solve_offline(const NetworkModel& net_in, const std::vector<HouseholdSpec>& households,
                            const std::vector<Realization>& realizations, const TariffSchedule& tariff,
                            const solver::SolveOptions& opts) {
    const NetworkModel net = with_households(net_in, households);
    P0Layout lay;
    ConicProgram prog = build_p0_offline(net, households, realizations, tariff, &lay);
    OfflineResult res;
    Solution sol;
    try {
        sol = solver::solve_mixed(prog, opts);
    } catch (const BranchLimit& e) {
        spdlog::warn("offline problem: {}; reporting the relaxation bound", e.what());
        sol = solver::solve_continuous(prog, opts);
        res.relaxation_bound = true;
    }
    res.cost = sol.objective_value;

    const int T = tariff.horizon();
    const double kw = net.kw_per_pu();
    res.trades.assign(static_cast<std::size_t>(T), {});
    res.per_slot_cost.assign(static_cast<std::size_t>(T), 0.0);
    for (const auto& h : households) {
        const auto& block = lay.blocks.at(h.id);
        BatteryState st;
        for (const auto& v : block.battery.soc) st.soc.push_back(sol.value(v));
        const auto& x = block.scenarios.front();
        for (int t = 0; t < T; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            st.charge.push_back(std::max(0.0, sol.value(block.battery.charge[ts])));
            st.discharge.push_back(std::max(0.0, sol.value(block.battery.discharge[ts])));
            st.mode.push_back(std::round(sol.value(block.battery.mode[ts])));
            TradeLedger tl;
            tl.grid_buy = std::max(0.0, sol.value(x.grid_buy[ts]));
            tl.grid_sell = std::max(0.0, sol.value(x.grid_sell[ts]));
            for (const auto& m : h.partners) {
                tl.sell[m] = std::max(0.0, sol.value(x.sell.at(m)[ts]));
                tl.buy[m] = std::max(0.0, sol.value(x.buy.at(m)[ts]));
            }
            res.per_slot_cost[ts] += (tariff.buy[ts] * tl.grid_buy - tariff.sell[ts] * tl.grid_sell) * tariff.dt;
            res.trades[ts][h.id] = std::move(tl);
        }
        res.schedule.emplace(h.id, std::move(st));
    }
    for (auto& slot : res.trades) consolidate_ledgers(slot, households);
    for (int t = 0; t < T; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        res.flows.push_back(model::read_flows(net, lay.slots[ts], sol));
        res.per_slot_cost[ts] += tariff.buy[ts] * res.flows.back().g0_p * kw * tariff.dt;
    }
    return res;
}

MethodRun run_offline(const NetworkModel& net_in, const std::vector<HouseholdSpec>& households,
                      const std::vector<Realization>& realizations, const TariffSchedule& tariff,
                      const BaselineOptions& options) {
    const NetworkModel net = with_households(net_in, households);
    OfflineResult off = solve_offline(net, households, realizations, tariff, options.offline);
    MethodRun run;
    run.method = Method::offline;
    run.horizon = tariff.horizon();
    run.profit = -off.cost;
    run.relaxation_bound = off.relaxation_bound;
    run.per_slot_cost = off.per_slot_cost;
    run.per_day_profit = per_day(run.per_slot_cost, options.slots_per_day);
    for (const auto& f : off.flows) {
        bool over = false;
        for (std::size_t i = 1; i < net.num_buses(); ++i) {
            const Line* line = net.line_to(static_cast<int>(i));
            const double lim = line->s_max * (1.0 + 1e-6);
            if (std::hypot(f.f_p[i], f.f_q[i]) > lim ||
                std::hypot(f.f_p[i] - line->r * f.l[i], f.f_q[i] - line->x * f.l[i]) > lim)
                over = true;
        }
        if (over) ++run.congested_slots;
    }
    return run;
}

namespace {

MethodRun execute(Method method, const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                  const ScenarioBook& scenarios, const TariffSchedule& tariff, const MarketParams& params,
                  const std::vector<Realization>& realizations, const BaselineOptions& options) {
    MethodRun run;
    run.method = method;
    run.horizon = tariff.horizon();
    DayAheadResult da = run_day_ahead(net, households, scenarios, tariff, params, options.day_ahead);
    RealTimeOptions rto = options.real_time;
    rto.audit = true;
    RealTimeRun rt = run_real_time(net, households, da.schedule, realizations, tariff, params, rto);
    if (!rt.complete)
        throw Infeasible(to_string(method) + " real-time market failed: " + rt.failure, "");
    for (const auto& s : rt.slots) run.per_slot_cost.push_back(s.cost());
    run.profit = rt.profit();
    run.congested_slots = rt.audit.violated_slots();
    run.per_day_profit = per_day(run.per_slot_cost, options.slots_per_day);
    run.day_ahead = std::move(da);
    run.real_time = std::move(rt);
    return run;
}

}  // namespace

MethodRun run_proposed(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                       const ScenarioBook& scenarios, const TariffSchedule& tariff, const MarketParams& params,
                       const std::vector<Realization>& realizations, const BaselineOptions& options) {
    return execute(Method::proposed, net, households, scenarios, tariff, params, realizations, options);
}

MethodRun run_point_forecast(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                             const ScenarioBook& scenarios, const TariffSchedule& tariff, const MarketParams& params,
                             const std::vector<Realization>& realizations, const BaselineOptions& options) {
    return execute(Method::point_forecast, net, households, scenarios.median(), tariff, params, realizations,
                   options);
}

double optimality_gap(double offline_profit, double method_profit, double tol) {
    const double gap = offline_profit - method_profit;
    if (gap < -tol * std::max(1.0, std::abs(offline_profit)))
        throw NegativeGap("method profit " + std::to_string(method_profit) + " exceeds the offline bound " +
                          std::to_string(offline_profit));
    return gap;
}

double gap_reduction(double gap_a, double gap_b) {
    if (gap_b == 0.0) throw DomainError("gap reduction against a zero gap");
    return 1.0 - gap_a / gap_b;
}

const MethodRun& Comparison::run(Method m) const {
    for (const auto& r : runs)
        if (r.method == m) return r;
    throw ConfigError("comparison has no " + to_string(m) + " run");
}

Comparison assemble_comparison(std::vector<MethodRun> runs) {
    Comparison c;
    c.runs = std::move(runs);
    const double off = c.run(Method::offline).profit;
    c.gap_proposed = optimality_gap(off, c.run(Method::proposed).profit);
    c.gap_point = optimality_gap(off, c.run(Method::point_forecast).profit);
    c.reduction = c.gap_point > 0.0 ? gap_reduction(c.gap_proposed, c.gap_point)
                                    : std::numeric_limits<double>::quiet_NaN();
    return c;
}

Comparison compare_methods(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                           const ScenarioBook& scenarios, const TariffSchedule& tariff, const MarketParams& params,
                           const std::vector<Realization>& realizations, const BaselineOptions& options) {
    std::vector<MethodRun> runs;
    runs.push_back(run_offline(net, households, realizations, tariff, options));
    runs.push_back(run_proposed(net, households, scenarios, tariff, params, realizations, options));
    runs.push_back(run_point_forecast(net, households, scenarios, tariff, params, realizations, options));
    return assemble_comparison(std::move(runs));
}

}  // namespace dermarket
