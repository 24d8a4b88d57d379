#include "dermarket/realtime.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <spdlog/spdlog.h>

#include "dermarket/errors.hpp"

namespace dermarket {

using solver::ConicProgram;
using solver::LinExpr;
using solver::Solution;
using solver::Var;

double soc_deviation(double soc_da_next, double soc_rt_next) { return soc_da_next - soc_rt_next; }

int ScheduleAudit::violated_slots() const {
    std::set<int> all(flow_slots.begin(), flow_slots.end());
    all.insert(voltage_slots.begin(), voltage_slots.end());
    return static_cast<int>(all.size());
}

double RealTimeRun::total_cost() const {
    double c = 0.0;
    for (const auto& s : slots) c += s.cost();
    return c;
}

std::vector<int> RealTimeRun::inexact_slots(double tol) const {
    std::vector<int> out;
    for (const auto& s : slots)
        if (s.cone_gap > tol) out.push_back(s.t);
    return out;
}

double RealTimeRun::total_abs_delta_e() const {
    double sum = 0.0;
    for (const auto& s : slots)
        for (const auto& [id, a] : s.adjustments) sum += std::abs(a.delta_e);
    return sum;
}

double RealTimeRun::iglp(int t, const std::string& n, const std::string& m, TradeSide side) const {
    auto key = std::minmax(n, m);
    auto it = std::find(pairs.begin(), pairs.end(), std::pair<std::string, std::string>(key.first, key.second));
    if (it == pairs.end()) throw MissingPrice("no bilateral price for pair '" + n + "', '" + m + "'");
    auto slot = std::find_if(slots.begin(), slots.end(), [t](const RealTimeSlot& s) { return s.t == t; });
    if (slot == slots.end()) throw MissingPrice("no real-time prices for slot " + std::to_string(t));
    return compose_iglp(slot->elp.at(static_cast<std::size_t>(it - pairs.begin())), slot->gmp, side);
}

namespace {

std::map<std::string, Realization> index_realizations(const std::vector<HouseholdSpec>& households,
                                                      const std::vector<Realization>& realizations, int horizon) {
    std::map<std::string, Realization> out;
    for (const auto& r : realizations) {
        if (static_cast<int>(r.pv.size()) != horizon || static_cast<int>(r.demand.size()) != horizon)
            throw DimensionMismatch("realization of '" + r.household + "' does not cover " + std::to_string(horizon) +
                                    " slots");
        out[r.household] = r;
    }
    for (const auto& h : households)
        if (!out.count(h.id)) throw ConfigError("no realization for household '" + h.id + "'");
    return out;
}

void check_plan(const std::vector<HouseholdSpec>& households, const std::map<std::string, BatteryState>& plan,
                int horizon) {
    for (const auto& h : households) {
        auto it = plan.find(h.id);
        if (it == plan.end()) throw ConfigError("no day-ahead battery plan for household '" + h.id + "'");
        const auto& st = it->second;
        if (static_cast<int>(st.charge.size()) != horizon || static_cast<int>(st.discharge.size()) != horizon ||
            static_cast<int>(st.mode.size()) != horizon || static_cast<int>(st.soc.size()) != horizon + 1)
            throw DimensionMismatch("battery plan of '" + h.id + "' does not cover the horizon");
    }
}

}  // namespace

ConicProgram build_p3(const NetworkModel& net_in, const std::vector<HouseholdSpec>& households, int t,
                      const std::map<std::string, Realization>& realized, const std::map<std::string, double>& soc,
                      const std::map<std::string, BatteryState>& plan, const TariffSchedule& tariff,
                      const MarketParams& params, bool redecide_mode, P3Layout* layout) {
    const NetworkModel net = with_households(net_in, households);
    if (t < 0 || t >= tariff.horizon()) throw DimensionMismatch("slot " + std::to_string(t) + " outside the tariff");
    const auto ts = static_cast<std::size_t>(t);
    const double dt = tariff.dt;
    ConicProgram prog("P3.t" + std::to_string(t));
    P3Layout local;
    P3Layout& lay = layout ? *layout : local;
    lay = P3Layout{};

    std::vector<LinExpr> hp(net.num_buses()), hq(net.num_buses());
    const double kw = net.kw_per_pu();
    for (const auto& h : households) {
        const BatterySpec& b = h.battery;
        const BatteryState& st = plan.at(h.id);
        const Realization& r = realized.at(h.id);
        const std::string p = h.id + ".";
        double mode = std::round(st.mode[ts]);
        Var c = prog.add_variable(p + "charge", 0.0, b.p_max);
        Var d = prog.add_variable(p + "discharge", 0.0, b.p_max);
        if (redecide_mode) {
            Var m = prog.add_binary(p + "psi");
            if (b.p_max == 0.0) prog.fix(m, 0.0);
            prog.add_le(LinExpr(c) - b.p_max * LinExpr(m), 0.0);
            prog.add_le(LinExpr(d) + b.p_max * LinExpr(m), b.p_max);
            prog.add_complementarity(c, d, m);
        } else {
            prog.set_bounds(c, 0.0, b.p_max * mode);
            prog.set_bounds(d, 0.0, b.p_max * (1.0 - mode));
        }
        Var e = prog.add_variable(p + "soc_next", b.e_min, b.e_max);
        LinExpr rec = LinExpr(e);
        rec.add(c, -b.eta * dt).add(d, dt / b.eta);
        prog.add_eq(rec, soc.at(h.id), p + "soc");
        Var up = prog.add_variable(p + "dev_up", 0.0);
        Var down = prog.add_variable(p + "dev_down", 0.0);
        prog.add_eq(LinExpr(up) - down - e, -st.soc[ts + 1], p + "dev");
        prog.add_objective(params.theta * (LinExpr(up) + down));

        std::vector<LinExpr> net_battery = {LinExpr(d) - c};
        auto x = model::add_exchange(prog, h, net_battery, {r.pv[ts]}, {r.demand[ts]}, "rt");
        prog.add_objective(x.grid_buy[0], tariff.buy[ts] * dt);
        prog.add_objective(x.grid_sell[0], -tariff.sell[ts] * dt);
        hp[static_cast<std::size_t>(h.bus)] += (1.0 / kw) * x.p_net[0];
        hq[static_cast<std::size_t>(h.bus)] += x.q_net[0] / kw;

        lay.charge[h.id] = c;
        lay.discharge[h.id] = d;
        lay.soc_next[h.id] = e;
        lay.dev_up[h.id] = up;
        lay.dev_down[h.id] = down;
        lay.exchange.emplace(h.id, std::move(x));
    }
    std::map<std::string, const model::ExchangeVars*> xs;
    for (const auto& [id, x] : lay.exchange) xs[id] = &x;
    model::enforce_reciprocity(prog, households, xs);

    lay.network = model::add_network_slot(prog, net, hp, hq, "net", false);
    prog.add_objective(lay.network.g0_p, tariff.buy[ts] * kw * dt);
    return prog;
}

ScheduleAudit audit_schedule(const NetworkModel& net_in, const std::vector<HouseholdSpec>& households,
                             const std::map<std::string, BatteryState>& plan,
                             const std::vector<Realization>& realizations, const TariffSchedule& tariff,
                             const MarketParams& params, const solver::SolveOptions& opts) {
    const NetworkModel net = with_households(net_in, households);
    const int T = tariff.horizon();
    auto real = index_realizations(households, realizations, T);
    check_plan(households, plan, T);
    std::map<std::string, HouseholdInjection> inj;
    for (const auto& h : households) {
        const auto& r = real.at(h.id);
        const auto& st = plan.at(h.id);
        HouseholdInjection hi;
        for (int t = 0; t < T; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            hi.p.push_back(r.pv[ts] - r.demand[ts] + st.discharge[ts] - st.charge[ts]);
            hi.q.push_back(-h.reactive_ratio * r.demand[ts]);
        }
        inj[h.id] = std::move(hi);
    }
    P2Layout lay;
    ConicProgram prog = build_p2(net, {bus_injections(net, inj, T)}, tariff, params, &lay);
    Solution sol = solver::solve_continuous(prog, opts);
    ScheduleAudit audit;
    for (int t = 0; t < T; ++t) {
        SlotFlows f = model::read_flows(net, lay.slots[0][static_cast<std::size_t>(t)], sol);
        const double xi = *std::max_element(f.xi.begin(), f.xi.end());
        const double phi = *std::max_element(f.phi.begin(), f.phi.end());
        audit.max_flow_slack = std::max(audit.max_flow_slack, xi);
        audit.max_voltage_slack = std::max(audit.max_voltage_slack, phi);
        if (xi > params.eps_slack) audit.flow_slots.push_back(t);
        if (phi > params.eps_slack) audit.voltage_slots.push_back(t);
        audit.flows.push_back(std::move(f));
    }
    return audit;
}

RealTimeRun run_real_time(const NetworkModel& net_in, const std::vector<HouseholdSpec>& households,
                          const std::map<std::string, BatteryState>& plan, const std::vector<Realization>& realizations,
                          const TariffSchedule& tariff, const MarketParams& params, const RealTimeOptions& options) {
    params.validate();
    tariff.validate();
    check_partners(households);
    const NetworkModel net = with_households(net_in, households);
    const int T = tariff.horizon();
    auto real = index_realizations(households, realizations, T);
    check_plan(households, plan, T);

    RealTimeRun run;
    for (const auto& h : households) run.households.push_back(h.id);
    run.pairs = partner_pairs(households);
    if (options.audit) run.audit = audit_schedule(net, households, plan, realizations, tariff, params, options.solver);

    std::map<std::string, double> soc;
    for (const auto& h : households) soc[h.id] = plan.at(h.id).soc.front();
    const double kw = net.kw_per_pu();
    for (int t = 0; t < T; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        P3Layout lay;
        Solution sol;
        try {
            ConicProgram p3 =
                build_p3(net, households, t, real, soc, plan, tariff, params, options.redecide_mode, &lay);
            sol = options.redecide_mode ? solver::solve_mixed(p3, options.solver)
                                        : solver::solve_continuous(p3, options.solver);
        } catch (const Error& e) {
            run.failed_slot = t;
            run.failure = "slot " + std::to_string(t) + ": " + e.what();
            spdlog::error("real-time market stopped: {}", run.failure);
            return run;
        }

        RealTimeSlot slot;
        slot.t = t;
        for (const auto& h : households) {
            const auto& x = lay.exchange.at(h.id);
            TradeLedger tl;
            tl.grid_buy = std::max(0.0, sol.value(x.grid_buy[0]));
            tl.grid_sell = std::max(0.0, sol.value(x.grid_sell[0]));
            for (const auto& m : h.partners) {
                tl.sell[m] = std::max(0.0, sol.value(x.sell.at(m)[0]));
                tl.buy[m] = std::max(0.0, sol.value(x.buy.at(m)[0]));
            }
            slot.trades[h.id] = std::move(tl);

            const BatteryState& st = plan.at(h.id);
            const BatterySpec& b = h.battery;
            const double c = std::max(0.0, sol.value(lay.charge.at(h.id)));
            const double d = std::max(0.0, sol.value(lay.discharge.at(h.id)));
            RealTimeAdjustment a;
            a.charge = c - st.charge[ts];
            a.discharge = d - st.discharge[ts];
            a.soc_start = soc[h.id];
            a.soc_end = a.soc_start + (b.eta * c - d / b.eta) * tariff.dt;
            a.soc_planned = st.soc[ts + 1];
            a.delta_e = soc_deviation(a.soc_planned, a.soc_end);
            slot.penalty += params.theta * std::abs(a.delta_e);
            soc[h.id] = a.soc_end;
            slot.adjustments[h.id] = a;
        }
        consolidate_ledgers(slot.trades, households);
        for (const auto& [id, tl] : slot.trades)
            slot.household_cost += (tariff.buy[ts] * tl.grid_buy - tariff.sell[ts] * tl.grid_sell) * tariff.dt;

        slot.flows = model::read_flows(net, lay.network, sol);
        slot.duals = model::read_duals(net, lay.network, sol);
        slot.cone_gap = model::cone_gap(net, slot.flows);
        if (slot.cone_gap > 1e-5)
            spdlog::warn("real-time slot {}: network relaxation not exact (cone gap {:.3g})", t, slot.cone_gap);
        slot.network_cost = tariff.buy[ts] * slot.flows.g0_p * kw * tariff.dt;

        const auto bus_price = nodal_prices(net, slot.flows, slot.duals);
        const double to_kwh = 1.0 / (kw * tariff.dt);
        for (const auto& h : households) slot.nodal[h.id] = bus_price[static_cast<std::size_t>(h.bus)] * to_kwh;
        for (const auto& [n, m] : run.pairs)
            slot.elp.push_back(update_bilateral_price(0.0, params.rho, slot.nodal.at(n), slot.nodal.at(m)));
        slot.gmp = grid_mid_price(tariff, t);

        for (std::size_t i = 1; i < net.num_buses(); ++i) {
            const Line* line = net.line_to(static_cast<int>(i));
            const auto& f = slot.flows;
            const double app = std::hypot(f.f_p[i], f.f_q[i]);
            const double recv = std::hypot(f.f_p[i] - line->r * f.l[i], f.f_q[i] - line->x * f.l[i]);
            if (std::max(app, recv) >= line->s_max * (1.0 - 1e-6)) slot.binding.push_back(lay.network.tag_fwd[i]);
            const Bus& bus = net.buses[i];
            if (f.v[i] <= bus.v_min_sq + 1e-7 || f.v[i] >= bus.v_max_sq - 1e-7)
                slot.binding.push_back("voltage" + std::to_string(i));
        }
        run.slots.push_back(std::move(slot));
    }
    run.complete = true;
    return run;
}

}  // namespace dermarket
