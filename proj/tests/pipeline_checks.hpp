#pragma once

// Random small studies and market invariant checks shared by the property suite and the
// acceptance runner. Checks return an empty string on success, else the first violation.
#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dermarket/dayahead.hpp"
#include "dermarket/fixtures.hpp"
#include "dermarket/realtime.hpp"
#include "dermarket/scenarios.hpp"
#include "dermarket/settlement.hpp"

namespace testutil {

inline constexpr double kInvariantTol = 1e-7;

inline dermarket::Study random_study(std::mt19937_64& rng) {
    using namespace dermarket;
    std::uniform_int_distribution<int> n_buses(2, 4), n_hh(2, 3), horizon(2, 3), n_q(1, 2);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    Study s;
    s.name = "random";
    const int buses = n_buses(rng);
    s.net = fixtures::chain_network(buses, 0.005 + 0.02 * u(rng), 0.005 + 0.02 * u(rng), 1.0, 0.01);
    const int T = horizon(rng);
    const int H = n_hh(rng);
    for (int n = 0; n < H; ++n) {
        HouseholdSpec h;
        h.id = "h" + std::to_string(n);
        h.bus = 1 + n % (buses - 1);
        if (u(rng) < 0.25) {
            h.battery = BatterySpec::none();
        } else {
            h.battery.eta = 0.85 + 0.15 * u(rng);
            h.battery.e_min = 0.2 * u(rng);
            h.battery.e_max = h.battery.e_min + 1.0 + 3.0 * u(rng);
            h.battery.p_max = 0.5 + u(rng);
            h.battery.e_initial = h.battery.e_min + (h.battery.e_max - h.battery.e_min) * u(rng);
            // Terminal level reachable with 80% of the power over the horizon.
            const double up = 0.8 * h.battery.eta * h.battery.p_max * T;
            const double down = 0.8 * h.battery.p_max * T / h.battery.eta;
            const double lo = std::max(h.battery.e_min, h.battery.e_initial - down);
            const double hi = std::min(h.battery.e_max, h.battery.e_initial + up);
            h.battery.e_final = lo + (hi - lo) * u(rng);
        }
        s.households.push_back(h);
    }
    // Partners: a path, plus the closing edge for three households half of the time.
    for (int n = 0; n + 1 < H; ++n) {
        s.households[static_cast<std::size_t>(n)].partners.push_back("h" + std::to_string(n + 1));
        s.households[static_cast<std::size_t>(n + 1)].partners.push_back("h" + std::to_string(n));
    }
    if (H == 3 && u(rng) < 0.5) {
        s.households[0].partners.push_back("h2");
        s.households[2].partners.push_back("h0");
    }

    for (int t = 0; t < T; ++t) {
        const double sell = 0.02 + 0.08 * u(rng);
        s.tariff.sell.push_back(sell);
        s.tariff.buy.push_back(sell + 0.05 + 0.3 * u(rng));
    }

    const int q = n_q(rng);
    const std::vector<double> levels = equally_spaced_quantiles(q);
    std::vector<QuantileScenarioSet> sets;
    for (const auto& h : s.households) {
        for (SeriesKind kind : {SeriesKind::pv, SeriesKind::demand}) {
            QuantileScenarioSet set;
            set.household = h.id;
            set.kind = kind;
            set.quantiles = levels;
            const double scale = kind == SeriesKind::pv ? 2.0 : 1.5;
            std::vector<double> base(static_cast<std::size_t>(T));
            for (auto& v : base) v = scale * u(rng);
            for (int j = 0; j < q; ++j) {
                std::vector<double> row = base;
                for (auto& v : row) v *= 0.8 + 0.4 * j / std::max(1, q - 1);
                set.trajectories.push_back(row);
            }
            sets.push_back(set);
        }
    }
    s.scenarios = ScenarioBook(sets);

    for (const auto& h : s.households) {
        Realization r;
        r.household = h.id;
        for (double v : s.scenarios.pv(h.id).trajectories.front()) r.pv.push_back(v * (0.7 + 0.6 * u(rng)));
        for (double v : s.scenarios.demand(h.id).trajectories.back()) r.demand.push_back(v * (0.7 + 0.6 * u(rng)));
        s.realizations.push_back(r);
    }
    s.params.k_max = 2;
    s.params.theta = 0.05 + 5.0 * u(rng);
    return s;
}

namespace detail {

template <typename... Parts>
std::string describe(const Parts&... parts) {
    std::ostringstream os;
    os.precision(17);
    (os << ... << parts);
    return os.str();
}

inline double ledger_net(const dermarket::TradeLedger& l) {
    double v = l.grid_sell - l.grid_buy;
    for (const auto& [m, x] : l.sell) v += x;
    for (const auto& [m, x] : l.buy) v -= x;
    return v;
}

}  // namespace detail

/// Partner volumes match on both sides and net trades are antisymmetric, bit for bit.
inline std::string check_reciprocity(const std::map<std::string, dermarket::TradeLedger>& slot,
                                     const std::vector<dermarket::HouseholdSpec>& households) {
    for (const auto& h : households)
        for (const auto& m : h.partners) {
            const auto& a = slot.at(h.id);
            const auto& b = slot.at(m);
            if (a.sell.at(m) != b.buy.at(h.id))
                return detail::describe("reciprocity ", h.id, "->", m, ": ", a.sell.at(m), " vs ", b.buy.at(h.id));
            if (a.net(m) != -b.net(h.id)) return detail::describe("antisymmetry ", h.id, "<->", m);
        }
    return {};
}

/// Battery plan: complementarity, per-slot and whole-horizon SOC telescoping, SOC bounds.
inline std::string check_battery_plan(const dermarket::BatteryState& b, const dermarket::BatterySpec& spec,
                                      const std::string& id) {
    const std::size_t T = b.charge.size();
    double sum = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        if (std::min(b.charge[t], b.discharge[t]) > kInvariantTol)
            return detail::describe("complementarity ", id, " slot ", t, ": ", b.charge[t], " / ", b.discharge[t]);
        const double step = (spec.eta * b.charge[t] - b.discharge[t] / spec.eta) * spec.dt;
        if (std::abs(b.soc[t + 1] - b.soc[t] - step) > kInvariantTol)
            return detail::describe("soc step ", id, " slot ", t);
        if (b.soc[t + 1] < spec.e_min - kInvariantTol || b.soc[t + 1] > spec.e_max + kInvariantTol)
            return detail::describe("soc bounds ", id, " slot ", t, ": ", b.soc[t + 1]);
        sum += step;
    }
    if (std::abs(b.soc.back() - b.soc.front() - sum) > kInvariantTol)
        return detail::describe("soc telescoping ", id, ": ", b.soc.back() - b.soc.front(), " vs ", sum);
    return {};
}

/// Day-ahead result: battery plans, reciprocity per scenario and slot, household balance,
/// nondecreasing bilateral prices across iterations.
inline std::string check_day_ahead(const dermarket::Study& st, const dermarket::DayAheadResult& da) {
    using namespace dermarket;
    const int T = st.tariff.horizon();
    for (const auto& h : st.households)
        if (auto e = check_battery_plan(da.schedule.at(h.id), h.battery, h.id); !e.empty()) return e;
    for (int s = 0; s < da.grid.size(); ++s) {
        const auto ss = static_cast<std::size_t>(s);
        const auto u = static_cast<std::size_t>(da.grid.pv_level[ss]);
        const auto d = static_cast<std::size_t>(da.grid.demand_level[ss]);
        for (int t = 0; t < T; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            std::map<std::string, TradeLedger> slot;
            for (const auto& [id, rows] : da.trades[ss]) slot[id] = rows[ts];
            if (auto e = check_reciprocity(slot, st.households); !e.empty())
                return detail::describe(e, " (scenario ", s, ", slot ", t, ")");
            for (const auto& h : st.households) {
                const BatteryState& b = da.schedule.at(h.id);
                const double expected = st.scenarios.pv(h.id).trajectories[u][ts] + b.discharge[ts] -
                                        st.scenarios.demand(h.id).trajectories[d][ts] - b.charge[ts];
                if (std::abs(da.net_injection[ss].at(h.id)[ts] - expected) > kInvariantTol)
                    return detail::describe("balance ", h.id, " scenario ", s, " slot ", t);
            }
        }
    }
    for (const auto& tr : da.trace)
        if (tr.min_elp_increase < 0.0) return detail::describe("bilateral price fell after iteration ", tr.k);
    return {};
}

/// Real-time run: SOC threading (exact), complementarity and telescoping of the executed
/// battery power, household balance on realized data, reciprocity.
inline std::string check_real_time(const dermarket::Study& st, const std::map<std::string, dermarket::BatteryState>& plan,
                                   const dermarket::RealTimeRun& rt) {
    using namespace dermarket;
    std::map<std::string, const Realization*> real;
    for (const auto& r : st.realizations) real[r.household] = &r;
    for (const auto& h : st.households) {
        const BatteryState& p = plan.at(h.id);
        if (rt.slots.front().adjustments.at(h.id).soc_start != p.soc.front())
            return detail::describe("initial soc ", h.id);
        for (std::size_t t = 0; t < rt.slots.size(); ++t) {
            const auto& a = rt.slots[t].adjustments.at(h.id);
            if (t > 0 && a.soc_start != rt.slots[t - 1].adjustments.at(h.id).soc_end)
                return detail::describe("soc threading ", h.id, " slot ", t);
            const double ch = p.charge[t] + a.charge, dis = p.discharge[t] + a.discharge;
            if (std::min(ch, dis) > kInvariantTol) return detail::describe("complementarity ", h.id, " slot ", t);
            if (std::abs(a.soc_end - a.soc_start - (h.battery.eta * ch - dis / h.battery.eta) * h.battery.dt) >
                kInvariantTol)
                return detail::describe("soc step ", h.id, " slot ", t);
            const double expected = real.at(h.id)->pv[t] + dis - real.at(h.id)->demand[t] - ch;
            if (std::abs(detail::ledger_net(rt.slots[t].trades.at(h.id)) - expected) > kInvariantTol)
                return detail::describe("balance ", h.id, " slot ", t);
        }
    }
    for (const auto& slot : rt.slots)
        if (auto e = check_reciprocity(slot.trades, st.households); !e.empty())
            return detail::describe(e, " (slot ", slot.t, ")");
    return {};
}

/// Slot and household sums of a settlement, compared with == in the record's own order.
inline std::string check_settlement_additivity(const dermarket::SettlementRecord& r) {
    const std::size_t N = r.household_costs.size();
    const std::size_t T = r.community_costs.size();
    double total = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
        double slot = 0.0;
        for (std::size_t n = 0; n < N; ++n) slot += r.household_costs[n][t];
        if (r.community_costs[t] != slot) return detail::describe("community cost slot ", t);
        total += slot;
    }
    if (r.community_total != total) return "community total";
    for (std::size_t n = 0; n < N; ++n) {
        double h = 0.0;
        for (std::size_t t = 0; t < T; ++t) h += r.household_costs[n][t];
        if (r.household_totals[n] != h) return detail::describe("household total ", n);
    }
    return {};
}

/// Scenario rows are nondecreasing in the quantile level at every slot.
inline std::string check_scenarios_monotone(const dermarket::ScenarioBook& book) {
    for (const auto& set : book.sets())
        for (std::size_t j = 1; j < set.trajectories.size(); ++j)
            for (std::size_t t = 0; t < set.trajectories[j].size(); ++t)
                if (set.trajectories[j - 1][t] > set.trajectories[j][t])
                    return detail::describe("quantile crossing ", set.household, " level ", j, " slot ", t);
    return {};
}

}  // namespace testutil
