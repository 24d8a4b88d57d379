#include "dermarket/community.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dermarket/errors.hpp"

namespace dermarket {

using nlohmann::json;
using solver::ConicProgram;
using solver::LinExpr;
using solver::Var;

void BatterySpec::validate(const std::string& owner) const {
    const std::string who = owner.empty() ? "battery" : "battery of '" + owner + "'";
    if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError(who + ": eta must lie in (0, 1]");
    if (!(e_min >= 0.0 && e_min <= e_initial && e_initial <= e_max))
        throw ValidationError(who + ": need 0 <= e_min <= e_initial <= e_max");
    if (!(e_min <= e_final && e_final <= e_max)) throw ValidationError(who + ": need e_min <= e_final <= e_max");
    if (!(p_max >= 0.0)) throw ValidationError(who + ": p_max must be nonnegative");
    if (!(dt > 0.0)) throw ValidationError(who + ": dt must be positive");
}

BatterySpec BatterySpec::none(double level, double dt) { return {1.0, level, level, 0.0, level, level, dt}; }

double TradeLedger::net(const std::string& partner) const {
    double s = sell.count(partner) ? sell.at(partner) : 0.0;
    double b = buy.count(partner) ? buy.at(partner) : 0.0;
    return s - b;
}

double battery_step(const BatterySpec& spec, double soc, double charge, double discharge) {
    double next = soc + (spec.eta * charge - discharge / spec.eta) * spec.dt;
    constexpr double tol = 1e-9;
    if (next < spec.e_min - tol || next > spec.e_max + tol)
        throw BoundsError("state of charge " + std::to_string(next) + " kWh outside [" + std::to_string(spec.e_min) +
                          ", " + std::to_string(spec.e_max) + "]");
    return next;
}

void check_partners(const std::vector<HouseholdSpec>& households) {
    std::map<std::string, std::set<std::string>> partners;
    for (const auto& h : households) {
        if (!partners.emplace(h.id, std::set<std::string>(h.partners.begin(), h.partners.end())).second)
            throw ConfigError("duplicate household id '" + h.id + "'");
        if (partners[h.id].size() != h.partners.size()) throw ConfigError("household '" + h.id + "' repeats a partner");
    }
    for (const auto& [id, ps] : partners) {
        for (const auto& p : ps) {
            if (p == id) throw ConfigError("household '" + id + "' lists itself as a partner");
            auto it = partners.find(p);
            if (it == partners.end()) throw ConfigError("household '" + id + "' has unknown partner '" + p + "'");
            if (!it->second.count(id))
                throw ConfigError("partnership '" + id + "' -> '" + p + "' is not reciprocated");
        }
    }
}

double net_position(const TradeLedger& ledger) {
    double p = ledger.grid_sell - ledger.grid_buy;
    for (const auto& [m, v] : ledger.sell) p += v;
    for (const auto& [m, v] : ledger.buy) p -= v;
    return p;
}

void consolidate_ledgers(std::map<std::string, TradeLedger>& ledgers, const std::vector<HouseholdSpec>& households) {
    constexpr double tiny = 1e-12;
    std::vector<const HouseholdSpec*> hh;
    std::map<std::string, std::size_t> index;
    for (const auto& h : households) {
        if (!ledgers.count(h.id)) throw UnknownHousehold("no ledger for household '" + h.id + "'");
        index[h.id] = hh.size();
        hh.push_back(&h);
    }
    const std::size_t n = hh.size();
    std::vector<double> pos(n);
    for (std::size_t i = 0; i < n; ++i) pos[i] = net_position(ledgers.at(hh[i]->id));

    // Max flow from surplus households to deficit partners. Nodes: source, households, sink.
    const std::size_t src = n, snk = n + 1, N = n + 2;
    std::vector<std::vector<double>> cap(N, std::vector<double>(N, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        if (pos[i] > tiny) cap[src][i] = pos[i];
        if (pos[i] < -tiny) cap[i][snk] = -pos[i];
        if (pos[i] <= tiny) continue;
        for (const auto& m : hh[i]->partners) {
            const std::size_t j = index.at(m);
            if (pos[j] < -tiny) cap[i][j] = std::numeric_limits<double>::infinity();
        }
    }
    std::vector<std::vector<double>> flow(N, std::vector<double>(N, 0.0));
    for (;;) {
        std::vector<std::size_t> prev(N, N);
        std::vector<std::size_t> queue = {src};
        prev[src] = src;
        for (std::size_t q = 0; q < queue.size() && prev[snk] == N; ++q) {
            const std::size_t u = queue[q];
            for (std::size_t v = 0; v < N; ++v)
                if (prev[v] == N && cap[u][v] - flow[u][v] > tiny) {
                    prev[v] = u;
                    queue.push_back(v);
                }
        }
        if (prev[snk] == N) break;
        double push = std::numeric_limits<double>::infinity();
        for (std::size_t v = snk; v != src; v = prev[v]) push = std::min(push, cap[prev[v]][v] - flow[prev[v]][v]);
        for (std::size_t v = snk; v != src; v = prev[v]) {
            flow[prev[v]][v] += push;
            flow[v][prev[v]] -= push;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        TradeLedger& l = ledgers.at(hh[i]->id);
        double p2p = 0.0;
        for (const auto& m : hh[i]->partners) {
            const std::size_t j = index.at(m);
            const double f = std::max(0.0, flow[i][j]);
            const double g = std::max(0.0, flow[j][i]);
            l.sell[m] = f;
            l.buy[m] = g;
            p2p += f - g;
        }
        const double rest = pos[i] - p2p;
        l.grid_sell = std::max(0.0, rest);
        l.grid_buy = std::max(0.0, -rest);
    }
}

void reconcile_reciprocity(std::map<std::string, std::vector<TradeLedger>>& ledgers) {
    for (auto& [n, rows] : ledgers) {
        for (std::size_t t = 0; t < rows.size(); ++t) {
            for (auto& [m, sold] : rows[t].sell) {
                if (!(n < m)) continue;
                auto other = ledgers.find(m);
                if (other == ledgers.end() || t >= other->second.size()) continue;
                TradeLedger& lm = other->second[t];
                double& bought_by_m = lm.buy[n];
                const double ab = std::max(0.0, 0.5 * (sold + bought_by_m));
                sold = bought_by_m = ab;
                double& sold_by_m = lm.sell[n];
                double& bought = rows[t].buy[m];
                const double ba = std::max(0.0, 0.5 * (sold_by_m + bought));
                sold_by_m = bought = ba;
            }
        }
    }
}

std::vector<std::pair<std::string, std::string>> partner_pairs(const std::vector<HouseholdSpec>& households) {
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& h : households)
        for (const auto& p : h.partners) pairs.insert(std::minmax(h.id, p));
    return {pairs.begin(), pairs.end()};
}

std::vector<HouseholdSpec> parse_households(const std::string& json_text) {
    std::vector<HouseholdSpec> out;
    try {
        json doc = json::parse(json_text);
        if (!doc.is_array()) throw ParseError("households file must hold a JSON array");
        for (const json& j : doc) {
            HouseholdSpec h;
            h.id = j.at("id").get<std::string>();
            h.bus = j.at("bus").get<int>();
            if (j.contains("partners")) h.partners = j.at("partners").get<std::vector<std::string>>();
            h.reactive_ratio = j.value("reactive_ratio", 0.10);
            if (j.contains("battery") && !j.at("battery").is_null()) {
                const json& b = j.at("battery");
                h.battery.eta = b.value("eta", h.battery.eta);
                h.battery.e_min = b.value("e_min", h.battery.e_min);
                h.battery.e_max = b.value("e_max", h.battery.e_max);
                h.battery.p_max = b.value("p_max", h.battery.p_max);
                h.battery.e_initial = b.value("e_initial", h.battery.e_initial);
                h.battery.e_final = b.value("e_final", h.battery.e_final);
                h.battery.dt = b.value("dt", h.battery.dt);
            } else {
                h.battery = BatterySpec::none();
            }
            h.battery.validate(h.id);
            if (h.reactive_ratio < 0.0) throw ValidationError("household '" + h.id + "' has negative reactive_ratio");
            out.push_back(std::move(h));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("households JSON: ") + e.what());
    }
    check_partners(out);
    return out;
}

std::vector<HouseholdSpec> load_households(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read households file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_households(ss.str());
}

std::string households_to_json(const std::vector<HouseholdSpec>& households) {
    json doc = json::array();
    for (const auto& h : households) {
        doc.push_back({{"id", h.id},
                       {"bus", h.bus},
                       {"partners", h.partners},
                       {"reactive_ratio", h.reactive_ratio},
                       {"battery",
                        {{"eta", h.battery.eta},
                         {"e_min", h.battery.e_min},
                         {"e_max", h.battery.e_max},
                         {"p_max", h.battery.p_max},
                         {"e_initial", h.battery.e_initial},
                         {"e_final", h.battery.e_final},
                         {"dt", h.battery.dt}}}});
    }
    return doc.dump(2);
}

namespace model {

BatteryVars add_battery(ConicProgram& prog, const HouseholdSpec& spec, int horizon) {
    const BatterySpec& b = spec.battery;
    b.validate(spec.id);
    BatteryVars v;
    const std::string p = spec.id + ".";
    for (int t = 0; t <= horizon; ++t) {
        Var e = prog.add_variable(p + "soc" + std::to_string(t), b.e_min, b.e_max);
        if (t == 0) prog.fix(e, b.e_initial);
        if (t == horizon) prog.fix(e, b.e_final);
        v.soc.push_back(e);
    }
    for (int t = 0; t < horizon; ++t) {
        const std::string ts = std::to_string(t);
        Var c = prog.add_variable(p + "bc" + ts, 0.0, b.p_max);
        Var d = prog.add_variable(p + "bd" + ts, 0.0, b.p_max);
        Var m = prog.add_binary(p + "psi" + ts);
        if (b.p_max == 0.0) prog.fix(m, 0.0);
        prog.add_le(LinExpr(c) - b.p_max * LinExpr(m), 0.0);
        prog.add_le(LinExpr(d) + b.p_max * LinExpr(m), b.p_max);
        prog.add_complementarity(c, d, m);
        LinExpr soc = LinExpr(v.soc[static_cast<std::size_t>(t) + 1]) - v.soc[static_cast<std::size_t>(t)];
        soc.add(c, -b.eta * b.dt).add(d, b.dt / b.eta);
        prog.add_eq(soc, 0.0);
        v.charge.push_back(c);
        v.discharge.push_back(d);
        v.mode.push_back(m);
    }
    return v;
}

ExchangeVars add_exchange(ConicProgram& prog, const HouseholdSpec& spec, const std::vector<LinExpr>& battery_net,
                          const std::vector<double>& pv, const std::vector<double>& demand, const std::string& label) {
    const std::size_t T = battery_net.size();
    if (pv.size() != T || demand.size() != T)
        throw DimensionMismatch("trajectories of '" + spec.id + "' do not match the horizon " + std::to_string(T));
    ExchangeVars x;
    const std::string p = spec.id + "." + label + ".";
    for (std::size_t t = 0; t < T; ++t) {
        const std::string ts = std::to_string(t);
        Var gb = prog.add_variable(p + "b0_" + ts, 0.0);
        Var gs = prog.add_variable(p + "s0_" + ts, 0.0);
        x.grid_buy.push_back(gb);
        x.grid_sell.push_back(gs);
        LinExpr exchange = LinExpr(gs) - gb;
        for (const auto& m : spec.partners) {
            Var s = prog.add_variable(p + "s_" + m + "_" + ts, 0.0);
            Var b = prog.add_variable(p + "b_" + m + "_" + ts, 0.0);
            x.sell[m].push_back(s);
            x.buy[m].push_back(b);
            exchange.add(s, 1.0).add(b, -1.0);
        }
        // P^P = pv + discharge - demand - charge = grid and P2P exports.
        prog.add_eq(exchange - battery_net[t], pv[t] - demand[t]);
        x.p_net.push_back(exchange);
        x.q_net.push_back(-spec.reactive_ratio * demand[t]);
    }
    return x;
}

HouseholdBlock build_household_block(ConicProgram& prog, const HouseholdSpec& spec,
                                     const std::vector<std::vector<double>>& pv,
                                     const std::vector<std::vector<double>>& demand) {
    if (pv.size() != demand.size() || pv.empty())
        throw DimensionMismatch("household '" + spec.id + "' needs one pv and one demand trajectory per scenario");
    const int T = static_cast<int>(pv.front().size());
    HouseholdBlock block;
    block.battery = add_battery(prog, spec, T);
    std::vector<LinExpr> net;
    for (int t = 0; t < T; ++t)
        net.push_back(LinExpr(block.battery.discharge[static_cast<std::size_t>(t)]) -
                      block.battery.charge[static_cast<std::size_t>(t)]);
    for (std::size_t s = 0; s < pv.size(); ++s)
        block.scenarios.push_back(add_exchange(prog, spec, net, pv[s], demand[s], "s" + std::to_string(s)));
    return block;
}

int enforce_reciprocity(ConicProgram& prog, const std::vector<HouseholdSpec>& households,
                        const std::map<std::string, const ExchangeVars*>& scenario) {
    int rows = 0;
    for (const auto& [a, b] : partner_pairs(households)) {
        const ExchangeVars* xa = scenario.at(a);
        const ExchangeVars* xb = scenario.at(b);
        const auto& sab = xa->sell.at(b);
        const auto& bab = xa->buy.at(b);
        const auto& sba = xb->sell.at(a);
        const auto& bba = xb->buy.at(a);
        for (std::size_t t = 0; t < sab.size(); ++t) {
            prog.add_eq(LinExpr(sab[t]) - bba[t], 0.0);
            prog.add_eq(LinExpr(sba[t]) - bab[t], 0.0);
            rows += 2;
        }
    }
    return rows;
}

}  // namespace model
}  // namespace dermarket
