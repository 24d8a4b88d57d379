#include "dermarket/dayahead.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "csv.hpp"
#include "dermarket/errors.hpp"

namespace dermarket {

using nlohmann::json;
using solver::ConicProgram;
using solver::LinExpr;
using solver::Solution;
using solver::Var;

// ---- parameters and tariff --------------------------------------------------------

void MarketParams::validate() const {
    if (!(varpi > 0.0)) throw ValidationError("varpi must be positive");
    if (!(tau > 0.0)) throw ValidationError("tau must be positive");
    if (!(rho > 0.0)) throw ValidationError("rho must be positive");
    if (k_max < 1) throw ValidationError("k_max must be at least 1");
    if (!(eps_cost > 0.0) || !(eps_slack > 0.0)) throw ValidationError("convergence tolerances must be positive");
    if (!(theta >= 0.0)) throw ValidationError("theta must be nonnegative");
}

MarketParams parse_params(const std::string& json_text) {
    MarketParams p;
    try {
        json j = json::parse(json_text);
        if (!j.is_object()) throw ParseError("parameters file must hold a JSON object");
        p.varpi = j.value("varpi", p.varpi);
        p.tau = j.value("tau", p.tau);
        p.rho = j.value("rho", p.rho);
        p.k_max = j.value("k_max", p.k_max);
        if (j.contains("eps")) p.eps_cost = p.eps_slack = j.at("eps").get<double>();
        p.eps_cost = j.value("eps_cost", p.eps_cost);
        p.eps_slack = j.value("eps_slack", p.eps_slack);
        p.theta = j.value("theta", p.theta);
    } catch (const json::exception& e) {
        throw ParseError(std::string("parameters JSON: ") + e.what());
    }
    p.validate();
    return p;
}

MarketParams load_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read parameters file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_params(ss.str());
}

void TariffSchedule::validate() const {
    if (buy.empty()) throw ValidationError("tariff is empty");
    if (buy.size() != sell.size()) throw DimensionMismatch("tariff buy and sell columns differ in length");
    if (!(dt > 0.0)) throw ValidationError("tariff slot length must be positive");
    for (std::size_t t = 0; t < buy.size(); ++t)
        if (!(buy[t] >= sell[t] && sell[t] >= 0.0))
            throw ValidationError("tariff slot " + std::to_string(t) + " violates buy >= sell >= 0");
}

TariffSchedule load_tariff_csv(const std::string& path) {
    csv::Table tab = csv::read(path);
    auto col = [&](const std::string& name) -> int {
        auto it = std::find(tab.header.begin(), tab.header.end(), name);
        return it == tab.header.end() ? -1 : static_cast<int>(it - tab.header.begin());
    };
    const int cs = col("slot"), cb = col("buy"), cl = col("sell"), cd = col("dt");
    if (cs < 0 || cb < 0 || cl < 0) throw ParseError(path + ": tariff needs columns slot, buy, sell");
    TariffSchedule tariff;
    for (std::size_t r = 0; r < tab.rows.size(); ++r) {
        const auto& row = tab.rows[r];
        const std::string where = path + ":" + std::to_string(tab.line_numbers[r]);
        if (csv::to_int(row[static_cast<std::size_t>(cs)], where) != static_cast<int>(r))
            throw ParseError(where + ": slots must be listed as 0, 1, 2, ...");
        tariff.buy.push_back(csv::to_double(row[static_cast<std::size_t>(cb)], where));
        tariff.sell.push_back(csv::to_double(row[static_cast<std::size_t>(cl)], where));
        if (cd >= 0) {
            double dt = csv::to_double(row[static_cast<std::size_t>(cd)], where);
            if (r > 0 && dt != tariff.dt) throw ParseError(where + ": slot length must be uniform");
            tariff.dt = dt;
        }
    }
    tariff.validate();
    return tariff;
}

void write_tariff_csv(const TariffSchedule& tariff, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    const bool with_dt = tariff.dt != 1.0;
    out << "slot,buy,sell" << (with_dt ? ",dt" : "") << "\n";
    for (int t = 0; t < tariff.horizon(); ++t) {
        out << t << "," << csv::fmt(tariff.buy[static_cast<std::size_t>(t)]) << ","
            << csv::fmt(tariff.sell[static_cast<std::size_t>(t)]);
        if (with_dt) out << "," << csv::fmt(tariff.dt);
        out << "\n";
    }
}

// ---- network rows -----------------------------------------------------------------

namespace model {

NetworkSlotVars add_network_slot(ConicProgram& prog, const NetworkModel& net, const std::vector<LinExpr>& h_p,
                                 const std::vector<LinExpr>& h_q, const std::string& label, bool soft) {
    const std::size_t n = net.num_buses();
    if (h_p.size() != n || h_q.size() != n)
        throw DimensionMismatch("injections cover " + std::to_string(h_p.size()) + " buses, network has " +
                                std::to_string(n));
    NetworkSlotVars x;
    x.f_p.resize(n);
    x.f_q.resize(n);
    x.l.resize(n);
    x.v.resize(n);
    x.tag_p.resize(n);
    x.tag_q.resize(n);
    x.tag_fwd.resize(n);
    x.tag_bwd.resize(n);
    if (soft) {
        x.xi.resize(n);
        x.phi.resize(n);
    }
    const std::string p = label + ".";
    x.g0_p = prog.add_variable(p + "g0p", net.slack.g_p_min, net.slack.g_p_max);
    x.g0_q = prog.add_variable(p + "g0q", net.slack.g_q_min, net.slack.g_q_max);
    x.v[0] = prog.add_variable(p + "v0", 1.0, 1.0);
    for (std::size_t i = 1; i < n; ++i) {
        const std::string is = std::to_string(i);
        const Bus& b = net.buses[i];
        x.f_p[i] = prog.add_variable(p + "fp" + is);
        x.f_q[i] = prog.add_variable(p + "fq" + is);
        x.l[i] = prog.add_variable(p + "l" + is, 0.0);
        if (soft) {
            x.v[i] = prog.add_variable(p + "v" + is, 0.0);
            x.xi[i] = prog.add_variable(p + "xi" + is, 0.0);
            x.phi[i] = prog.add_variable(p + "phi" + is, 0.0, b.v_min_sq);
        } else {
            x.v[i] = prog.add_variable(p + "v" + is, b.v_min_sq, b.v_max_sq);
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const std::string is = std::to_string(i);
        const Bus& b = net.buses[i];
        LinExpr ap = i == 0 ? LinExpr(x.g0_p) : LinExpr(x.f_p[i]);
        LinExpr aq = i == 0 ? LinExpr(x.g0_q) : LinExpr(x.f_q[i]);
        if (i > 0) {
            const Line* line = net.line_to(static_cast<int>(i));
            ap.add(x.l[i], -line->r);
            aq.add(x.l[i], -line->x);
        }
        for (int c : b.children) {
            ap.add(x.f_p[static_cast<std::size_t>(c)], -1.0);
            aq.add(x.f_q[static_cast<std::size_t>(c)], -1.0);
        }
        ap.add(x.v[i], -b.g_shunt);
        aq.add(x.v[i], b.b_shunt);
        // Power arriving at the bus equals what it passes on plus its net withdrawal -h.
        x.tag_p[i] = p + "bal_p" + is;
        x.tag_q[i] = p + "bal_q" + is;
        prog.add_eq(ap + h_p[i], 0.0, x.tag_p[i]);
        prog.add_eq(aq + h_q[i], 0.0, x.tag_q[i]);
    }

    for (std::size_t i = 1; i < n; ++i) {
        const std::string is = std::to_string(i);
        const Bus& b = net.buses[i];
        const Line* line = net.line_to(static_cast<int>(i));
        const Var va = x.v[static_cast<std::size_t>(*b.parent)];
        LinExpr drop = LinExpr(x.v[i]) - va;
        drop.add(x.f_p[i], 2.0 * line->r).add(x.f_q[i], 2.0 * line->x);
        drop.add(x.l[i], -(line->r * line->r + line->x * line->x));
        prog.add_eq(drop, 0.0, p + "drop" + is);

        // (f_p^2 + f_q^2) <= v_parent * l
        prog.add_cone(LinExpr(va) + x.l[i], {2.0 * LinExpr(x.f_p[i]), 2.0 * LinExpr(x.f_q[i]), LinExpr(va) - x.l[i]},
                      p + "cone" + is);

        const double s2 = line->s_max * line->s_max;
        LinExpr bound = soft ? LinExpr(x.xi[i]).add_constant(s2) : LinExpr(s2);
        x.tag_fwd[i] = p + "lim_f" + is;
        x.tag_bwd[i] = p + "lim_b" + is;
        prog.add_quadratic_le({LinExpr(x.f_p[i]), LinExpr(x.f_q[i])}, bound, x.tag_fwd[i]);
        LinExpr recv_p = LinExpr(x.f_p[i]).add(x.l[i], -line->r);
        LinExpr recv_q = LinExpr(x.f_q[i]).add(x.l[i], -line->x);
        prog.add_quadratic_le({recv_p, recv_q}, bound, x.tag_bwd[i]);

        if (soft) {
            prog.add_ge(LinExpr(x.v[i]) + x.phi[i], b.v_min_sq, p + "vlo" + is);
            prog.add_le(LinExpr(x.v[i]) - x.phi[i], b.v_max_sq, p + "vhi" + is);
        }
    }
    return x;
}

SlotFlows read_flows(const NetworkModel& net, const NetworkSlotVars& vars, const Solution& sol) {
    const std::size_t n = net.num_buses();
    SlotFlows f;
    f.g0_p = sol.value(vars.g0_p);
    f.g0_q = sol.value(vars.g0_q);
    f.f_p.assign(n, 0.0);
    f.f_q.assign(n, 0.0);
    f.l.assign(n, 0.0);
    f.v.assign(n, 0.0);
    f.xi.assign(n, 0.0);
    f.phi.assign(n, 0.0);
    f.v[0] = sol.value(vars.v[0]);
    for (std::size_t i = 1; i < n; ++i) {
        f.f_p[i] = sol.value(vars.f_p[i]);
        f.f_q[i] = sol.value(vars.f_q[i]);
        f.l[i] = sol.value(vars.l[i]);
        f.v[i] = sol.value(vars.v[i]);
        if (!vars.xi.empty()) {
            f.xi[i] = std::max(0.0, sol.value(vars.xi[i]));
            f.phi[i] = std::max(0.0, sol.value(vars.phi[i]));
        }
    }
    return f;
}

SlotDuals read_duals(const NetworkModel& net, const NetworkSlotVars& vars, const Solution& sol) {
    const std::size_t n = net.num_buses();
    SlotDuals d;
    d.gamma.assign(n, 0.0);
    d.mu.assign(n, 0.0);
    d.eta_fwd.assign(n, 0.0);
    d.eta_bwd.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        d.gamma[i] = sol.dual(vars.tag_p[i]);
        d.mu[i] = sol.dual(vars.tag_q[i]);
        if (i > 0) {
            d.eta_fwd[i] = sol.dual(vars.tag_fwd[i]);
            d.eta_bwd[i] = sol.dual(vars.tag_bwd[i]);
        }
    }
    return d;
}

}  // namespace model

// ---- pricing ----------------------------------------------------------------------

DlmpCoefficients dlmp_coefficients(double fp, double fq, double l, double r, double x) {
    DlmpCoefficients c;
    const double s2 = fp * fp + fq * fq;
    const double d = s2 * x - l * fq * (r * r + x * x);
    c.denominator = d;
    if (std::abs(d) < kDlmpDegenerateTol || !std::isfinite(d)) {
        c.degenerate = true;
        return c;
    }
    const double common = s2 * x + l * fq * (r * r - x * x);
    c.c1 = (common - 2.0 * l * fp * r * x) / d;
    c.c2 = (s2 * r - l * fq * (r * r + x * x)) / d;
    c.c3 = (common + 2.0 * l * fq * r * x) / d;
    const double flow = 2.0 * (fp * fp * fp * r - fq * fq * fq * x) + 2.0 * fp * fq * (fp * r - fq * x);
    c.c4 = flow / d;
    const double rx2 = r * r - x;
    c.c5 = (flow + 2.0 * l * l * (fp * r * r * r + fq * x * x * x) -
            kC5LossCurvatureWeight * 4.0 * l * fq * rx2 * rx2 + 4.0 * l * r * x * (fp * fp - fq * fq) +
            2.0 * l * l * r * x * (fp * r - fq * x)) /
           d;
    return c;
}

double model::cone_gap(const NetworkModel& net, const SlotFlows& flows) {
    double worst = 0.0;
    for (std::size_t i = 1; i < net.num_buses(); ++i) {
        const double va = flows.v[static_cast<std::size_t>(*net.buses[i].parent)];
        const double l = flows.l[i];
        const double norm = std::sqrt(4.0 * flows.f_p[i] * flows.f_p[i] + 4.0 * flows.f_q[i] * flows.f_q[i] +
                                      (va - l) * (va - l));
        worst = std::max(worst, va + l - norm);
    }
    return worst;
}

double scenario_node_price(const DlmpCoefficients& c, const NodeDuals& d) {
    if (c.degenerate) return d.gamma_parent;
    return c.c1 * d.gamma_parent + c.c2 * d.mu + c.c3 * d.mu_parent + c.c4 * d.eta_fwd + c.c5 * d.eta_bwd;
}

std::vector<double> nodal_prices(const NetworkModel& net, const SlotFlows& flows, const SlotDuals& duals,
                                 int* degenerate_count) {
    const std::size_t n = net.num_buses();
    std::vector<double> out(n, 0.0);
    int degenerate = 0;
    out[0] = duals.gamma[0];
    for (std::size_t i = 1; i < n; ++i) {
        const Line* line = net.line_to(static_cast<int>(i));
        auto c = dlmp_coefficients(flows.f_p[i], flows.f_q[i], flows.l[i], line->r, line->x);
        NodeDuals d;
        d.gamma_parent = duals.gamma[i];
        d.mu = duals.mu[i];
        d.mu_parent = duals.mu[static_cast<std::size_t>(*net.buses[i].parent)];
        d.eta_fwd = duals.eta_fwd[i];
        d.eta_bwd = duals.eta_bwd[i];
        if (c.degenerate) ++degenerate;
        out[i] = scenario_node_price(c, d);
    }
    if (degenerate_count) *degenerate_count = degenerate;
    return out;
}

double update_bilateral_price(double elp_prev, double rho, double nodal_n, double nodal_m) {
    if (!(rho > 0.0)) throw DomainError("rho must be positive");
    return elp_prev + rho * std::abs(nodal_n - nodal_m);
}

double grid_mid_price(const TariffSchedule& tariff, int t) {
    if (t < 0 || t >= tariff.horizon()) throw DimensionMismatch("tariff does not cover slot " + std::to_string(t));
    const auto ts = static_cast<std::size_t>(t);
    return 0.5 * (tariff.buy[ts] + tariff.sell[ts]);
}

double compose_iglp(double elp, double gmp, TradeSide side) { return side == TradeSide::seller ? elp - gmp : elp + gmp; }

PriceBook::PriceBook(std::vector<std::string> households, std::vector<std::pair<std::string, std::string>> pairs,
                     int scenarios, const TariffSchedule& tariff)
    : households_(std::move(households)), pairs_(std::move(pairs)), scenarios_(scenarios) {
    if (scenarios < 1) throw DimensionMismatch("price book needs at least one scenario");
    for (auto& pr : pairs_)
        if (pr.second < pr.first) std::swap(pr.first, pr.second);
    std::sort(pairs_.begin(), pairs_.end());
    for (int t = 0; t < tariff.horizon(); ++t) gmp_.push_back(grid_mid_price(tariff, t));
    const std::size_t st = static_cast<std::size_t>(scenarios_) * gmp_.size();
    elp_.assign(st * pairs_.size(), 0.0);
    nodal_.assign(st * households_.size(), 0.0);
}

std::size_t PriceBook::index(int s, int t, std::size_t pair) const {
    if (s < 0 || s >= scenarios_ || t < 0 || t >= horizon() || pair >= pairs_.size())
        throw MissingPrice("no price for scenario " + std::to_string(s) + ", slot " + std::to_string(t));
    return (static_cast<std::size_t>(s) * gmp_.size() + static_cast<std::size_t>(t)) * pairs_.size() + pair;
}

std::size_t PriceBook::pair_index(const std::string& n, const std::string& m) const {
    auto key = std::minmax(n, m);
    auto it = std::lower_bound(pairs_.begin(), pairs_.end(), std::pair<std::string, std::string>(key.first, key.second));
    if (it == pairs_.end() || it->first != key.first || it->second != key.second)
        throw MissingPrice("no bilateral price for pair '" + n + "', '" + m + "'");
    return static_cast<std::size_t>(it - pairs_.begin());
}

std::size_t PriceBook::household_index(const std::string& n) const {
    auto it = std::find(households_.begin(), households_.end(), n);
    if (it == households_.end()) throw MissingPrice("no nodal price for household '" + n + "'");
    return static_cast<std::size_t>(it - households_.begin());
}

double PriceBook::elp(int s, int t, const std::string& n, const std::string& m) const {
    return elp_.at(index(s, t, pair_index(n, m)));
}

double PriceBook::nodal(int s, int t, const std::string& n) const {
    if (s < 0 || s >= scenarios_ || t < 0 || t >= horizon())
        throw MissingPrice("no nodal price for scenario " + std::to_string(s) + ", slot " + std::to_string(t));
    return nodal_.at((static_cast<std::size_t>(s) * gmp_.size() + static_cast<std::size_t>(t)) * households_.size() +
                     household_index(n));
}

double PriceBook::iglp(int s, int t, const std::string& n, const std::string& m, TradeSide side) const {
    return compose_iglp(elp(s, t, n, m), gmp(t), side);
}

void PriceBook::set_nodal(int s, int t, const std::string& n, double value) {
    if (s < 0 || s >= scenarios_ || t < 0 || t >= horizon())
        throw MissingPrice("no nodal slot for scenario " + std::to_string(s) + ", slot " + std::to_string(t));
    nodal_.at((static_cast<std::size_t>(s) * gmp_.size() + static_cast<std::size_t>(t)) * households_.size() +
              household_index(n)) = value;
}

void PriceBook::accumulate_elp(double rho) {
    for (int s = 0; s < scenarios_; ++s)
        for (int t = 0; t < horizon(); ++t)
            for (std::size_t k = 0; k < pairs_.size(); ++k) {
                double& e = elp_[index(s, t, k)];
                e = update_bilateral_price(e, rho, nodal(s, t, pairs_[k].first), nodal(s, t, pairs_[k].second));
            }
}

// ---- P1 / P2 ----------------------------------------------------------------------

ScenarioGrid ScenarioGrid::product(int n_pv, int n_demand) {
    ScenarioGrid g;
    for (int u = 0; u < n_pv; ++u)
        for (int d = 0; d < n_demand; ++d) {
            g.pv_level.push_back(u);
            g.demand_level.push_back(d);
        }
    return g;
}

NetworkModel with_households(const NetworkModel& net, const std::vector<HouseholdSpec>& households) {
    NetworkModel out = net;
    std::map<std::string, int> listed;
    for (const auto& [bus, ids] : net.bus_households)
        for (const auto& id : ids) listed[id] = bus;
    for (const auto& h : households) {
        if (h.bus < 0 || h.bus >= static_cast<int>(net.num_buses()))
            throw ValidationError("household '" + h.id + "' sits on unknown bus " + std::to_string(h.bus));
        auto it = listed.find(h.id);
        if (it != listed.end()) {
            if (it->second != h.bus)
                throw ValidationError("household '" + h.id + "' is on bus " + std::to_string(h.bus) +
                                      " but the network lists it on bus " + std::to_string(it->second));
            continue;
        }
        out.bus_households[h.bus].push_back(h.id);
    }
    return out;
}

namespace {

void check_scenarios(const std::vector<HouseholdSpec>& households, const ScenarioBook& book,
                     const TariffSchedule& tariff) {
    for (const auto& h : households)
        if (!book.contains(h.id)) throw ConfigError("no scenarios for household '" + h.id + "'");
    if (book.horizon() != tariff.horizon())
        throw DimensionMismatch("scenario horizon " + std::to_string(book.horizon()) + " differs from tariff horizon " +
                                std::to_string(tariff.horizon()));
    for (const auto& h : households)
        if (std::abs(h.battery.dt - tariff.dt) > 1e-12)
            throw ConfigError("battery slot length of '" + h.id + "' differs from the tariff slot length");
}

}  // namespace

ConicProgram build_p1(const std::vector<HouseholdSpec>& households, const ScenarioBook& scenarios,
                      const TariffSchedule& tariff, const PriceBook& prices, P1Layout* layout) {
    tariff.validate();
    check_partners(households);
    check_scenarios(households, scenarios, tariff);
    const ScenarioGrid grid = ScenarioGrid::product(scenarios.num_pv(), scenarios.num_demand());
    if (prices.scenarios() != grid.size() || prices.horizon() != tariff.horizon())
        throw DimensionMismatch("price book shape does not match scenarios and tariff");
    const int T = tariff.horizon();
    const double w = grid.weight() * tariff.dt;

    ConicProgram prog("P1");
    P1Layout local;
    P1Layout& lay = layout ? *layout : local;
    lay.grid = grid;
    lay.blocks.clear();
    for (const auto& h : households) {
        const auto& pv = scenarios.pv(h.id).trajectories;
        const auto& de = scenarios.demand(h.id).trajectories;
        std::vector<std::vector<double>> pv_s, de_s;
        for (int s = 0; s < grid.size(); ++s) {
            pv_s.push_back(pv.at(static_cast<std::size_t>(grid.pv_level[static_cast<std::size_t>(s)])));
            de_s.push_back(de.at(static_cast<std::size_t>(grid.demand_level[static_cast<std::size_t>(s)])));
        }
        auto block = model::build_household_block(prog, h, pv_s, de_s);
        for (int s = 0; s < grid.size(); ++s) {
            const auto& x = block.scenarios[static_cast<std::size_t>(s)];
            for (int t = 0; t < T; ++t) {
                const auto ts = static_cast<std::size_t>(t);
                prog.add_objective(x.grid_buy[ts], w * tariff.buy[ts]);
                prog.add_objective(x.grid_sell[ts], -w * tariff.sell[ts]);
                for (const auto& m : h.partners) {
                    prog.add_objective(x.sell.at(m)[ts], -w * prices.iglp(s, t, h.id, m, TradeSide::seller));
                    prog.add_objective(x.buy.at(m)[ts], w * prices.iglp(s, t, h.id, m, TradeSide::buyer));
                }
            }
        }
        lay.blocks.emplace(h.id, std::move(block));
    }
    for (int s = 0; s < grid.size(); ++s) {
        std::map<std::string, const model::ExchangeVars*> xs;
        for (const auto& [id, b] : lay.blocks) xs[id] = &b.scenarios[static_cast<std::size_t>(s)];
        model::enforce_reciprocity(prog, households, xs);
    }
    return prog;
}

ConicProgram build_p2(const NetworkModel& net, const std::vector<ScenarioInjections>& injections,
                      const TariffSchedule& tariff, const MarketParams& params, P2Layout* layout) {
    tariff.validate();
    params.validate();
    const int T = tariff.horizon();
    ConicProgram prog("P2");
    P2Layout local;
    P2Layout& lay = layout ? *layout : local;
    lay.slots.assign(injections.size(), {});
    const double kw = net.kw_per_pu();
    for (std::size_t s = 0; s < injections.size(); ++s) {
        if (static_cast<int>(injections[s].size()) != T)
            throw DimensionMismatch("scenario " + std::to_string(s) + " injections do not cover the horizon");
        for (int t = 0; t < T; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            const BusInjection& inj = injections[s][ts];
            std::vector<LinExpr> hp(inj.p.begin(), inj.p.end()), hq(inj.q.begin(), inj.q.end());
            auto vars = model::add_network_slot(prog, net, hp, hq, "s" + std::to_string(s) + ".t" + std::to_string(t),
                                                true);
            prog.add_objective(vars.g0_p, tariff.buy[ts] * kw * tariff.dt);
            for (std::size_t i = 1; i < net.num_buses(); ++i) {
                prog.add_objective(vars.xi[i], params.varpi * tariff.dt);
                prog.add_objective(vars.phi[i], params.tau * tariff.dt);
            }
            lay.slots[s].push_back(std::move(vars));
        }
    }
    return prog;
}

ScenarioInjections bus_injections(const NetworkModel& net, const std::map<std::string, HouseholdInjection>& households,
                                  int horizon) {
    ScenarioInjections out;
    const double kw = net.kw_per_pu();
    for (int t = 0; t < horizon; ++t) {
        BusInjection b = map_household_injections(net, households, t);
        for (auto& v : b.p) v /= kw;
        for (auto& v : b.q) v /= kw;
        out.push_back(std::move(b));
    }
    return out;
}

// ---- Algorithm 1 ------------------------------------------------------------------

double SlackReport::total() const {
    double sum = 0.0;
    for (const auto* all : {&flow_slack, &volt_slack})
        for (const auto& s : *all)
            for (const auto& t : s) sum = std::accumulate(t.begin(), t.end(), sum);
    return sum;
}

double DayAheadResult::expected_network_cost() const {
    if (scenario_network_cost.empty()) return 0.0;
    return std::accumulate(scenario_network_cost.begin(), scenario_network_cost.end(), 0.0) /
           static_cast<double>(scenario_network_cost.size());
}

int resolve_thread_count(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("DERMARKET_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

struct P2Outcome {
    std::vector<SlotFlows> flows;
    std::vector<SlotDuals> duals;
    double objective = 0.0;
    double energy_cost = 0.0;
};

P2Outcome solve_p2_scenario(const NetworkModel& net, const ScenarioInjections& inj, const TariffSchedule& tariff,
                            const MarketParams& params, const DayAheadOptions& options, const std::string& dump) {
    P2Layout lay;
    ConicProgram prog = build_p2(net, {inj}, tariff, params, &lay);
    if (!dump.empty()) solver::write_lp(prog, dump);
    Solution sol = solver::solve_continuous(prog, options.solver);
    P2Outcome out;
    out.objective = sol.objective_value;
    for (int t = 0; t < tariff.horizon(); ++t) {
        const auto& vars = lay.slots[0][static_cast<std::size_t>(t)];
        out.flows.push_back(model::read_flows(net, vars, sol));
        out.duals.push_back(model::read_duals(net, vars, sol));
        out.energy_cost += tariff.buy[static_cast<std::size_t>(t)] * out.flows.back().g0_p * net.kw_per_pu() * tariff.dt;
    }
    return out;
}

template <class F>
void parallel_for(int n, int threads, F&& body) {
    threads = std::max(1, std::min(threads, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex m;
    std::vector<std::thread> pool;
    for (int k = 0; k < threads; ++k)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard<std::mutex> g(m);
                    if (!failure) failure = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

[[noreturn]] void rethrow_with_phase(const SolverError& e, const std::string& phase) {
    const std::string msg = phase + ": " + e.what();
    if (dynamic_cast<const Infeasible*>(&e)) throw Infeasible(msg, e.tag());
    if (dynamic_cast<const BranchLimit*>(&e)) throw BranchLimit(msg, e.tag());
    throw NumericalFailure(msg, e.tag());
}

}  // namespace

DayAheadResult run_day_ahead(const NetworkModel& net_in, const std::vector<HouseholdSpec>& households,
                             const ScenarioBook& scenarios, const TariffSchedule& tariff, const MarketParams& params,
                             const DayAheadOptions& options) {
    params.validate();
    tariff.validate();
    if (auto problems = validate_radial(net_in); !problems.empty()) throw ValidationError(problems.front());
    const NetworkModel net = with_households(net_in, households);
    check_scenarios(households, scenarios, tariff);
    const int T = tariff.horizon();
    const int threads = resolve_thread_count(options.threads);

    DayAheadResult res;
    for (const auto& h : households) res.households.push_back(h.id);
    res.grid = ScenarioGrid::product(scenarios.num_pv(), scenarios.num_demand());
    const int S = res.grid.size();
    PriceBook prices(res.households, partner_pairs(households), S, tariff);

    double prev_cost = 0.0, prev_slack = 0.0;
    for (int k = 1; k <= params.k_max; ++k) {
        P1Layout lay;
        ConicProgram p1 = build_p1(households, scenarios, tariff, prices, &lay);
        if (!options.dump_lp_dir.empty())
            solver::write_lp(p1, (std::filesystem::path(options.dump_lp_dir) / ("p1_k" + std::to_string(k) + ".lp")).string());
        Solution sol;
        try {
            sol = solver::solve_mixed(p1, options.solver);
        } catch (const SolverError& e) {
            rethrow_with_phase(e, "P1");
        }

        res.schedule.clear();
        res.trades.assign(static_cast<std::size_t>(S), {});
        res.net_injection.assign(static_cast<std::size_t>(S), {});
        res.scenario_household_cost.assign(static_cast<std::size_t>(S), 0.0);
        std::vector<std::map<std::string, HouseholdInjection>> inj_kw(static_cast<std::size_t>(S));
        for (const auto& h : households) {
            const auto& block = lay.blocks.at(h.id);
            BatteryState st;
            for (const auto& v : block.battery.soc) st.soc.push_back(sol.value(v));
            for (int t = 0; t < T; ++t) {
                const auto ts = static_cast<std::size_t>(t);
                st.charge.push_back(std::max(0.0, sol.value(block.battery.charge[ts])));
                st.discharge.push_back(std::max(0.0, sol.value(block.battery.discharge[ts])));
                st.mode.push_back(std::round(sol.value(block.battery.mode[ts])));
            }
            res.schedule.emplace(h.id, std::move(st));
            for (int s = 0; s < S; ++s) {
                const auto& x = block.scenarios[static_cast<std::size_t>(s)];
                auto& ledgers = res.trades[static_cast<std::size_t>(s)][h.id];
                HouseholdInjection hi;
                for (int t = 0; t < T; ++t) {
                    const auto ts = static_cast<std::size_t>(t);
                    TradeLedger tl;
                    tl.grid_buy = std::max(0.0, sol.value(x.grid_buy[ts]));
                    tl.grid_sell = std::max(0.0, sol.value(x.grid_sell[ts]));
                    for (const auto& m : h.partners) {
                        tl.sell[m] = std::max(0.0, sol.value(x.sell.at(m)[ts]));
                        tl.buy[m] = std::max(0.0, sol.value(x.buy.at(m)[ts]));
                    }
                    res.scenario_household_cost[static_cast<std::size_t>(s)] +=
                        (tariff.buy[ts] * tl.grid_buy - tariff.sell[ts] * tl.grid_sell) * tariff.dt;
                    ledgers.push_back(std::move(tl));
                    hi.p.push_back(sol.value(x.p_net[ts]));
                    hi.q.push_back(x.q_net[ts]);
                }
                res.net_injection[static_cast<std::size_t>(s)][h.id] = hi.p;
                inj_kw[static_cast<std::size_t>(s)][h.id] = std::move(hi);
            }
        }

        for (auto& scenario_trades : res.trades) reconcile_reciprocity(scenario_trades);
        res.scenario_netted_household_cost.assign(static_cast<std::size_t>(S), 0.0);
        for (int s = 0; s < S; ++s) {
            for (int t = 0; t < T; ++t) {
                const auto ts = static_cast<std::size_t>(t);
                std::map<std::string, TradeLedger> slot;
                for (const auto& [id, rows] : res.trades[static_cast<std::size_t>(s)]) slot[id] = rows[ts];
                consolidate_ledgers(slot, households);
                for (const auto& [id, l] : slot)
                    res.scenario_netted_household_cost[static_cast<std::size_t>(s)] +=
                        (tariff.buy[ts] * l.grid_buy - tariff.sell[ts] * l.grid_sell) * tariff.dt;
            }
        }

        std::vector<P2Outcome> p2(static_cast<std::size_t>(S));
        try {
            parallel_for(S, threads, [&](int s) {
                std::string dump;
                if (!options.dump_lp_dir.empty())
                    dump = (std::filesystem::path(options.dump_lp_dir) /
                            ("p2_k" + std::to_string(k) + "_s" + std::to_string(s) + ".lp"))
                               .string();
                p2[static_cast<std::size_t>(s)] =
                    solve_p2_scenario(net, bus_injections(net, inj_kw[static_cast<std::size_t>(s)], T), tariff, params,
                                      options, dump);
            });
        } catch (const SolverError& e) {
            rethrow_with_phase(e, "P2");
        }

        res.slack = {};
        res.scenario_network_cost.assign(static_cast<std::size_t>(S), 0.0);
        res.flows.clear();
        res.duals.clear();
        double p2_cost = 0.0;
        int degenerate = 0;
        const double to_kwh = 1.0 / (net.kw_per_pu() * tariff.dt);
        for (int s = 0; s < S; ++s) {
            auto& out = p2[static_cast<std::size_t>(s)];
            p2_cost += out.objective;
            res.scenario_network_cost[static_cast<std::size_t>(s)] = out.energy_cost;
            std::vector<std::vector<double>> xi_s, phi_s;
            for (int t = 0; t < T; ++t) {
                const auto& f = out.flows[static_cast<std::size_t>(t)];
                xi_s.push_back(f.xi);
                phi_s.push_back(f.phi);
                bool congested = false;
                for (std::size_t i = 1; i < net.num_buses(); ++i) {
                    const double smax = net.line_to(static_cast<int>(i))->s_max;
                    const double app = std::hypot(f.f_p[i], f.f_q[i]);
                    if (f.xi[i] > params.eps_slack || f.phi[i] > params.eps_slack || app >= smax * (1.0 - 1e-6))
                        congested = true;
                }
                if (congested) res.slack.congested_slots.insert(t);
                int deg = 0;
                auto bus_price = nodal_prices(net, f, out.duals[static_cast<std::size_t>(t)], &deg);
                degenerate += deg;
                for (const auto& h : households)
                    prices.set_nodal(s, t, h.id, bus_price[static_cast<std::size_t>(h.bus)] * to_kwh);
            }
            res.slack.flow_slack.push_back(std::move(xi_s));
            res.slack.volt_slack.push_back(std::move(phi_s));
            if (options.keep_flows) {
                res.flows.push_back(std::move(out.flows));
                res.duals.push_back(std::move(out.duals));
            }
        }
        if (degenerate > 0)
            spdlog::debug("iteration {}: {} zero-flow lines priced at their energy dual", k, degenerate);

        const double slack = res.slack.total();
        res.trace.push_back({k, sol.objective_value, slack, p2_cost});
        res.expected_cost = sol.objective_value;
        res.iterations = k;
        spdlog::info("day-ahead iteration {}: P1 cost {:.6f}, total slack {:.3e}", k, sol.objective_value, slack);

        auto settled = [](double now, double before, double eps) {
            return std::abs(now - before) < eps * std::max(1.0, std::abs(now));
        };
        const bool converged = k == 1 ? slack <= params.eps_slack
                                      : settled(slack, prev_slack, params.eps_slack) &&
                                            settled(sol.objective_value, prev_cost, params.eps_cost);
        if (converged) {
            res.converged = true;
            break;
        }
        prev_cost = sol.objective_value;
        prev_slack = slack;
        if (k < params.k_max) {
            const std::vector<double> before = prices.elp_values();
            prices.accumulate_elp(params.rho);
            double step = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < before.size(); ++i) step = std::min(step, prices.elp_values()[i] - before[i]);
            res.trace.back().min_elp_increase = before.empty() ? 0.0 : step;
        }
    }
    if (!res.converged) spdlog::warn("day-ahead market stopped at k_max = {} without converging", params.k_max);
    res.prices = std::move(prices);
    return res;
}

}  // namespace dermarket
