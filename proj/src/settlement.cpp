#include "dermarket/settlement.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "csv.hpp"
#include "dermarket/errors.hpp"

namespace dermarket {

PriceLookup realized_prices(const RealTimeRun& run) {
    return [&run](int t, const std::string& n, const std::string& m, TradeSide side) {
        return run.iglp(t, n, m, side);
    };
}

double household_cost(const TariffSchedule& tariff, const TradeLedger& trades, const PriceLookup& prices,
                      const std::string& n, int t) {
    if (t < 0 || t >= tariff.horizon())
        throw MissingPrice("no tariff for slot " + std::to_string(t));
    const auto ts = static_cast<std::size_t>(t);
    double c = tariff.buy[ts] * trades.grid_buy - tariff.sell[ts] * trades.grid_sell;
    for (const auto& [m, s] : trades.sell)
        if (s != 0.0) c -= prices(t, n, m, TradeSide::seller) * s;
    for (const auto& [m, b] : trades.buy)
        if (b != 0.0) c += prices(t, n, m, TradeSide::buyer) * b;
    return c * tariff.dt;
}

double community_cost(const std::vector<double>& household_costs) {
    double sum = 0.0;
    for (double c : household_costs) sum += c;
    return sum;
}

double SettlementRecord::household_total(const std::string& id) const {
    auto it = std::find(households.begin(), households.end(), id);
    if (it == households.end()) throw UnknownHousehold("household '" + id + "' is not in the settlement");
    return household_totals[static_cast<std::size_t>(it - households.begin())];
}

namespace {

void finish_totals(SettlementRecord& r) {
    r.community_costs.assign(static_cast<std::size_t>(r.horizon), 0.0);
    r.household_totals.assign(r.households.size(), 0.0);
    for (int t = 0; t < r.horizon; ++t) {
        std::vector<double> col;
        for (const auto& row : r.household_costs) col.push_back(row[static_cast<std::size_t>(t)]);
        r.community_costs[static_cast<std::size_t>(t)] = community_cost(col);
    }
    for (std::size_t n = 0; n < r.households.size(); ++n)
        for (double c : r.household_costs[n]) r.household_totals[n] += c;
    r.community_total = 0.0;
    for (double c : r.community_costs) r.community_total += c;
    r.spread_total = 0.0;
    for (double s : r.spread) r.spread_total += s;
}

}  // namespace

SettlementRecord settle(const std::vector<std::string>& households,
                        const std::vector<std::map<std::string, TradeLedger>>& trades, const TariffSchedule& tariff,
                        const PriceLookup& prices) {
    SettlementRecord r;
    r.households = households;
    r.horizon = static_cast<int>(trades.size());
    if (r.horizon > tariff.horizon())
        throw DimensionMismatch("trades cover " + std::to_string(r.horizon) + " slots, tariff " +
                                std::to_string(tariff.horizon()));
    r.household_costs.assign(households.size(), std::vector<double>(trades.size(), 0.0));
    r.spread.assign(trades.size(), 0.0);
    for (std::size_t n = 0; n < households.size(); ++n) {
        const std::string& id = households[n];
        for (int t = 0; t < r.horizon; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            auto it = trades[ts].find(id);
            if (it == trades[ts].end())
                throw ValidationError("no recorded trades for '" + id + "' at slot " + std::to_string(t));
            const TradeLedger& l = it->second;
            SettlementLine line;
            line.household = id;
            line.slot = t;
            line.grid_buy = l.grid_buy * tariff.dt;
            line.grid_sell = l.grid_sell * tariff.dt;
            double volume = 0.0, value = 0.0;
            for (const auto& [m, s] : l.sell) {
                if (s == 0.0) continue;
                const double p = prices(t, id, m, TradeSide::seller);
                line.p2p_net += s * tariff.dt;
                volume += s;
                value += p * s;
                // Buyer side of the same trade pays the buyer price.
                r.spread[ts] += (prices(t, m, id, TradeSide::buyer) - p) * s * tariff.dt;
            }
            for (const auto& [m, b] : l.buy) {
                if (b == 0.0) continue;
                line.p2p_net -= b * tariff.dt;
                volume += b;
                value += prices(t, id, m, TradeSide::buyer) * b;
            }
            line.price_applied = volume > 0.0 ? value / volume : 0.0;
            line.cost = household_cost(tariff, l, prices, id, t);
            r.household_costs[n][ts] = line.cost;
            r.lines.push_back(std::move(line));
        }
    }
    finish_totals(r);
    return r;
}

SettlementRecord settle_real_time(const RealTimeRun& run, const TariffSchedule& tariff) {
    std::vector<std::map<std::string, TradeLedger>> trades;
    for (const auto& s : run.slots) trades.push_back(s.trades);
    return settle(run.households, trades, tariff, realized_prices(run));
}

SettlementRecord record_from_lines(std::vector<SettlementLine> lines) {
    SettlementRecord r;
    std::map<std::string, std::size_t> index;
    for (const auto& l : lines) {
        if (!index.count(l.household)) {
            index[l.household] = r.households.size();
            r.households.push_back(l.household);
        }
        r.horizon = std::max(r.horizon, l.slot + 1);
    }
    r.household_costs.assign(r.households.size(), std::vector<double>(static_cast<std::size_t>(r.horizon), 0.0));
    std::vector<std::vector<char>> seen(r.households.size(), std::vector<char>(static_cast<std::size_t>(r.horizon), 0));
    for (const auto& l : lines) {
        if (l.slot < 0) throw ValidationError("negative slot in settlement row of '" + l.household + "'");
        const std::size_t n = index[l.household];
        if (seen[n][static_cast<std::size_t>(l.slot)])
            throw ValidationError("duplicate settlement row for '" + l.household + "' at slot " + std::to_string(l.slot));
        r.household_costs[n][static_cast<std::size_t>(l.slot)] = l.cost;
        seen[n][static_cast<std::size_t>(l.slot)] = 1;
    }
    for (std::size_t n = 0; n < r.households.size(); ++n)
        for (int t = 0; t < r.horizon; ++t)
            if (!seen[n][static_cast<std::size_t>(t)])
                throw ValidationError("settlement has no row for '" + r.households[n] + "' at slot " +
                                      std::to_string(t));
    r.spread.assign(static_cast<std::size_t>(r.horizon), 0.0);
    r.lines = std::move(lines);
    finish_totals(r);
    return r;
}

void write_settlement_csv(const SettlementRecord& record, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "household,slot,grid_buy,grid_sell,p2p_net,price_applied,cost\n";
    for (const auto& l : record.lines)
        out << l.household << ',' << l.slot << ',' << csv::fmt(l.grid_buy) << ',' << csv::fmt(l.grid_sell) << ','
            << csv::fmt(l.p2p_net) << ',' << csv::fmt(l.price_applied) << ',' << csv::fmt(l.cost) << '\n';
}

std::vector<SettlementLine> load_settlement_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    const std::vector<std::string> want = {"household", "slot",          "grid_buy", "grid_sell",
                                           "p2p_net",   "price_applied", "cost"};
    if (t.header != want) throw ParseError(path + ": unexpected settlement header");
    std::vector<SettlementLine> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        SettlementLine l;
        l.household = row[0];
        l.slot = csv::to_int(row[1], where);
        l.grid_buy = csv::to_double(row[2], where);
        l.grid_sell = csv::to_double(row[3], where);
        l.p2p_net = csv::to_double(row[4], where);
        l.price_applied = csv::to_double(row[5], where);
        l.cost = csv::to_double(row[6], where);
        out.push_back(std::move(l));
    }
    return out;
}

std::string settlement_summary_json(const SettlementRecord& record) {
    nlohmann::ordered_json j;
    j["note"] = "costs in currency; negative values are earnings (profit = -cost)";
    j["community_total"] = record.community_total;
    j["community_per_slot"] = record.community_costs;
    nlohmann::ordered_json per;
    for (std::size_t n = 0; n < record.households.size(); ++n) per[record.households[n]] = record.household_totals[n];
    j["household_totals"] = per;
    j["market_spread"] = {{"total", record.spread_total}, {"per_slot", record.spread}};
    return j.dump(2);
}

}  // namespace dermarket
