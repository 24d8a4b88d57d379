#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dermarket/community.hpp"
#include "dermarket/dayahead.hpp"
#include "dermarket/realtime.hpp"

namespace dermarket {

/// Bilateral price (currency/kWh) paid or earned by `n` when trading with `m` at slot `t`.
/// Implementations throw MissingPrice for pairs or slots they do not cover.
using PriceLookup = std::function<double(int t, const std::string& n, const std::string& m, TradeSide side)>;

/// Realized prices of a real-time run.
PriceLookup realized_prices(const RealTimeRun& run);

/// buy * b - sell * s - sum_m lambda_nm * T_nm, per kWh of slot energy. Sales to a partner are
/// credited at the seller price, purchases charged at the buyer price. Negative means earnings.
double household_cost(const TariffSchedule& tariff, const TradeLedger& trades, const PriceLookup& prices,
                      const std::string& n, int t);

/// Sum of household costs in the order given.
double community_cost(const std::vector<double>& household_costs);

/// One row of the settlement table.
struct SettlementLine {
    std::string household;
    int slot = 0;
    double grid_buy = 0.0;       // kWh
    double grid_sell = 0.0;      // kWh
    double p2p_net = 0.0;        // kWh exported to partners minus imported
    double price_applied = 0.0;  // volume-weighted partner price, 0 without partner trades
    double cost = 0.0;
};

struct SettlementRecord {
    std::vector<std::string> households;
    int horizon = 0;
    std::vector<SettlementLine> lines;                  // household-major
    std::vector<std::vector<double>> household_costs;  // [household][slot]
    std::vector<double> community_costs;                // [slot]
    std::vector<double> household_totals;
    double community_total = 0.0;
    /// Buyer minus seller payments on partner trades, per slot. Nobody in the
    /// community receives it, so it stays visible as a separate item.
    std::vector<double> spread;
    double spread_total = 0.0;

    double household_total(const std::string& id) const;
};

/// Settles recorded trades. `trades[t]` maps household -> ledger for slot t.
SettlementRecord settle(const std::vector<std::string>& households,
                        const std::vector<std::map<std::string, TradeLedger>>& trades, const TariffSchedule& tariff,
                        const PriceLookup& prices);

/// Settles a real-time run at its realized prices.
SettlementRecord settle_real_time(const RealTimeRun& run, const TariffSchedule& tariff);

/// Rebuilds the aggregates from table rows; throws ValidationError when rows are missing.
SettlementRecord record_from_lines(std::vector<SettlementLine> lines);

void write_settlement_csv(const SettlementRecord& record, const std::string& path);
std::vector<SettlementLine> load_settlement_csv(const std::string& path);
std::string settlement_summary_json(const SettlementRecord& record);

}  // namespace dermarket
