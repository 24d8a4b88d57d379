#pragma once

#include <map>
#include <string>
#include <vector>

#include "dermarket/solver/conic_program.hpp"

namespace dermarket {

struct BatterySpec {
    double eta = 0.95;
    double e_min = 0.64;     // kWh
    double e_max = 13.5;     // kWh
    double p_max = 3.3;      // kW
    double e_initial = 0.64;
    double e_final = 0.64;
    double dt = 1.0;         // hours

    /// Throws ValidationError naming the broken invariant.
    void validate(const std::string& owner = {}) const;
    /// Battery with no usable capacity (e_min = e_max, p_max = 0).
    static BatterySpec none(double level = 0.0, double dt = 1.0);
};

struct BatteryState {
    std::vector<double> soc;        // |T| + 1 entries, soc[0] = e_initial
    std::vector<double> charge;     // kW
    std::vector<double> discharge;  // kW
    std::vector<double> mode;       // 1 = charging allowed
};

struct HouseholdSpec {
    std::string id;
    int bus = 0;
    BatterySpec battery;
    std::vector<std::string> partners;
    double reactive_ratio = 0.10;
};

/// Realized exchanges of one household at one slot (kW).
struct TradeLedger {
    double grid_buy = 0.0;
    double grid_sell = 0.0;
    std::map<std::string, double> sell;  // partner -> s_nm
    std::map<std::string, double> buy;   // partner -> b_nm
    double net(const std::string& partner) const;
};

/// Household net exports of one slot: grid sales plus partner sales minus purchases.
double net_position(const TradeLedger& ledger);

/// Rewrites one slot's ledgers keeping every household's net position: partner trades carry
/// the largest volume the partner graph allows (surplus to deficit), the remainder goes to
/// the grid, and no household both buys and sells. Used where partner trades cost nothing
/// and the optimizer leaves their split undetermined.
void consolidate_ledgers(std::map<std::string, TradeLedger>& ledgers, const std::vector<HouseholdSpec>& households);

/// Sets s_nm and b_mn of every partner pair to their mean so both sides of a trade record
/// the same volume. `ledgers[n][t]`; households without a ledger are skipped.
void reconcile_reciprocity(std::map<std::string, std::vector<TradeLedger>>& ledgers);

/// E + (eta * charge - discharge / eta) * dt; BoundsError outside [e_min, e_max].
double battery_step(const BatterySpec& spec, double soc, double charge, double discharge);

std::vector<HouseholdSpec> load_households(const std::string& path);
std::vector<HouseholdSpec> parse_households(const std::string& json_text);
std::string households_to_json(const std::vector<HouseholdSpec>& households);

/// ConfigError on self-partnership, unknown partners or asymmetric partner lists.
void check_partners(const std::vector<HouseholdSpec>& households);

/// Undirected partner pairs (a < b by id).
std::vector<std::pair<std::string, std::string>> partner_pairs(const std::vector<HouseholdSpec>& households);

namespace model {

/// Battery decision variables of one household, shared across scenarios.
struct BatteryVars {
    std::vector<solver::Var> soc;  // |T| + 1
    std::vector<solver::Var> charge;
    std::vector<solver::Var> discharge;
    std::vector<solver::Var> mode;
};

/// Exchange variables of one household in one scenario.
struct ExchangeVars {
    std::vector<solver::Var> grid_buy;
    std::vector<solver::Var> grid_sell;
    std::map<std::string, std::vector<solver::Var>> sell;  // partner -> per slot
    std::map<std::string, std::vector<solver::Var>> buy;
    std::vector<solver::LinExpr> p_net;  // P^P, kW
    std::vector<double> q_net;           // P^Q, kvar
};

struct HouseholdBlock {
    BatteryVars battery;
    std::vector<ExchangeVars> scenarios;
};

/// SOC recursion with fixed initial and terminal energy, power bounds and the mode pairs.
BatteryVars add_battery(solver::ConicProgram& prog, const HouseholdSpec& spec, int horizon);

/// Balance rows for one scenario: grid and P2P exchanges equal pv - demand + battery_net.
ExchangeVars add_exchange(solver::ConicProgram& prog, const HouseholdSpec& spec,
                          const std::vector<solver::LinExpr>& battery_net, const std::vector<double>& pv,
                          const std::vector<double>& demand, const std::string& label);

/// Battery block plus one exchange block per (pv, demand) trajectory pair. `pv` and
/// `demand` have one entry per scenario; battery variables are shared by all of them.
HouseholdBlock build_household_block(solver::ConicProgram& prog, const HouseholdSpec& spec,
                                     const std::vector<std::vector<double>>& pv,
                                     const std::vector<std::vector<double>>& demand);

/// s_nm = b_mn for every partner pair, direction and slot of one scenario. Returns rows added.
int enforce_reciprocity(solver::ConicProgram& prog, const std::vector<HouseholdSpec>& households,
                        const std::map<std::string, const ExchangeVars*>& scenario);

}  // namespace model
}  // namespace dermarket
