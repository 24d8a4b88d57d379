#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dermarket/community.hpp"
#include "dermarket/network.hpp"
#include "dermarket/scenarios.hpp"
#include "dermarket/solver/solver.hpp"

namespace dermarket {

struct MarketParams {
    double varpi = 10.0;  // flow-slack price
    double tau = 10.0;    // voltage-slack price
    double rho = 1.0;     // price step
    int k_max = 50;
    double eps_cost = 1e-6;
    double eps_slack = 1e-6;
    double theta = 50.0;  // real-time SOC deviation penalty per kWh

    void validate() const;
};

MarketParams load_params(const std::string& path);
MarketParams parse_params(const std::string& json_text);

struct TariffSchedule {
    std::vector<double> buy;   // currency/kWh
    std::vector<double> sell;  // currency/kWh
    double dt = 1.0;           // hours per slot

    int horizon() const noexcept { return static_cast<int>(buy.size()); }
    void validate() const;
};

TariffSchedule load_tariff_csv(const std::string& path);
void write_tariff_csv(const TariffSchedule& tariff, const std::string& path);

/// Network state of one slot; vectors are indexed by bus (line i feeds bus i, entry 0 unused).
struct SlotFlows {
    double g0_p = 0.0;
    double g0_q = 0.0;
    std::vector<double> f_p, f_q, l, v;
    std::vector<double> xi, phi;
};

/// Constraint multipliers of one slot, indexed by bus. gamma/mu are the active and reactive
/// balance duals (currency per pu withdrawn), eta_fwd/eta_bwd the two flow-limit duals.
struct SlotDuals {
    std::vector<double> gamma, mu, eta_fwd, eta_bwd;
};

namespace model {

struct NetworkSlotVars {
    solver::Var g0_p, g0_q;
    std::vector<solver::Var> f_p, f_q, l, v, xi, phi;
    std::vector<std::string> tag_p, tag_q, tag_fwd, tag_bwd;
};

/// DistFlow rows for one slot. `h_p`/`h_q` are per-bus net injections in pu (may contain
/// decision variables). With `soft` the flow and voltage limits get slack variables.
NetworkSlotVars add_network_slot(solver::ConicProgram& prog, const NetworkModel& net,
                                 const std::vector<solver::LinExpr>& h_p, const std::vector<solver::LinExpr>& h_q,
                                 const std::string& label, bool soft);

SlotFlows read_flows(const NetworkModel& net, const NetworkSlotVars& vars, const solver::Solution& sol);

/// Largest per-line gap (v_A + l) - ||(2f^P, 2f^Q, v_A - l)||; zero when the relaxation is exact.
double cone_gap(const NetworkModel& net, const SlotFlows& flows);
SlotDuals read_duals(const NetworkModel& net, const NetworkSlotVars& vars, const solver::Solution& sol);

}  // namespace model

// ---- pricing ---------------------------------------------------------------------------

/// Weight on the l (r^2 - x)^2 term of C5, which is dimensionally inconsistent with the
/// neighbouring (r^2 - x^2) terms. It is evaluated exactly as written; set to 0 to drop it.
inline constexpr double kC5LossCurvatureWeight = 1.0;

/// |D| below this marks a degenerate coefficient set.
inline constexpr double kDlmpDegenerateTol = 1e-9;

struct DlmpCoefficients {
    double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0;
    double denominator = 0.0;
    bool degenerate = false;
};

DlmpCoefficients dlmp_coefficients(double f_p, double f_q, double l, double r, double x);

struct NodeDuals {
    double gamma_parent = 0.0;  // active balance dual attached to the line into the bus
    double mu = 0.0;            // reactive balance dual at the bus
    double mu_parent = 0.0;     // reactive balance dual at the parent bus
    double eta_fwd = 0.0;
    double eta_bwd = 0.0;
};

/// C1 gamma + C2 mu + C3 mu_parent + C4 eta_fwd + C5 eta_bwd; falls back to gamma_parent when degenerate.
double scenario_node_price(const DlmpCoefficients& c, const NodeDuals& d);

/// Nodal price of every bus at one slot (same units as the duals). Root bus gets its balance dual.
std::vector<double> nodal_prices(const NetworkModel& net, const SlotFlows& flows, const SlotDuals& duals,
                                 int* degenerate_count = nullptr);

double update_bilateral_price(double elp_prev, double rho, double nodal_n, double nodal_m);
double grid_mid_price(const TariffSchedule& tariff, int t);

enum class TradeSide { seller, buyer };
double compose_iglp(double elp, double gmp, TradeSide side);

/// ELP, nodal prices, GMP and derived IGLP for every scenario, slot and partner pair.
class PriceBook {
public:
    PriceBook() = default;
    PriceBook(std::vector<std::string> households, std::vector<std::pair<std::string, std::string>> pairs,
              int scenarios, const TariffSchedule& tariff);

    int scenarios() const noexcept { return scenarios_; }
    int horizon() const noexcept { return static_cast<int>(gmp_.size()); }
    const std::vector<std::pair<std::string, std::string>>& pairs() const noexcept { return pairs_; }
    const std::vector<std::string>& households() const noexcept { return households_; }

    double gmp(int t) const { return gmp_.at(static_cast<std::size_t>(t)); }
    double elp(int s, int t, const std::string& n, const std::string& m) const;
    double elp(int s, int t, std::size_t pair) const { return elp_.at(index(s, t, pair)); }
    const std::vector<double>& elp_values() const noexcept { return elp_; }
    double nodal(int s, int t, const std::string& n) const;
    /// Price for household n trading with m on the given side.
    double iglp(int s, int t, const std::string& n, const std::string& m, TradeSide side) const;

    void set_nodal(int s, int t, const std::string& n, double value);
    /// Applies the bilateral update to every pair from the current nodal prices.
    void accumulate_elp(double rho);

private:
    std::size_t index(int s, int t, std::size_t pair) const;
    std::size_t pair_index(const std::string& n, const std::string& m) const;
    std::size_t household_index(const std::string& n) const;

    std::vector<std::string> households_;
    std::vector<std::pair<std::string, std::string>> pairs_;
    int scenarios_ = 0;
    std::vector<double> gmp_;
    std::vector<double> elp_;    // [s][t][pair]
    std::vector<double> nodal_;  // [s][t][household]
};

// ---- problems ----------------------------------------------------------------------

/// Scenario s pairs PV level pv_level[s] with demand level demand_level[s].
struct ScenarioGrid {
    std::vector<int> pv_level;
    std::vector<int> demand_level;
    int size() const noexcept { return static_cast<int>(pv_level.size()); }
    double weight() const { return 1.0 / static_cast<double>(size()); }
    static ScenarioGrid product(int n_pv, int n_demand);
};

struct P1Layout {
    ScenarioGrid grid;
    std::map<std::string, model::HouseholdBlock> blocks;
};

solver::ConicProgram build_p1(const std::vector<HouseholdSpec>& households, const ScenarioBook& scenarios,
                              const TariffSchedule& tariff, const PriceBook& prices, P1Layout* layout = nullptr);

/// Per-bus injections in pu for every slot of one scenario.
using ScenarioInjections = std::vector<BusInjection>;

struct P2Layout {
    std::vector<std::vector<model::NetworkSlotVars>> slots;  // [scenario][t]
};

/// Joint P2 over all given scenarios (they share no variables).
solver::ConicProgram build_p2(const NetworkModel& net, const std::vector<ScenarioInjections>& injections,
                              const TariffSchedule& tariff, const MarketParams& params, P2Layout* layout = nullptr);

// ---- Algorithm 1 -------------------------------------------------------------------

struct SlackReport {
    std::vector<std::vector<std::vector<double>>> flow_slack;  // [s][t][bus]
    std::vector<std::vector<std::vector<double>>> volt_slack;  // [s][t][bus]
    std::set<int> congested_slots;
    double total() const;
};

struct IterationTrace {
    int k = 0;
    double p1_cost = 0.0;
    double total_slack = 0.0;
    double p2_cost = 0.0;
    /// Smallest change of any bilateral price in the update that followed this iteration;
    /// 0 when no update followed.
    double min_elp_increase = 0.0;
};

struct DayAheadOptions {
    int threads = 0;               // 0: DERMARKET_THREADS or hardware concurrency
    std::string dump_lp_dir;       // empty: no dumps
    bool keep_flows = true;
    solver::SolveOptions solver;
};

struct DayAheadResult {
    std::vector<std::string> households;
    ScenarioGrid grid;
    std::map<std::string, BatteryState> schedule;
    std::vector<std::map<std::string, std::vector<TradeLedger>>> trades;  // [s][household][t]
    std::vector<std::map<std::string, std::vector<double>>> net_injection;  // [s][household][t] kW
    std::vector<std::vector<SlotFlows>> flows;  // [s][t], empty when not kept
    std::vector<std::vector<SlotDuals>> duals;  // [s][t], empty when not kept
    PriceBook prices;
    SlackReport slack;
    double expected_cost = 0.0;  // P1 objective
    std::vector<double> scenario_household_cost;  // [s] grid energy cost of households
    std::vector<double> scenario_network_cost;    // [s] slack-bus energy cost, no penalties
    /// [s] grid energy cost of households once partner trades are netted inside the community,
    /// the accounting used by the real-time market.
    std::vector<double> scenario_netted_household_cost;
    std::vector<IterationTrace> trace;
    int iterations = 0;
    bool converged = false;

    double expected_network_cost() const;
    /// Household plus slack-bus energy cost of one scenario.
    double scenario_cost(int s) const { return scenario_household_cost.at(static_cast<std::size_t>(s)) + scenario_network_cost.at(static_cast<std::size_t>(s)); }
    /// Household plus slack-bus energy cost with partner trades netted.
    double netted_scenario_cost(int s) const {
        return scenario_netted_household_cost.at(static_cast<std::size_t>(s)) + scenario_network_cost.at(static_cast<std::size_t>(s));
    }
};

int resolve_thread_count(int requested);

DayAheadResult run_day_ahead(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                             const ScenarioBook& scenarios, const TariffSchedule& tariff, const MarketParams& params,
                             const DayAheadOptions& options = {});

/// Per-bus pu injections from household kW/kvar values of one scenario.
ScenarioInjections bus_injections(const NetworkModel& net, const std::map<std::string, HouseholdInjection>& households,
                                  int horizon);

/// Copy of `net` whose bus_households lists every household at its bus. Throws
/// ValidationError for unknown buses or disagreement with an existing mapping.
NetworkModel with_households(const NetworkModel& net, const std::vector<HouseholdSpec>& households);

}  // namespace dermarket
