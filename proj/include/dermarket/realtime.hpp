#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dermarket/community.hpp"
#include "dermarket/dayahead.hpp"
#include "dermarket/network.hpp"
#include "dermarket/scenarios.hpp"
#include "dermarket/solver/solver.hpp"

namespace dermarket {

/// Change to the day-ahead battery plan of one household in one slot.
struct RealTimeAdjustment {
    double charge = 0.0;        // e^bc, kW on top of the planned charge
    double discharge = 0.0;     // e^bd
    double soc_start = 0.0;     // E^RT_t
    double soc_end = 0.0;       // E^RT_{t+1}
    double soc_planned = 0.0;   // E^DA_{t+1}
    double delta_e = 0.0;       // soc_planned - soc_end; positive when less was stored
};

/// E^DA_{t+1} - E^RT_{t+1}.
double soc_deviation(double soc_da_next, double soc_rt_next);

struct RealTimeSlot {
    int t = 0;
    std::map<std::string, TradeLedger> trades;
    std::map<std::string, RealTimeAdjustment> adjustments;
    SlotFlows flows;
    SlotDuals duals;
    std::map<std::string, double> nodal;  // currency/kWh
    std::vector<double> elp;              // per partner pair, same order as RealTimeRun::pairs
    double gmp = 0.0;
    double household_cost = 0.0;  // grid purchases minus feed-in
    double network_cost = 0.0;    // slack-bus energy
    double penalty = 0.0;         // theta * sum |delta E|
    std::vector<std::string> binding;
    double cone_gap = 0.0;  // > 1e-5 means the flows are not physically realizable

    double cost() const { return household_cost + network_cost + penalty; }
};

/// Slots in which the day-ahead battery plan, executed unchanged on realized data, would
/// overload a line or leave the voltage band.
struct ScheduleAudit {
    std::vector<int> flow_slots;
    std::vector<int> voltage_slots;
    std::vector<SlotFlows> flows;
    double max_flow_slack = 0.0;
    double max_voltage_slack = 0.0;

    int violated_slots() const;
};

struct RealTimeRun {
    std::vector<std::string> households;
    std::vector<std::pair<std::string, std::string>> pairs;
    std::vector<RealTimeSlot> slots;
    ScheduleAudit audit;
    bool complete = false;
    int failed_slot = -1;
    std::string failure;

    double total_cost() const;
    double profit() const { return -total_cost(); }
    double total_abs_delta_e() const;
    /// Slots whose network solution is an inexact relaxation.
    std::vector<int> inexact_slots(double tol = 1e-5) const;
    /// Realized bilateral price for n trading with m at slot t.
    double iglp(int t, const std::string& n, const std::string& m, TradeSide side) const;
};

struct RealTimeOptions {
    bool redecide_mode = false;  // re-optimize the charge/discharge mode instead of keeping the plan's
    bool audit = true;
    solver::SolveOptions solver;
};

struct P3Layout {
    std::map<std::string, model::ExchangeVars> exchange;
    std::map<std::string, solver::Var> charge, discharge, soc_next, dev_up, dev_down;
    model::NetworkSlotVars network;
};

/// One-slot real-time problem. `soc` is E^RT_t per household; `plan` the day-ahead schedule.
solver::ConicProgram build_p3(const NetworkModel& net, const std::vector<HouseholdSpec>& households, int t,
                              const std::map<std::string, Realization>& realized,
                              const std::map<std::string, double>& soc,
                              const std::map<std::string, BatteryState>& plan, const TariffSchedule& tariff,
                              const MarketParams& params, bool redecide_mode = false, P3Layout* layout = nullptr);

RealTimeRun run_real_time(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                          const std::map<std::string, BatteryState>& plan, const std::vector<Realization>& realizations,
                          const TariffSchedule& tariff, const MarketParams& params, const RealTimeOptions& options = {});

ScheduleAudit audit_schedule(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                             const std::map<std::string, BatteryState>& plan,
                             const std::vector<Realization>& realizations, const TariffSchedule& tariff,
                             const MarketParams& params, const solver::SolveOptions& opts = {});

}  // namespace dermarket
