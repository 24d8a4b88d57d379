#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dermarket/community.hpp"
#include "dermarket/dayahead.hpp"
#include "dermarket/network.hpp"
#include "dermarket/realtime.hpp"
#include "dermarket/scenarios.hpp"
#include "dermarket/solver/solver.hpp"

namespace dermarket {

enum class Method { offline, point_forecast, proposed };

std::string to_string(Method m);

struct MethodRun {
    Method method = Method::proposed;
    double profit = 0.0;       // -(total cost) over the horizon
    int congested_slots = 0;   // slots where the executed plan overloads a line or leaves the voltage band
    int horizon = 0;
    std::vector<double> per_slot_cost;
    std::vector<double> per_day_profit;  // one entry per day of the horizon
    /// Offline only: the branch-and-bound cap was hit and `profit` is the relaxation bound.
    bool relaxation_bound = false;
    std::optional<DayAheadResult> day_ahead;
    std::optional<RealTimeRun> real_time;

    double congested_fraction() const {
        return horizon > 0 ? static_cast<double>(congested_slots) / horizon : 0.0;
    }
};

struct P0Layout {
    std::map<std::string, model::HouseholdBlock> blocks;
    std::vector<model::NetworkSlotVars> slots;
};

/// Full-horizon problem with perfect knowledge of pv and demand and hard network limits.
solver::ConicProgram build_p0_offline(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                                      const std::vector<Realization>& realizations, const TariffSchedule& tariff,
                                      P0Layout* layout = nullptr);

struct OfflineResult {
    double cost = 0.0;
    bool relaxation_bound = false;
    std::map<std::string, BatteryState> schedule;
    std::vector<std::map<std::string, TradeLedger>> trades;  // [slot]
    std::vector<SlotFlows> flows;
    std::vector<double> per_slot_cost;
};

OfflineResult solve_offline(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                            const std::vector<Realization>& realizations, const TariffSchedule& tariff,
                            const solver::SolveOptions& opts = {});

struct BaselineOptions {
    DayAheadOptions day_ahead;
    RealTimeOptions real_time;
    solver::SolveOptions offline;
    int slots_per_day = 24;
};

MethodRun run_offline(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                      const std::vector<Realization>& realizations, const TariffSchedule& tariff,
                      const BaselineOptions& options = {});

/// Day-ahead and real-time pipeline on the given scenario book.
MethodRun run_proposed(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                       const ScenarioBook& scenarios, const TariffSchedule& tariff, const MarketParams& params,
                       const std::vector<Realization>& realizations, const BaselineOptions& options = {});

/// Same pipeline planned on the median trajectory only.
MethodRun run_point_forecast(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                             const ScenarioBook& scenarios, const TariffSchedule& tariff, const MarketParams& params,
                             const std::vector<Realization>& realizations, const BaselineOptions& options = {});

/// offline_profit - method_profit. NegativeGap when the method beats the offline bound by
/// more than tol * max(1, |offline_profit|).
double optimality_gap(double offline_profit, double method_profit, double tol = 1e-6);

/// 1 - gap_a / gap_b; DomainError when gap_b is zero.
double gap_reduction(double gap_a, double gap_b);

struct Comparison {
    std::vector<MethodRun> runs;  // offline, proposed, point forecast
    double gap_proposed = 0.0;
    double gap_point = 0.0;
    double reduction = 0.0;  // proposed relative to point forecast; NaN when the point gap is zero

    const MethodRun& run(Method m) const;
};

/// Gaps and reduction from one run per method.
Comparison assemble_comparison(std::vector<MethodRun> runs);

Comparison compare_methods(const NetworkModel& net, const std::vector<HouseholdSpec>& households,
                           const ScenarioBook& scenarios, const TariffSchedule& tariff, const MarketParams& params,
                           const std::vector<Realization>& realizations, const BaselineOptions& options = {});

}  // namespace dermarket
