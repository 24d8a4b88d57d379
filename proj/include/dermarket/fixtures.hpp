#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dermarket/community.hpp"
#include "dermarket/dayahead.hpp"
#include "dermarket/network.hpp"
#include "dermarket/scenarios.hpp"

namespace dermarket {

/// Everything needed to run the market on one day.
struct Study {
    std::string name;
    NetworkModel net;
    std::vector<HouseholdSpec> households;
    ScenarioBook scenarios;
    std::vector<Realization> realizations;
    TariffSchedule tariff;
    MarketParams params;
};

/// Files: network.json, households.json, scenarios.csv, tariff.csv, realization.csv, params.json.
void write_study(const Study& study, const std::string& dir);
Study load_study(const std::string& dir);

namespace fixtures {

/// Buses 0 - 1 - ... - (n-1) in a line, identical impedances.
NetworkModel chain_network(int buses, double r, double x, double s_max, double base_mva = 1.0);

/// Two households on a three-bus line trading with each other over four slots. With
/// `congested` the second line is too small for the exporter at bus 2.
Study three_bus(bool congested);

/// One scenario per household, no useful bilateral trades and a unique battery plan, so the
/// day-ahead pipeline and the perfect-information problem must agree.
Study single_scenario();

/// Fifteen-bus feeder with fifty households. Twenty PV + battery households sit behind
/// line 2, whose rating is only met if the batteries are not filled from optimistic
/// morning forecasts.
Study feeder15(std::uint64_t seed = 2024, int n_quantiles = 9);

/// `days` past days per household and series: the realized trajectory scaled by a
/// lognormal day factor (sigma 0.2), for exercising scenario generation.
std::vector<HistoryRecord> synthetic_history(const Study& study, int days, std::uint64_t seed);

/// Fixture by name: feeder15, three_bus, three_bus_congested or single_scenario.
Study by_name(const std::string& name, std::uint64_t seed = 2024, int n_quantiles = 9);

}  // namespace fixtures
}  // namespace dermarket
