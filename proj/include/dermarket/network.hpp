#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dermarket {

struct Bus {
    int id = 0;
    std::optional<int> parent;
    std::vector<int> children;
    double g_shunt = 0.0;  // pu
    double b_shunt = 0.0;  // pu
    double v_min_sq = 0.81;
    double v_max_sq = 1.21;
};

/// Line from the parent of `to_bus` to `to_bus`.
struct Line {
    int to_bus = 0;
    double r = 0.0;
    double x = 0.0;
    double s_max = 0.0;
};

struct SlackBusSpec {
    double g_p_min = -10.0;
    double g_p_max = 10.0;
    double g_q_min = -10.0;
    double g_q_max = 10.0;
};

struct NetworkModel {
    std::vector<Bus> buses;  // buses[i].id == i
    std::vector<Line> lines;
    SlackBusSpec slack;
    double base_mva = 1.0;
    std::map<int, std::vector<std::string>> bus_households;

    std::size_t num_buses() const noexcept { return buses.size(); }
    /// kW represented by one per-unit of power.
    double kw_per_pu() const noexcept { return 1000.0 * base_mva; }
    /// Line feeding `bus`, or nullptr for the root.
    const Line* line_to(int bus) const;
    /// Bus hosting `household`; throws UnknownHousehold.
    int bus_of(const std::string& household) const;
    /// Breadth-first order from the root.
    std::vector<int> bfs_order() const;
};

NetworkModel load_network(const std::string& path);
NetworkModel parse_network(const std::string& json_text);
std::string network_to_json(const NetworkModel& net);

/// Structural problems; empty when the model is a connected tree rooted at bus 0.
std::vector<std::string> validate_radial(const NetworkModel& net);

/// Per-household net injections over the horizon (kW, kvar); positive injects into the grid.
struct HouseholdInjection {
    std::vector<double> p;
    std::vector<double> q;
};

/// Per-bus sums h^P, h^Q at slot t in the same units as the inputs.
struct BusInjection {
    std::vector<double> p;
    std::vector<double> q;
};

BusInjection map_household_injections(const NetworkModel& net,
                                      const std::map<std::string, HouseholdInjection>& injections, int t);

}  // namespace dermarket
