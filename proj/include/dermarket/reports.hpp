#pragma once

#include <map>
#include <string>
#include <vector>

#include "dermarket/baselines.hpp"
#include "dermarket/dayahead.hpp"
#include "dermarket/realtime.hpp"
#include "dermarket/settlement.hpp"

namespace dermarket::reports {

/// Files written by one emit call, relative to the output directory, in write order.
struct Manifest {
    std::vector<std::string> files;
    void append(const Manifest& other) { files.insert(files.end(), other.files.begin(), other.files.end()); }
};

// ---- day-ahead --------------------------------------------------------------------

std::string schedule_json(const DayAheadResult& result);
std::map<std::string, BatteryState> parse_schedule_json(const std::string& text);
std::map<std::string, BatteryState> load_schedule_json(const std::string& path);

struct PriceRow {
    int scenario = 0;
    int slot = 0;
    std::string kind;  // "nodal" (key = household), "elp" (key = "n|m") or "gmp" (key empty)
    std::string key;
    double value = 0.0;
};

void write_prices_csv(const DayAheadResult& result, const std::string& path);
std::vector<PriceRow> load_prices_csv(const std::string& path);

struct SlackRow {
    int scenario = 0;
    int slot = 0;
    int bus = 0;
    double xi = 0.0;
    double phi = 0.0;
};

void write_slack_csv(const DayAheadResult& result, const std::string& path);
std::vector<SlackRow> load_slack_csv(const std::string& path);

/// Per-slot branch flows and bus voltages, one row per (scenario, slot, bus).
struct FlowRow {
    int scenario = 0;
    int slot = 0;
    int bus = 0;
    double p_flow = 0.0;  // pu, into the bus from its parent
    double q_flow = 0.0;
    double current_sq = 0.0;
    double voltage_sq = 0.0;
    double voltage = 0.0;  // pu magnitude
};

void write_flows_csv(const std::vector<std::vector<SlotFlows>>& flows, const std::string& path);
std::vector<FlowRow> load_flows_csv(const std::string& path);

Manifest emit_day_ahead(const DayAheadResult& result, const std::string& dir);

// ---- real-time --------------------------------------------------------------------

std::string real_time_json(const RealTimeRun& run);
RealTimeRun parse_real_time_json(const std::string& text);
RealTimeRun load_real_time_json(const std::string& path);

/// real_time.json plus real_time_flows.csv; nothing for a run without slots.
Manifest emit_real_time(const RealTimeRun& run, const std::string& dir);

// ---- settlement and comparison ----------------------------------------------------

Manifest emit_settlement(const SettlementRecord& record, const std::string& dir);

struct ComparisonRow {
    std::string method;
    double profit = 0.0;
    double gap = 0.0;
    int congested_slots = 0;
    double congested_fraction = 0.0;
    bool relaxation_bound = false;
    std::vector<double> per_day_profit;
};

void write_comparison_csv(const Comparison& comparison, const std::string& path);
std::vector<ComparisonRow> load_comparison_csv(const std::string& path);
std::string comparison_json(const Comparison& comparison);

Manifest emit_comparison(const Comparison& comparison, const std::string& dir);

/// Writes manifest.txt listing `manifest` and returns it with manifest.txt appended.
Manifest write_manifest(Manifest manifest, const std::string& dir);

}  // namespace dermarket::reports
