#include "dermarket/reports.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "csv.hpp"
#include "dermarket/errors.hpp"

namespace dermarket::reports {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kProfitNote = "profit = -cost; costs in currency, negative costs are earnings";

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text << '\n';
    if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
}

template <class F>
auto guarded(const std::string& what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ParseError(what + ": " + e.what());
    }
}

void expect_header(const csv::Table& t, const std::vector<std::string>& want, const std::string& path) {
    if (t.header != want) throw ParseError(path + ": unexpected header");
}

json battery_json(const BatteryState& st) {
    return {{"soc", st.soc}, {"charge", st.charge}, {"discharge", st.discharge}, {"mode", st.mode}};
}

BatteryState battery_from(const json& j) {
    BatteryState st;
    st.soc = j.at("soc").get<std::vector<double>>();
    st.charge = j.at("charge").get<std::vector<double>>();
    st.discharge = j.at("discharge").get<std::vector<double>>();
    st.mode = j.at("mode").get<std::vector<double>>();
    return st;
}

json ledger_json(const TradeLedger& l) {
    return {{"grid_buy", l.grid_buy}, {"grid_sell", l.grid_sell}, {"sell", l.sell}, {"buy", l.buy}};
}

TradeLedger ledger_from(const json& j) {
    TradeLedger l;
    l.grid_buy = j.at("grid_buy").get<double>();
    l.grid_sell = j.at("grid_sell").get<double>();
    l.sell = j.at("sell").get<std::map<std::string, double>>();
    l.buy = j.at("buy").get<std::map<std::string, double>>();
    return l;
}

json flows_json(const SlotFlows& f) {
    return {{"g0_p", f.g0_p}, {"g0_q", f.g0_q}, {"f_p", f.f_p}, {"f_q", f.f_q}, {"l", f.l},
            {"v", f.v},       {"xi", f.xi},     {"phi", f.phi}};
}

SlotFlows flows_from(const json& j) {
    SlotFlows f;
    f.g0_p = j.at("g0_p").get<double>();
    f.g0_q = j.at("g0_q").get<double>();
    f.f_p = j.at("f_p").get<std::vector<double>>();
    f.f_q = j.at("f_q").get<std::vector<double>>();
    f.l = j.at("l").get<std::vector<double>>();
    f.v = j.at("v").get<std::vector<double>>();
    f.xi = j.at("xi").get<std::vector<double>>();
    f.phi = j.at("phi").get<std::vector<double>>();
    return f;
}

json duals_json(const SlotDuals& d) {
    return {{"gamma", d.gamma}, {"mu", d.mu}, {"eta_fwd", d.eta_fwd}, {"eta_bwd", d.eta_bwd}};
}

SlotDuals duals_from(const json& j) {
    SlotDuals d;
    d.gamma = j.at("gamma").get<std::vector<double>>();
    d.mu = j.at("mu").get<std::vector<double>>();
    d.eta_fwd = j.at("eta_fwd").get<std::vector<double>>();
    d.eta_bwd = j.at("eta_bwd").get<std::vector<double>>();
    return d;
}

std::string join(const std::vector<double>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += csv::fmt(v[i]);
    }
    return out;
}

}  // namespace

// ---- day-ahead --------------------------------------------------------------------

std::string schedule_json(const DayAheadResult& r) {
    json j;
    j["note"] = kProfitNote;
    j["expected_cost"] = r.expected_cost;
    j["expected_network_cost"] = r.expected_network_cost();
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["scenarios"] = r.grid.size();
    j["congested_slots"] = std::vector<int>(r.slack.congested_slots.begin(), r.slack.congested_slots.end());
    json trace = json::array();
    for (const auto& tr : r.trace)
        trace.push_back({{"k", tr.k}, {"p1_cost", tr.p1_cost}, {"total_slack", tr.total_slack}, {"p2_cost", tr.p2_cost},
                         {"min_elp_increase", tr.min_elp_increase}});
    j["trace"] = trace;
    json sched;
    for (const auto& id : r.households) sched[id] = battery_json(r.schedule.at(id));
    j["schedule"] = sched;
    return j.dump(2);
}

std::map<std::string, BatteryState> parse_schedule_json(const std::string& text) {
    const json j = parse_json(text, "schedule");
    return guarded("schedule", [&] {
        std::map<std::string, BatteryState> out;
        for (const auto& [id, st] : j.at("schedule").items()) out[id] = battery_from(st);
        return out;
    });
}

std::map<std::string, BatteryState> load_schedule_json(const std::string& path) {
    return parse_schedule_json(read_text(path));
}

void write_prices_csv(const DayAheadResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    const PriceBook& pb = r.prices;
    out << "scenario,slot,kind,key,value\n";
    for (int s = 0; s < pb.scenarios(); ++s)
        for (int t = 0; t < pb.horizon(); ++t) {
            out << s << ',' << t << ",gmp,," << csv::fmt(pb.gmp(t)) << '\n';
            for (const auto& h : pb.households())
                out << s << ',' << t << ",nodal," << h << ',' << csv::fmt(pb.nodal(s, t, h)) << '\n';
            for (std::size_t k = 0; k < pb.pairs().size(); ++k) {
                const auto& [n, m] = pb.pairs()[k];
                out << s << ',' << t << ",elp," << n << '|' << m << ','
                    << csv::fmt(pb.elp(s, t, static_cast<int>(k))) << '\n';
            }
        }
}

std::vector<PriceRow> load_prices_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    expect_header(t, {"scenario", "slot", "kind", "key", "value"}, path);
    std::vector<PriceRow> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        PriceRow p;
        p.scenario = csv::to_int(row[0], where);
        p.slot = csv::to_int(row[1], where);
        p.kind = row[2];
        p.key = row[3];
        p.value = csv::to_double(row[4], where);
        if (p.kind != "gmp" && p.kind != "nodal" && p.kind != "elp")
            throw ParseError(where + ": unknown price kind '" + p.kind + "'");
        out.push_back(std::move(p));
    }
    return out;
}

void write_slack_csv(const DayAheadResult& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "scenario,slot,bus,xi,phi\n";
    for (std::size_t s = 0; s < r.slack.flow_slack.size(); ++s)
        for (std::size_t t = 0; t < r.slack.flow_slack[s].size(); ++t)
            for (std::size_t i = 1; i < r.slack.flow_slack[s][t].size(); ++i)
                out << s << ',' << t << ',' << i << ',' << csv::fmt(r.slack.flow_slack[s][t][i]) << ','
                    << csv::fmt(r.slack.volt_slack[s][t][i]) << '\n';
}

std::vector<SlackRow> load_slack_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    expect_header(t, {"scenario", "slot", "bus", "xi", "phi"}, path);
    std::vector<SlackRow> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        out.push_back({csv::to_int(row[0], where), csv::to_int(row[1], where), csv::to_int(row[2], where),
                       csv::to_double(row[3], where), csv::to_double(row[4], where)});
    }
    return out;
}

void write_flows_csv(const std::vector<std::vector<SlotFlows>>& flows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "scenario,slot,bus,p_flow,q_flow,current_sq,voltage_sq,voltage\n";
    for (std::size_t s = 0; s < flows.size(); ++s)
        for (std::size_t t = 0; t < flows[s].size(); ++t) {
            const SlotFlows& f = flows[s][t];
            for (std::size_t i = 0; i < f.v.size(); ++i) {
                // The root row carries the substation injection.
                const double p = i == 0 ? f.g0_p : f.f_p[i];
                const double q = i == 0 ? f.g0_q : f.f_q[i];
                const double l = i == 0 ? 0.0 : f.l[i];
                out << s << ',' << t << ',' << i << ',' << csv::fmt(p) << ',' << csv::fmt(q) << ',' << csv::fmt(l)
                    << ',' << csv::fmt(f.v[i]) << ',' << csv::fmt(std::sqrt(std::max(0.0, f.v[i]))) << '\n';
            }
        }
}

std::vector<FlowRow> load_flows_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    expect_header(t, {"scenario", "slot", "bus", "p_flow", "q_flow", "current_sq", "voltage_sq", "voltage"}, path);
    std::vector<FlowRow> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        FlowRow f;
        f.scenario = csv::to_int(row[0], where);
        f.slot = csv::to_int(row[1], where);
        f.bus = csv::to_int(row[2], where);
        f.p_flow = csv::to_double(row[3], where);
        f.q_flow = csv::to_double(row[4], where);
        f.current_sq = csv::to_double(row[5], where);
        f.voltage_sq = csv::to_double(row[6], where);
        f.voltage = csv::to_double(row[7], where);
        out.push_back(f);
    }
    return out;
}

Manifest emit_day_ahead(const DayAheadResult& result, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path d(dir);
    Manifest m;
    write_text(d / "schedule.json", schedule_json(result));
    m.files.push_back("schedule.json");
    write_prices_csv(result, (d / "prices.csv").string());
    m.files.push_back("prices.csv");
    write_slack_csv(result, (d / "slack.csv").string());
    m.files.push_back("slack.csv");
    if (!result.flows.empty()) {
        write_flows_csv(result.flows, (d / "day_ahead_flows.csv").string());
        m.files.push_back("day_ahead_flows.csv");
    }
    return m;
}

// ---- real-time --------------------------------------------------------------------

std::string real_time_json(const RealTimeRun& run) {
    json j;
    j["note"] = kProfitNote;
    j["complete"] = run.complete;
    j["failed_slot"] = run.failed_slot;
    j["failure"] = run.failure;
    j["total_cost"] = run.total_cost();
    j["profit"] = run.profit();
    j["households"] = run.households;
    json pairs = json::array();
    for (const auto& [n, m] : run.pairs) pairs.push_back({n, m});
    j["pairs"] = pairs;
    json slots = json::array();
    for (const auto& s : run.slots) {
        json js;
        js["t"] = s.t;
        json trades;
        for (const auto& [id, l] : s.trades) trades[id] = ledger_json(l);
        js["trades"] = trades;
        json adj;
        for (const auto& [id, a] : s.adjustments)
            adj[id] = {{"charge", a.charge},           {"discharge", a.discharge}, {"soc_start", a.soc_start},
                       {"soc_end", a.soc_end},         {"soc_planned", a.soc_planned}, {"delta_e", a.delta_e}};
        js["adjustments"] = adj;
        js["nodal"] = s.nodal;
        js["elp"] = s.elp;
        js["gmp"] = s.gmp;
        js["household_cost"] = s.household_cost;
        js["network_cost"] = s.network_cost;
        js["penalty"] = s.penalty;
        js["binding"] = s.binding;
        js["cone_gap"] = s.cone_gap;
        js["flows"] = flows_json(s.flows);
        js["duals"] = duals_json(s.duals);
        slots.push_back(std::move(js));
    }
    j["slots"] = slots;
    json audit;
    audit["flow_slots"] = run.audit.flow_slots;
    audit["voltage_slots"] = run.audit.voltage_slots;
    audit["max_flow_slack"] = run.audit.max_flow_slack;
    audit["max_voltage_slack"] = run.audit.max_voltage_slack;
    json af = json::array();
    for (const auto& f : run.audit.flows) af.push_back(flows_json(f));
    audit["flows"] = af;
    j["audit"] = audit;
    return j.dump(2);
}

RealTimeRun parse_real_time_json(const std::string& text) {
    const json j = parse_json(text, "real-time report");
    return guarded("real-time report", [&] {
        RealTimeRun run;
        run.complete = j.at("complete").get<bool>();
        run.failed_slot = j.at("failed_slot").get<int>();
        run.failure = j.at("failure").get<std::string>();
        run.households = j.at("households").get<std::vector<std::string>>();
        for (const auto& p : j.at("pairs")) run.pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
        for (const auto& js : j.at("slots")) {
            RealTimeSlot s;
            s.t = js.at("t").get<int>();
            for (const auto& [id, l] : js.at("trades").items()) s.trades[id] = ledger_from(l);
            for (const auto& [id, a] : js.at("adjustments").items()) {
                RealTimeAdjustment ra;
                ra.charge = a.at("charge").get<double>();
                ra.discharge = a.at("discharge").get<double>();
                ra.soc_start = a.at("soc_start").get<double>();
                ra.soc_end = a.at("soc_end").get<double>();
                ra.soc_planned = a.at("soc_planned").get<double>();
                ra.delta_e = a.at("delta_e").get<double>();
                s.adjustments[id] = ra;
            }
            s.nodal = js.at("nodal").get<std::map<std::string, double>>();
            s.elp = js.at("elp").get<std::vector<double>>();
            s.gmp = js.at("gmp").get<double>();
            s.household_cost = js.at("household_cost").get<double>();
            s.network_cost = js.at("network_cost").get<double>();
            s.penalty = js.at("penalty").get<double>();
            s.binding = js.at("binding").get<std::vector<std::string>>();
            s.cone_gap = js.at("cone_gap").get<double>();
            s.flows = flows_from(js.at("flows"));
            s.duals = duals_from(js.at("duals"));
            run.slots.push_back(std::move(s));
        }
        const json& a = j.at("audit");
        run.audit.flow_slots = a.at("flow_slots").get<std::vector<int>>();
        run.audit.voltage_slots = a.at("voltage_slots").get<std::vector<int>>();
        run.audit.max_flow_slack = a.at("max_flow_slack").get<double>();
        run.audit.max_voltage_slack = a.at("max_voltage_slack").get<double>();
        for (const auto& f : a.at("flows")) run.audit.flows.push_back(flows_from(f));
        return run;
    });
}

RealTimeRun load_real_time_json(const std::string& path) { return parse_real_time_json(read_text(path)); }

Manifest emit_real_time(const RealTimeRun& run, const std::string& dir) {
    Manifest m;
    if (run.slots.empty()) return m;
    fs::create_directories(dir);
    const fs::path d(dir);
    write_text(d / "real_time.json", real_time_json(run));
    m.files.push_back("real_time.json");
    std::vector<SlotFlows> flows;
    for (const auto& s : run.slots) flows.push_back(s.flows);
    write_flows_csv({flows}, (d / "real_time_flows.csv").string());
    m.files.push_back("real_time_flows.csv");
    return m;
}

// ---- settlement and comparison ----------------------------------------------------

Manifest emit_settlement(const SettlementRecord& record, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path d(dir);
    Manifest m;
    write_settlement_csv(record, (d / "settlement.csv").string());
    m.files.push_back("settlement.csv");
    write_text(d / "settlement.json", settlement_summary_json(record));
    m.files.push_back("settlement.json");
    return m;
}

void write_comparison_csv(const Comparison& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << "# " << kProfitNote << "\n";
    out << "method,profit,gap,congested_slots,congested_fraction,relaxation_bound,per_day_profit\n";
    const double off = c.run(Method::offline).profit;
    for (const auto& r : c.runs)
        out << to_string(r.method) << ',' << csv::fmt(r.profit) << ',' << csv::fmt(std::max(0.0, off - r.profit))
            << ',' << r.congested_slots << ',' << csv::fmt(r.congested_fraction()) << ','
            << (r.relaxation_bound ? 1 : 0) << ',' << join(r.per_day_profit, ';') << '\n';
}

std::vector<ComparisonRow> load_comparison_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    expect_header(t,
                  {"method", "profit", "gap", "congested_slots", "congested_fraction", "relaxation_bound",
                   "per_day_profit"},
                  path);
    std::vector<ComparisonRow> out;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        const std::string where = path + ":" + std::to_string(t.line_numbers[i]);
        ComparisonRow r;
        r.method = row[0];
        r.profit = csv::to_double(row[1], where);
        r.gap = csv::to_double(row[2], where);
        r.congested_slots = csv::to_int(row[3], where);
        r.congested_fraction = csv::to_double(row[4], where);
        r.relaxation_bound = csv::to_int(row[5], where) != 0;
        std::stringstream ss(row[6]);
        std::string cell;
        while (std::getline(ss, cell, ';'))
            if (!cell.empty()) r.per_day_profit.push_back(csv::to_double(cell, where));
        out.push_back(std::move(r));
    }
    return out;
}

std::string comparison_json(const Comparison& c) {
    json j;
    j["note"] = kProfitNote;
    json runs = json::array();
    const double off = c.run(Method::offline).profit;
    for (const auto& r : c.runs)
        runs.push_back({{"method", to_string(r.method)},
                        {"profit", r.profit},
                        {"gap", std::max(0.0, off - r.profit)},
                        {"congested_slots", r.congested_slots},
                        {"congested_fraction", r.congested_fraction()},
                        {"relaxation_bound", r.relaxation_bound},
                        {"per_day_profit", r.per_day_profit}});
    j["methods"] = runs;
    j["gap_proposed"] = c.gap_proposed;
    j["gap_point_forecast"] = c.gap_point;
    if (std::isnan(c.reduction))
        j["gap_reduction"] = nullptr;
    else
        j["gap_reduction"] = c.reduction;
    return j.dump(2);
}

Manifest emit_comparison(const Comparison& comparison, const std::string& dir) {
    fs::create_directories(dir);
    const fs::path d(dir);
    Manifest m;
    write_comparison_csv(comparison, (d / "comparison.csv").string());
    m.files.push_back("comparison.csv");
    write_text(d / "comparison.json", comparison_json(comparison));
    m.files.push_back("comparison.json");
    return m;
}

Manifest write_manifest(Manifest manifest, const std::string& dir) {
    fs::create_directories(dir);
    std::string text;
    for (const auto& f : manifest.files) text += f + "\n";
    std::ofstream out(fs::path(dir) / "manifest.txt");
    if (!out) throw IoError("cannot write manifest in '" + dir + "'");
    out << text;
    manifest.files.push_back("manifest.txt");
    return manifest;
}

}  // namespace dermarket::reports
