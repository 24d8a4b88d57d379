#include "dermarket/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "csv.hpp"
#include "dermarket/errors.hpp"

namespace dermarket {

std::string to_string(SeriesKind k) { return k == SeriesKind::pv ? "pv" : "demand"; }

SeriesKind parse_series_kind(const std::string& s) {
    if (s == "pv") return SeriesKind::pv;
    if (s == "demand") return SeriesKind::demand;
    throw ParseError("unknown series kind '" + s + "' (expected pv or demand)");
}

std::vector<double> equally_spaced_quantiles(int n) {
    if (n < 1) throw DomainError("need at least one quantile");
    std::vector<double> q;
    for (int j = 1; j <= n; ++j) q.push_back(static_cast<double>(j) / (n + 1));
    return q;
}

void QuantileScenarioSet::validate() const {
    const std::string who = "scenario set " + household + "/" + to_string(kind);
    if (quantiles.empty()) throw ValidationError(who + " has no quantiles");
    if (quantiles.size() != trajectories.size()) throw ValidationError(who + " quantile count differs from trajectories");
    auto expected = equally_spaced_quantiles(static_cast<int>(quantiles.size()));
    for (std::size_t j = 0; j < quantiles.size(); ++j)
        if (std::abs(quantiles[j] - expected[j]) > 1e-6)
            throw ValidationError(who + " quantile levels must be j/(|Q|+1)");
    const std::size_t T = trajectories.front().size();
    for (const auto& row : trajectories) {
        if (row.size() != T) throw ValidationError(who + " has ragged trajectories");
        for (double v : row)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(who + " has a negative or non-finite value");
    }
}

bool QuantileScenarioSet::repair_crossing() {
    bool moved = false;
    const int T = horizon();
    std::vector<double> col(trajectories.size());
    for (int t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < trajectories.size(); ++j) col[j] = trajectories[j][static_cast<std::size_t>(t)];
        if (std::is_sorted(col.begin(), col.end())) continue;
        moved = true;
        std::sort(col.begin(), col.end());
        for (std::size_t j = 0; j < trajectories.size(); ++j) trajectories[j][static_cast<std::size_t>(t)] = col[j];
    }
    return moved;
}

double quantile_loss(double q, double forecast, double actual) {
    if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
    double err = std::abs(forecast - actual);
    return actual <= forecast ? (1.0 - q) * err : q * err;
}

double scenario_set_loss(const QuantileScenarioSet& set, const std::vector<double>& actual) {
    if (set.trajectories.size() != set.quantiles.size())
        throw DimensionMismatch("scenario set has mismatched quantile rows");
    double total = 0.0;
    for (std::size_t j = 0; j < set.quantiles.size(); ++j) {
        if (set.trajectories[j].size() != actual.size())
            throw DimensionMismatch("forecast horizon " + std::to_string(set.trajectories[j].size()) +
                                    " differs from actual " + std::to_string(actual.size()));
        for (std::size_t t = 0; t < actual.size(); ++t)
            total += quantile_loss(set.quantiles[j], set.trajectories[j][t], actual[t]);
    }
    return total / static_cast<double>(set.quantiles.size());
}

double empirical_quantile(std::vector<double> values, double q) {
    if (values.empty()) throw InsufficientHistory("no values to take a quantile of");
    std::sort(values.begin(), values.end());
    double h = (static_cast<double>(values.size()) - 1.0) * q;
    auto lo = static_cast<std::size_t>(std::floor(h));
    std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<QuantileScenarioSet> generate_empirical_scenarios(const std::vector<HistoryRecord>& history,
                                                              int n_quantiles) {
    if (n_quantiles < 1) throw DomainError("n_quantiles must be at least 1");
    std::map<std::pair<std::string, SeriesKind>, std::vector<const HistoryRecord*>> groups;
    for (const auto& h : history) groups[{h.household, h.kind}].push_back(&h);
    const auto levels = equally_spaced_quantiles(n_quantiles);
    std::vector<QuantileScenarioSet> out;
    for (const auto& [key, days] : groups) {
        if (static_cast<int>(days.size()) < n_quantiles)
            throw InsufficientHistory("household '" + key.first + "' " + to_string(key.second) + " has " +
                                      std::to_string(days.size()) + " days, need " + std::to_string(n_quantiles));
        const std::size_t T = days.front()->values.size();
        for (const auto* d : days)
            if (d->values.size() != T) throw DimensionMismatch("history days of '" + key.first + "' differ in length");
        QuantileScenarioSet set;
        set.household = key.first;
        set.kind = key.second;
        set.quantiles = levels;
        set.trajectories.assign(levels.size(), std::vector<double>(T, 0.0));
        std::vector<double> column(days.size());
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t k = 0; k < days.size(); ++k) column[k] = std::max(0.0, days[k]->values[t]);
            for (std::size_t j = 0; j < levels.size(); ++j) set.trajectories[j][t] = empirical_quantile(column, levels[j]);
        }
        set.repair_crossing();
        out.push_back(std::move(set));
    }
    return out;
}

ScenarioBook::ScenarioBook(const std::vector<QuantileScenarioSet>& sets) {
    std::set<std::string> names;
    const std::vector<double>* levels = nullptr;
    for (const auto& s : sets) {
        s.validate();
        if (horizon_ == 0) horizon_ = s.horizon();
        if (s.horizon() != horizon_) throw DimensionMismatch("scenario sets disagree on the horizon");
        if (levels && *levels != s.quantiles) throw DimensionMismatch("scenario sets disagree on quantile levels");
        levels = &s.quantiles;
        auto& target = s.kind == SeriesKind::pv ? pv_ : demand_;
        if (!target.emplace(s.household, s).second)
            throw ValidationError("duplicate " + to_string(s.kind) + " scenario set for '" + s.household + "'");
        names.insert(s.household);
    }
    for (const auto& n : names) {
        if (!pv_.count(n) || !demand_.count(n))
            throw ValidationError("household '" + n + "' needs both pv and demand scenarios");
        households_.push_back(n);
    }
}

const QuantileScenarioSet& ScenarioBook::pv(const std::string& household) const {
    auto it = pv_.find(household);
    if (it == pv_.end()) throw UnknownHousehold(household);
    return it->second;
}

const QuantileScenarioSet& ScenarioBook::demand(const std::string& household) const {
    auto it = demand_.find(household);
    if (it == demand_.end()) throw UnknownHousehold(household);
    return it->second;
}

int ScenarioBook::num_pv() const { return pv_.empty() ? 0 : static_cast<int>(pv_.begin()->second.quantiles.size()); }
int ScenarioBook::num_demand() const {
    return demand_.empty() ? 0 : static_cast<int>(demand_.begin()->second.quantiles.size());
}

const std::vector<double>& ScenarioBook::pv_quantiles() const {
    static const std::vector<double> none;
    return pv_.empty() ? none : pv_.begin()->second.quantiles;
}

const std::vector<double>& ScenarioBook::demand_quantiles() const {
    static const std::vector<double> none;
    return demand_.empty() ? none : demand_.begin()->second.quantiles;
}

ScenarioBook ScenarioBook::median() const {
    std::vector<QuantileScenarioSet> out;
    for (const auto& s : sets()) {
        auto it = std::find_if(s.quantiles.begin(), s.quantiles.end(), [](double q) { return std::abs(q - 0.5) < 1e-9; });
        if (it == s.quantiles.end()) throw DomainError("scenario set of '" + s.household + "' has no median level");
        QuantileScenarioSet m = s;
        m.quantiles = {0.5};
        m.trajectories = {s.trajectories[static_cast<std::size_t>(it - s.quantiles.begin())]};
        out.push_back(std::move(m));
    }
    return ScenarioBook(out);
}

ScenarioBook ScenarioBook::from_realizations(const std::vector<Realization>& real) {
    std::vector<QuantileScenarioSet> out;
    for (const auto& r : real) {
        out.push_back({SeriesKind::pv, r.household, {0.5}, {r.pv}});
        out.push_back({SeriesKind::demand, r.household, {0.5}, {r.demand}});
    }
    return ScenarioBook(out);
}

std::vector<QuantileScenarioSet> ScenarioBook::sets() const {
    std::vector<QuantileScenarioSet> out;
    for (const auto& n : households_) {
        out.push_back(pv_.at(n));
        out.push_back(demand_.at(n));
    }
    return out;
}

namespace {

int slot_columns(const csv::Table& t, std::size_t first, const std::string& path) {
    for (std::size_t c = first; c < t.header.size(); ++c)
        if (t.header[c] != "t" + std::to_string(c - first + 1))
            throw ParseError(path + ": expected column t" + std::to_string(c - first + 1) + ", found '" + t.header[c] + "'");
    if (t.header.size() <= first) throw ParseError(path + ": no slot columns");
    return static_cast<int>(t.header.size() - first);
}

void expect_prefix(const csv::Table& t, const std::vector<std::string>& cols, const std::string& path) {
    for (std::size_t c = 0; c < cols.size(); ++c)
        if (c >= t.header.size() || t.header[c] != cols[c])
            throw ParseError(path + ": column " + std::to_string(c + 1) + " must be '" + cols[c] + "'");
}

std::vector<double> read_values(const csv::Table& t, std::size_t row, std::size_t first, const std::string& path) {
    std::vector<double> v;
    const std::string where = path + ":" + std::to_string(t.line_numbers[row]);
    for (std::size_t c = first; c < t.header.size(); ++c) v.push_back(csv::to_double(t.rows[row][c], where));
    return v;
}

std::string slot_header(int T) {
    std::string h;
    for (int t = 1; t <= T; ++t) h += ",t" + std::to_string(t);
    return h;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write '" + path + "'");
    return os;
}

}  // namespace

ScenarioBook load_scenarios_csv(const std::string& path) {
    csv::Table t = csv::read(path);
    expect_prefix(t, {"household", "kind", "quantile"}, path);
    slot_columns(t, 3, path);
    std::map<std::pair<std::string, SeriesKind>, QuantileScenarioSet> sets;
    std::vector<std::pair<std::string, SeriesKind>> order;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string where = path + ":" + std::to_string(t.line_numbers[r]);
        std::pair<std::string, SeriesKind> key{t.rows[r][0], parse_series_kind(t.rows[r][1])};
        auto [it, fresh] = sets.try_emplace(key);
        if (fresh) {
            order.push_back(key);
            it->second.household = key.first;
            it->second.kind = key.second;
        }
        it->second.quantiles.push_back(csv::to_double(t.rows[r][2], where));
        it->second.trajectories.push_back(read_values(t, r, 3, path));
    }
    std::vector<QuantileScenarioSet> out;
    for (const auto& key : order) {
        auto& s = sets.at(key);
        // Rows may come in any order; sort by level first.
        std::vector<std::size_t> idx(s.quantiles.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.quantiles[a] < s.quantiles[b]; });
        QuantileScenarioSet sorted{s.kind, s.household, {}, {}};
        for (auto i : idx) {
            sorted.quantiles.push_back(s.quantiles[i]);
            sorted.trajectories.push_back(s.trajectories[i]);
        }
        if (sorted.repair_crossing())
            spdlog::warn("{}: quantile crossing in {}/{} repaired by sorting each slot", path, sorted.household,
                         to_string(sorted.kind));
        out.push_back(std::move(sorted));
    }
    return ScenarioBook(out);
}

void write_scenarios_csv(const ScenarioBook& book, const std::string& path) {
    auto os = open_out(path);
    os << "household,kind,quantile" << slot_header(book.horizon()) << '\n';
    for (const auto& s : book.sets()) {
        for (std::size_t j = 0; j < s.quantiles.size(); ++j) {
            os << s.household << ',' << to_string(s.kind) << ',' << csv::fmt(s.quantiles[j]);
            for (double v : s.trajectories[j]) os << ',' << csv::fmt(v);
            os << '\n';
        }
    }
}

std::vector<Realization> load_realizations_csv(const std::string& path) {
    csv::Table t = csv::read(path);
    expect_prefix(t, {"household", "kind"}, path);
    slot_columns(t, 2, path);
    std::map<std::string, Realization> by_id;
    std::vector<std::string> order;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const std::string& id = t.rows[r][0];
        SeriesKind kind = parse_series_kind(t.rows[r][1]);
        auto [it, fresh] = by_id.try_emplace(id);
        if (fresh) order.push_back(id);
        it->second.household = id;
        auto& target = kind == SeriesKind::pv ? it->second.pv : it->second.demand;
        if (!target.empty()) throw ParseError(path + ": duplicate " + to_string(kind) + " row for '" + id + "'");
        target = read_values(t, r, 2, path);
        for (double v : target)
            if (!(v >= 0.0)) throw ValidationError(path + ": negative realized value for '" + id + "'");
    }
    std::vector<Realization> out;
    for (const auto& id : order) {
        auto& r = by_id.at(id);
        if (r.pv.empty() || r.demand.empty()) throw ValidationError(path + ": '" + id + "' needs pv and demand rows");
        out.push_back(std::move(r));
    }
    return out;
}

void write_realizations_csv(const std::vector<Realization>& real, const std::string& path) {
    auto os = open_out(path);
    int T = real.empty() ? 0 : static_cast<int>(real.front().pv.size());
    os << "household,kind" << slot_header(T) << '\n';
    for (const auto& r : real) {
        os << r.household << ",pv";
        for (double v : r.pv) os << ',' << csv::fmt(v);
        os << '\n' << r.household << ",demand";
        for (double v : r.demand) os << ',' << csv::fmt(v);
        os << '\n';
    }
}

std::vector<HistoryRecord> load_history_csv(const std::string& path) {
    csv::Table t = csv::read(path);
    expect_prefix(t, {"household", "kind", "date"}, path);
    slot_columns(t, 3, path);
    std::vector<HistoryRecord> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        out.push_back({t.rows[r][0], parse_series_kind(t.rows[r][1]), t.rows[r][2], read_values(t, r, 3, path)});
    return out;
}

void write_history_csv(const std::vector<HistoryRecord>& history, const std::string& path) {
    auto os = open_out(path);
    int T = history.empty() ? 0 : static_cast<int>(history.front().values.size());
    os << "household,kind,date" << slot_header(T) << '\n';
    for (const auto& h : history) {
        os << h.household << ',' << to_string(h.kind) << ',' << h.date;
        for (double v : h.values) os << ',' << csv::fmt(v);
        os << '\n';
    }
}

}  // namespace dermarket
