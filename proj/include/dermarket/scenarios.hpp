#pragma once

#include <map>
#include <string>
#include <vector>

namespace dermarket {

enum class SeriesKind { pv, demand };

std::string to_string(SeriesKind k);
SeriesKind parse_series_kind(const std::string& s);

/// Equally likely quantile trajectories (kW) for one household and one series.
struct QuantileScenarioSet {
    SeriesKind kind = SeriesKind::pv;
    std::string household;
    std::vector<double> quantiles;                 // increasing, q_j = j / (|Q| + 1)
    std::vector<std::vector<double>> trajectories;  // [quantile][slot]

    int horizon() const { return trajectories.empty() ? 0 : static_cast<int>(trajectories.front().size()); }
    /// Throws ValidationError on bad levels, negative values or ragged rows.
    void validate() const;
    /// Sorts each slot across quantiles; returns true if anything moved.
    bool repair_crossing();
};

struct Realization {
    std::string household;
    std::vector<double> pv;
    std::vector<double> demand;
};

struct HistoryRecord {
    std::string household;
    SeriesKind kind = SeriesKind::pv;
    std::string date;
    std::vector<double> values;
};

/// q_j = j / (n + 1), j = 1..n.
std::vector<double> equally_spaced_quantiles(int n);

/// Pinball loss of a single forecast; DomainError unless 0 < q < 1.
double quantile_loss(double q, double forecast, double actual);

/// (1/|Q|) sum_t sum_q quantile_loss(q, forecast_q^t, actual^t).
double scenario_set_loss(const QuantileScenarioSet& set, const std::vector<double>& actual);

/// Linear interpolation between order statistics at (n - 1) q.
double empirical_quantile(std::vector<double> values, double q);

/// One set per (household, kind) present in the history, ordered by household then kind.
std::vector<QuantileScenarioSet> generate_empirical_scenarios(const std::vector<HistoryRecord>& history,
                                                              int n_quantiles);

/// PV and demand scenario sets of every household, sharing quantile levels and horizon.
class ScenarioBook {
public:
    ScenarioBook() = default;
    explicit ScenarioBook(const std::vector<QuantileScenarioSet>& sets);

    const std::vector<std::string>& households() const noexcept { return households_; }
    const QuantileScenarioSet& pv(const std::string& household) const;
    const QuantileScenarioSet& demand(const std::string& household) const;
    bool contains(const std::string& household) const { return pv_.count(household) != 0; }
    int horizon() const noexcept { return horizon_; }
    int num_pv() const;
    int num_demand() const;
    const std::vector<double>& pv_quantiles() const;
    const std::vector<double>& demand_quantiles() const;

    /// Single-scenario book holding the q = 0.5 trajectories.
    ScenarioBook median() const;
    /// Single-scenario book holding realized trajectories.
    static ScenarioBook from_realizations(const std::vector<Realization>& real);

    std::vector<QuantileScenarioSet> sets() const;

private:
    std::vector<std::string> households_;
    std::map<std::string, QuantileScenarioSet> pv_;
    std::map<std::string, QuantileScenarioSet> demand_;
    int horizon_ = 0;
};

ScenarioBook load_scenarios_csv(const std::string& path);
void write_scenarios_csv(const ScenarioBook& book, const std::string& path);
std::vector<Realization> load_realizations_csv(const std::string& path);
void write_realizations_csv(const std::vector<Realization>& real, const std::string& path);
std::vector<HistoryRecord> load_history_csv(const std::string& path);
void write_history_csv(const std::vector<HistoryRecord>& history, const std::string& path);

}  // namespace dermarket
