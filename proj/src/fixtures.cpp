#include "dermarket/fixtures.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dermarket/errors.hpp"

namespace dermarket {

namespace {

std::string params_to_json(const MarketParams& p) {
    nlohmann::json j = {{"varpi", p.varpi},         {"tau", p.tau},           {"rho", p.rho},
                        {"k_max", p.k_max},         {"eps_cost", p.eps_cost}, {"eps_slack", p.eps_slack},
                        {"theta", p.theta}};
    return j.dump(2);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << text << '\n';
}

}  // namespace

void write_study(const Study& study, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path d(dir);
    write_text(d / "network.json", network_to_json(study.net));
    write_text(d / "households.json", households_to_json(study.households));
    write_text(d / "params.json", params_to_json(study.params));
    write_scenarios_csv(study.scenarios, (d / "scenarios.csv").string());
    write_tariff_csv(study.tariff, (d / "tariff.csv").string());
    write_realizations_csv(study.realizations, (d / "realization.csv").string());
}

Study load_study(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path d(dir);
    Study s;
    s.name = d.filename().string();
    s.net = load_network((d / "network.json").string());
    s.households = load_households((d / "households.json").string());
    s.params = load_params((d / "params.json").string());
    s.scenarios = load_scenarios_csv((d / "scenarios.csv").string());
    s.tariff = load_tariff_csv((d / "tariff.csv").string());
    s.realizations = load_realizations_csv((d / "realization.csv").string());
    return s;
}

namespace fixtures {

NetworkModel chain_network(int buses, double r, double x, double s_max, double base_mva) {
    if (buses < 2) throw ValidationError("a chain needs at least two buses");
    NetworkModel net;
    net.base_mva = base_mva;
    for (int i = 0; i < buses; ++i) {
        Bus b;
        b.id = i;
        if (i > 0) b.parent = i - 1;
        if (i + 1 < buses) b.children.push_back(i + 1);
        net.buses.push_back(b);
        if (i > 0) net.lines.push_back({i, r, x, s_max});
    }
    return net;
}

namespace {

HouseholdSpec household(const std::string& id, int bus, BatterySpec battery, std::vector<std::string> partners) {
    HouseholdSpec h;
    h.id = id;
    h.bus = bus;
    h.battery = battery;
    h.partners = std::move(partners);
    return h;
}

std::vector<double> scaled(const std::vector<double>& base, double f) {
    std::vector<double> out = base;
    for (auto& v : out) v *= f;
    return out;
}

void add_sets(std::vector<QuantileScenarioSet>& sets, const std::string& id, const std::vector<double>& levels,
              const std::vector<double>& pv_factor, const std::vector<double>& pv,
              const std::vector<double>& de_factor, const std::vector<double>& demand) {
    QuantileScenarioSet p{SeriesKind::pv, id, levels, {}};
    QuantileScenarioSet d{SeriesKind::demand, id, levels, {}};
    for (std::size_t j = 0; j < levels.size(); ++j) {
        p.trajectories.push_back(scaled(pv, pv_factor[j]));
        d.trajectories.push_back(scaled(demand, de_factor[j]));
    }
    sets.push_back(std::move(p));
    sets.push_back(std::move(d));
}

}  // namespace

Study three_bus(bool congested) {
    Study s;
    s.name = congested ? "three_bus_congested" : "three_bus";
    const double z = congested ? 0.02 : 1e-3;
    s.net = chain_network(3, z, z, 1.0, 0.01);
    if (congested) s.net.lines[1].s_max = 0.2;

    BatterySpec bat;
    bat.e_min = 0.2;
    bat.e_max = 3.0;
    bat.p_max = 1.0;
    bat.e_initial = bat.e_final = 0.2;
    s.households = {household("a", 1, BatterySpec::none(), {"b"}), household("b", 2, bat, {"a"})};

    s.tariff.buy = {0.20, 0.25, 0.25, 0.30};
    s.tariff.sell = {0.05, 0.05, 0.05, 0.05};

    const std::vector<double> levels = equally_spaced_quantiles(3);
    std::vector<QuantileScenarioSet> sets;
    add_sets(sets, "a", levels, {1.0, 1.0, 1.0}, {0, 0, 0, 0}, {0.9, 1.0, 1.1}, {1.0, 1.0, 1.0, 1.0});
    add_sets(sets, "b", levels, {0.8, 1.0, 1.2}, {0, 2.9, 2.9, 0}, {0.9, 1.0, 1.1}, {0.5, 0.5, 0.5, 0.5});
    s.scenarios = ScenarioBook(sets);
    s.realizations = {{"a", {0, 0, 0, 0}, {1.0, 1.0, 1.0, 1.0}}, {"b", {0, 2.9, 2.9, 0}, {0.5, 0.5, 0.5, 0.5}}};
    return s;
}

Study single_scenario() {
    Study s;
    s.name = "single_scenario";
    s.net = chain_network(3, 0.01, 0.01, 1.0, 0.01);

    BatterySpec bat;
    bat.e_min = bat.e_initial = bat.e_final = 0.5;
    bat.e_max = 6.0;
    bat.p_max = 1.0;
    s.households = {household("p", 1, bat, {"q"}), household("q", 2, bat, {"p"})};

    // Both households export every morning slot and import every evening slot, so partner
    // trades never help and the battery plan is unique.
    s.tariff.buy = {0.100, 0.105, 0.110, 0.30, 0.32, 0.31};
    s.tariff.sell = {0.020, 0.025, 0.030, 0.020, 0.021, 0.022};

    s.realizations = {{"p", {2.0, 2.5, 1.5, 0, 0, 0}, {0.3, 0.3, 0.3, 1.2, 1.0, 1.1}},
                      {"q", {1.5, 2.0, 1.5, 0, 0, 0}, {0.2, 0.2, 0.2, 1.0, 1.1, 1.05}}};
    s.scenarios = ScenarioBook::from_realizations(s.realizations);
    return s;
}

Study feeder15(std::uint64_t seed, int n_quantiles) {
    Study s;
    s.name = "feeder15";
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);

    NetworkModel& net = s.net;
    net.base_mva = 0.1;
    const int parent[15] = {-1, 0, 1, 2, 3, 4, 1, 6, 7, 8, 1, 10, 11, 12, 13};
    for (int i = 0; i < 15; ++i) {
        Bus b;
        b.id = i;
        if (parent[i] >= 0) b.parent = parent[i];
        net.buses.push_back(b);
    }
    for (int i = 1; i < 15; ++i) {
        net.buses[static_cast<std::size_t>(parent[i])].children.push_back(i);
        const double s_max = i == 1 ? 2.0 : i == 2 ? 0.41 : 1.0;
        net.lines.push_back({i, 0.01, 0.008, s_max});
    }

    // Morning peak makes buying to fill a battery expensive; afternoon feed-in pays best.
    for (int t = 0; t < 24; ++t) {
        double buy = 0.20, sell = 0.02;
        if (t >= 8 && t <= 13) buy = 1.00;
        if (t >= 14 && t <= 17) {
            buy = 0.25;
            sell = 0.22;
        }
        s.tariff.buy.push_back(buy);
        s.tariff.sell.push_back(sell);
    }

    const std::vector<double> pv_shape = {0, 0, 0, 0, 0, 0, 0.13, 0.4, 1.2, 2.0, 2.6, 2.9,
                                          2.9, 2.6, 0.55, 0.55, 0.55, 0.55, 0.3, 0, 0, 0, 0, 0};
    std::vector<double> home_load(24), office_load(24);
    for (int t = 0; t < 24; ++t) {
        home_load[static_cast<std::size_t>(t)] = t < 8 ? 0.4 : t <= 13 ? 0.5 : t <= 17 ? 0.8 : t <= 22 ? 1.0 : 0.5;
        office_load[static_cast<std::size_t>(t)] = t < 7 ? 0.6 : t <= 17 ? 0.9 : t <= 21 ? 1.4 : 0.8;
    }

    const std::vector<double> levels = equally_spaced_quantiles(n_quantiles);
    // Morning output is poorly predicted, afternoon output well predicted.
    auto pv_level = [](double q, int t) { return t <= 13 ? 0.15 + 1.6 * q * q : 0.95 + 0.1 * q; };
    auto de_level = [](double q) { return 0.95 + 0.1 * q; };
    const double realized_morning = 0.35;

    BatterySpec bat;
    bat.p_max = 2.0;
    std::vector<QuantileScenarioSet> sets;
    auto add = [&](const std::string& id, int bus, const BatterySpec& b, std::vector<std::string> partners,
                   const std::vector<double>& pv, const std::vector<double>& load) {
        s.households.push_back(household(id, bus, b, std::move(partners)));
        QuantileScenarioSet ps{SeriesKind::pv, id, levels, {}};
        QuantileScenarioSet ds{SeriesKind::demand, id, levels, {}};
        for (double q : levels) {
            std::vector<double> p(24), d(24);
            for (int t = 0; t < 24; ++t) {
                p[static_cast<std::size_t>(t)] = pv[static_cast<std::size_t>(t)] * pv_level(q, t);
                d[static_cast<std::size_t>(t)] = load[static_cast<std::size_t>(t)] * de_level(q);
            }
            ps.trajectories.push_back(std::move(p));
            ds.trajectories.push_back(std::move(d));
        }
        sets.push_back(std::move(ps));
        sets.push_back(std::move(ds));
        Realization r{id, std::vector<double>(24), std::vector<double>(24)};
        for (int t = 0; t < 24; ++t) {
            const auto ts = static_cast<std::size_t>(t);
            const double level = t <= 13 ? realized_morning : 1.0;
            r.pv[ts] = pv[ts] * level * (1.0 + 0.02 * jitter(rng));
            r.demand[ts] = load[ts] * (1.0 + 0.02 * jitter(rng));
        }
        s.realizations.push_back(std::move(r));
    };

    auto name = [](char prefix, int k) {
        std::ostringstream os;
        os << prefix << (k < 10 ? "0" : "") << k;
        return os.str();
    };
    for (int k = 1; k <= 20; ++k) {
        const int mate = k % 2 == 1 ? k + 1 : k - 1;
        const double size = 2.2 * (1.0 + 0.1 * jitter(rng));
        add(name('b', k), 2 + (k - 1) / 5, bat, {name('b', mate)}, scaled(pv_shape, size), home_load);
    }
    for (int k = 1; k <= 10; ++k) {
        const double size = 1.0 + 0.1 * jitter(rng);
        add(name('v', k), 6 + (k - 1) * 4 / 10, BatterySpec::none(), {name('d', k)}, scaled(pv_shape, size), home_load);
    }
    const std::vector<double> no_pv(24, 0.0);
    for (int k = 1; k <= 20; ++k) {
        std::vector<std::string> partners;
        if (k <= 10) partners.push_back(name('v', k));
        else partners.push_back(name('d', k % 2 == 1 ? k + 1 : k - 1));
        const double size = 1.0 + 0.15 * jitter(rng);
        add(name('d', k), 10 + (k - 1) / 4, BatterySpec::none(), partners, no_pv, scaled(office_load, size));
    }
    s.scenarios = ScenarioBook(sets);
    return s;
}

std::vector<HistoryRecord> synthetic_history(const Study& study, int days, std::uint64_t seed) {
    if (days <= 0) throw DomainError("history needs at least one day");
    std::mt19937_64 rng(seed);
    std::lognormal_distribution<double> factor(0.0, 0.2);
    std::vector<HistoryRecord> out;
    for (const auto& r : study.realizations) {
        for (SeriesKind kind : {SeriesKind::pv, SeriesKind::demand}) {
            const auto& base = kind == SeriesKind::pv ? r.pv : r.demand;
            for (int d = 0; d < days; ++d) {
                std::ostringstream date;
                date << "day" << (d < 9 ? "0" : "") << d + 1;
                out.push_back({r.household, kind, date.str(), scaled(base, factor(rng))});
            }
        }
    }
    return out;
}

Study by_name(const std::string& name, std::uint64_t seed, int n_quantiles) {
    if (name == "feeder15") return feeder15(seed, n_quantiles);
    if (name == "three_bus") return three_bus(false);
    if (name == "three_bus_congested") return three_bus(true);
    if (name == "single_scenario") return single_scenario();
    throw ConfigError("unknown fixture '" + name + "'");
}

}  // namespace fixtures
}  // namespace dermarket
