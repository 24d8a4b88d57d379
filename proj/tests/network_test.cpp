#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "dermarket/dayahead.hpp"
#include "dermarket/errors.hpp"
#include "dermarket/fixtures.hpp"
#include "dermarket/network.hpp"
#include "test_util.hpp"

using namespace dermarket;

namespace {

const char* kTwoBus = R"({
  "base_mva": 1.0,
  "slack": {"g_p_min": -5, "g_p_max": 5, "g_q_min": -5, "g_q_max": 5},
  "buses": [
    {"id": 0, "parent": null, "g_shunt": 0, "b_shunt": 0, "v_min_sq": 0.81, "v_max_sq": 1.21, "line": null, "households": []},
    {"id": 1, "parent": 0, "g_shunt": 0, "b_shunt": 0, "v_min_sq": 0.81, "v_max_sq": 1.21,
     "line": {"r": 0.01, "x": 0.01, "s_max": 1.0}, "households": ["h1"]}
  ]
})";

NetworkModel random_tree(std::mt19937_64& rng, int n) {
    NetworkModel net;
    for (int i = 0; i < n; ++i) {
        Bus b;
        b.id = i;
        if (i > 0) {
            std::uniform_int_distribution<int> pick(0, i - 1);
            b.parent = pick(rng);
        }
        net.buses.push_back(b);
    }
    for (int i = 1; i < n; ++i) {
        net.buses[static_cast<std::size_t>(*net.buses[static_cast<std::size_t>(i)].parent)].children.push_back(i);
        net.lines.push_back({i, 0.01, 0.01, 1.0});
    }
    return net;
}

}  // namespace

TEST(Network, ParsesMinimalTree) {
    NetworkModel net = parse_network(kTwoBus);
    EXPECT_EQ(net.num_buses(), 2u);
    EXPECT_EQ(net.lines.size(), 1u);
    EXPECT_EQ(net.bus_of("h1"), 1);
    EXPECT_TRUE(validate_radial(net).empty());
}

TEST(Network, JsonRoundTrip) {
    NetworkModel net = fixtures::feeder15().net;
    NetworkModel back = parse_network(network_to_json(net));
    EXPECT_EQ(network_to_json(back), network_to_json(net));
}

TEST(Network, CycleIsRejected) {
    const char* text = R"({"base_mva": 1, "slack": {"g_p_min": -1, "g_p_max": 1, "g_q_min": -1, "g_q_max": 1},
      "buses": [
        {"id": 0, "parent": null, "line": null, "households": []},
        {"id": 1, "parent": 0, "line": {"r": 0.01, "x": 0.01, "s_max": 1}, "households": []},
        {"id": 2, "parent": 3, "line": {"r": 0.01, "x": 0.01, "s_max": 1}, "households": []},
        {"id": 3, "parent": 2, "line": {"r": 0.01, "x": 0.01, "s_max": 1}, "households": []}
      ]})";
    try {
        parse_network(text);
        FAIL() << "cycle accepted";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("cycle"), std::string::npos) << e.what();
    }
}

TEST(Network, MalformedJsonIsParseError) {
    EXPECT_THROW(parse_network("{\"buses\": [}"), ParseError);
}

TEST(Network, DefaultVoltageLimits) {
    const char* text = R"({"base_mva": 1, "slack": {"g_p_min": -1, "g_p_max": 1, "g_q_min": -1, "g_q_max": 1},
      "buses": [
        {"id": 0, "parent": null, "line": null, "households": []},
        {"id": 1, "parent": 0, "line": {"r": 0.01, "x": 0.01, "s_max": 1}, "households": []}
      ]})";
    NetworkModel net = parse_network(text);
    EXPECT_DOUBLE_EQ(net.buses[1].v_min_sq, 0.81);
    EXPECT_DOUBLE_EQ(net.buses[1].v_max_sq, 1.21);
}

TEST(Network, BadBoundsAreRejected) {
    std::string text = kTwoBus;
    text.replace(text.find("\"s_max\": 1.0"), 12, "\"s_max\": 0.0");
    EXPECT_THROW(parse_network(text), ValidationError);
}

TEST(Network, OrphanBusIsReported) {
    NetworkModel net = fixtures::chain_network(6, 0.01, 0.01, 1.0);
    // Detach bus 5 from its parent's child list and drop its line.
    net.buses[4].children.clear();
    net.buses[5].parent.reset();
    net.lines.pop_back();
    auto problems = validate_radial(net);
    EXPECT_NE(std::find(problems.begin(), problems.end(), "bus 5 unreachable from root"), problems.end());
}

TEST(Network, TooManyLinesIsReported) {
    NetworkModel net = fixtures::chain_network(3, 0.01, 0.01, 1.0);
    net.lines.push_back({2, 0.01, 0.01, 1.0});
    auto problems = validate_radial(net);
    EXPECT_NE(std::find(problems.begin(), problems.end(), "line count exceeds radial bound"), problems.end());
}

TEST(Network, Feeder15Counts) {
    Study s = fixtures::feeder15();
    NetworkModel net = with_households(s.net, s.households);
    EXPECT_EQ(net.num_buses(), 15u);
    EXPECT_EQ(net.lines.size(), 14u);
    std::set<std::string> mapped;
    std::size_t total = 0;
    for (const auto& [bus, ids] : net.bus_households) {
        total += ids.size();
        mapped.insert(ids.begin(), ids.end());
    }
    EXPECT_EQ(total, 50u);
    EXPECT_EQ(mapped.size(), 50u);
}

TEST(Network, MapInjectionsSumsPerBus) {
    NetworkModel net = fixtures::chain_network(8, 0.01, 0.01, 1.0);
    net.bus_households[3] = {"a", "b"};
    std::map<std::string, HouseholdInjection> inj;
    inj["a"] = {{1.0}, {0.1}};
    inj["b"] = {{-0.4}, {0.0}};
    BusInjection h = map_household_injections(net, inj, 0);
    EXPECT_DOUBLE_EQ(h.p[3], 0.6);
    EXPECT_DOUBLE_EQ(h.q[3], 0.1);
    EXPECT_EQ(h.p[7], 0.0);
    EXPECT_EQ(h.q[7], 0.0);
}

TEST(Network, MapInjectionsUnknownHousehold) {
    NetworkModel net = fixtures::chain_network(3, 0.01, 0.01, 1.0);
    std::map<std::string, HouseholdInjection> inj;
    inj["ghost"] = {{1.0}, {0.0}};
    EXPECT_THROW(map_household_injections(net, inj, 0), UnknownHousehold);
}

TEST(Network, Feeder15AggregationMatchesResummation) {
    Study s = fixtures::feeder15();
    NetworkModel net = with_households(s.net, s.households);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 2.0);
    std::map<std::string, HouseholdInjection> inj;
    for (const auto& h : s.households) inj[h.id] = {{g(rng)}, {g(rng)}};
    BusInjection h = map_household_injections(net, inj, 0);
    for (std::size_t bus = 0; bus < net.num_buses(); ++bus) {
        double p = 0.0, q = 0.0;
        for (const auto& hh : s.households)
            if (static_cast<std::size_t>(hh.bus) == bus) {
                p += inj[hh.id].p[0];
                q += inj[hh.id].q[0];
            }
        EXPECT_NEAR(h.p[bus], p, 1e-12);
        EXPECT_NEAR(h.q[bus], q, 1e-12);
    }
}

TEST(NetworkProperty, RandomTreesAreRadial) {
    std::mt19937_64 rng(5);
    for (int c = 0; c < 1000; ++c) {
        std::uniform_int_distribution<int> size(1, 30);
        NetworkModel net = random_tree(rng, size(rng));
        ASSERT_TRUE(validate_radial(net).empty());
        ASSERT_EQ(net.lines.size() + 1, net.num_buses());
        std::vector<int> order = net.bfs_order();
        std::set<int> seen(order.begin(), order.end());
        ASSERT_EQ(order.size(), net.num_buses());
        ASSERT_EQ(seen.size(), net.num_buses());
    }
}

TEST(NetworkProperty, AggregationIsLinearAndConservative) {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int c = 0; c < 1000; ++c) {
        std::uniform_int_distribution<int> size(2, 12);
        NetworkModel net = random_tree(rng, size(rng));
        std::uniform_int_distribution<int> bus(0, static_cast<int>(net.num_buses()) - 1);
        std::map<std::string, HouseholdInjection> inj, scaled;
        const double alpha = g(rng);
        double total = 0.0;
        for (int k = 0; k < 6; ++k) {
            std::string id = "h" + std::to_string(k);
            net.bus_households[bus(rng)].push_back(id);
            double p = g(rng), q = g(rng);
            inj[id] = {{p}, {q}};
            scaled[id] = {{alpha * p}, {alpha * q}};
            total += p;
        }
        BusInjection a = map_household_injections(net, inj, 0);
        BusInjection b = map_household_injections(net, scaled, 0);
        double sum = 0.0;
        for (std::size_t i = 0; i < net.num_buses(); ++i) {
            ASSERT_NEAR(b.p[i], alpha * a.p[i], 1e-12);
            ASSERT_NEAR(b.q[i], alpha * a.q[i], 1e-12);
            sum += a.p[i];
        }
        ASSERT_NEAR(sum, total, 1e-12);
    }
}
