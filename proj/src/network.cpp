#include "dermarket/network.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dermarket/errors.hpp"

namespace dermarket {

using nlohmann::json;

const Line* NetworkModel::line_to(int bus) const {
    for (const auto& l : lines)
        if (l.to_bus == bus) return &l;
    return nullptr;
}

int NetworkModel::bus_of(const std::string& household) const {
    for (const auto& [bus, ids] : bus_households)
        if (std::find(ids.begin(), ids.end(), household) != ids.end()) return bus;
    throw UnknownHousehold(household);
}

std::vector<int> NetworkModel::bfs_order() const {
    std::vector<int> order;
    if (buses.empty()) return order;
    std::vector<char> seen(buses.size(), 0);
    std::deque<int> queue{0};
    seen[0] = 1;
    while (!queue.empty()) {
        int i = queue.front();
        queue.pop_front();
        order.push_back(i);
        for (int c : buses[static_cast<std::size_t>(i)].children) {
            if (c < 0 || static_cast<std::size_t>(c) >= buses.size() || seen[static_cast<std::size_t>(c)]) continue;
            seen[static_cast<std::size_t>(c)] = 1;
            queue.push_back(c);
        }
    }
    return order;
}

std::vector<std::string> validate_radial(const NetworkModel& net) {
    std::vector<std::string> out;
    const int n = static_cast<int>(net.buses.size());
    if (n == 0) {
        out.emplace_back("network has no buses");
        return out;
    }
    int roots = 0;
    for (int i = 0; i < n; ++i) {
        const Bus& b = net.buses[static_cast<std::size_t>(i)];
        if (b.id != i) out.push_back("bus at position " + std::to_string(i) + " has id " + std::to_string(b.id));
        if (!b.parent) {
            ++roots;
            if (i != 0) out.push_back("bus " + std::to_string(i) + " has no parent but is not bus 0");
        } else if (*b.parent < 0 || *b.parent >= n) {
            out.push_back("bus " + std::to_string(i) + " has unknown parent " + std::to_string(*b.parent));
        } else {
            const auto& siblings = net.buses[static_cast<std::size_t>(*b.parent)].children;
            if (std::count(siblings.begin(), siblings.end(), i) != 1)
                out.push_back("bus " + std::to_string(i) + " missing from children of its parent");
        }
        for (int c : b.children) {
            if (c < 0 || c >= n || net.buses[static_cast<std::size_t>(c)].parent != i)
                out.push_back("bus " + std::to_string(i) + " lists child " + std::to_string(c) +
                              " whose parent differs");
        }
        if (!(b.v_min_sq > 0.0 && b.v_min_sq < b.v_max_sq))
            out.push_back("bus " + std::to_string(i) + " voltage limits violate 0 < v_min_sq < v_max_sq");
    }
    if (roots != 1) out.push_back("expected exactly one root bus, found " + std::to_string(roots));
    if (net.lines.size() > static_cast<std::size_t>(n - 1)) out.emplace_back("line count exceeds radial bound");

    std::vector<int> line_count(static_cast<std::size_t>(n), 0);
    for (const auto& l : net.lines) {
        if (l.to_bus <= 0 || l.to_bus >= n) {
            out.push_back("line to invalid bus " + std::to_string(l.to_bus));
            continue;
        }
        if (++line_count[static_cast<std::size_t>(l.to_bus)] == 2)
            out.push_back("duplicate line to bus " + std::to_string(l.to_bus));
        if (l.r < 0.0 || l.x < 0.0 || !(l.s_max > 0.0))
            out.push_back("line to bus " + std::to_string(l.to_bus) + " violates r >= 0, x >= 0, s_max > 0");
    }
    for (int i = 1; i < n; ++i)
        if (line_count[static_cast<std::size_t>(i)] == 0) out.push_back("bus " + std::to_string(i) + " has no feeding line");

    std::vector<char> reached(static_cast<std::size_t>(n), 0);
    for (int i : net.bfs_order()) reached[static_cast<std::size_t>(i)] = 1;
    for (int i = 0; i < n; ++i)
        if (!reached[static_cast<std::size_t>(i)]) out.push_back("bus " + std::to_string(i) + " unreachable from root");

    std::set<std::string> seen;
    for (const auto& [bus, ids] : net.bus_households) {
        if (bus < 0 || bus >= n) out.push_back("households mapped to unknown bus " + std::to_string(bus));
        for (const auto& id : ids)
            if (!seen.insert(id).second) out.push_back("household '" + id + "' mapped to more than one bus");
    }
    if (net.slack.g_p_min > net.slack.g_p_max || net.slack.g_q_min > net.slack.g_q_max)
        out.emplace_back("slack bus bounds are inverted");
    return out;
}

namespace {

double number_or(const json& j, const char* key, double fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    if (!j.at(key).is_number()) throw ParseError(std::string("field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

}  // namespace

NetworkModel parse_network(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("network JSON: ") + e.what());
    }
    NetworkModel net;
    try {
        net.base_mva = number_or(doc, "base_mva", 1.0);
        if (!(net.base_mva > 0.0)) throw ValidationError("base_mva must be positive");
        if (doc.contains("slack")) {
            const json& s = doc.at("slack");
            net.slack.g_p_min = number_or(s, "g_p_min", net.slack.g_p_min);
            net.slack.g_p_max = number_or(s, "g_p_max", net.slack.g_p_max);
            net.slack.g_q_min = number_or(s, "g_q_min", net.slack.g_q_min);
            net.slack.g_q_max = number_or(s, "g_q_max", net.slack.g_q_max);
        }
        const json& buses = doc.at("buses");
        if (!buses.is_array()) throw ParseError("'buses' must be an array");
        const int n = static_cast<int>(buses.size());
        net.buses.resize(static_cast<std::size_t>(n));
        std::vector<char> filled(static_cast<std::size_t>(n), 0);
        for (const json& jb : buses) {
            int id = jb.at("id").get<int>();
            if (id < 0 || id >= n) throw ValidationError("bus ids must be 0.." + std::to_string(n - 1) + ", got " + std::to_string(id));
            if (filled[static_cast<std::size_t>(id)]) throw ValidationError("duplicate bus " + std::to_string(id));
            filled[static_cast<std::size_t>(id)] = 1;
            Bus& b = net.buses[static_cast<std::size_t>(id)];
            b.id = id;
            if (jb.contains("parent") && !jb.at("parent").is_null()) b.parent = jb.at("parent").get<int>();
            b.g_shunt = number_or(jb, "g_shunt", 0.0);
            b.b_shunt = number_or(jb, "b_shunt", 0.0);
            b.v_min_sq = number_or(jb, "v_min_sq", 0.81);
            b.v_max_sq = number_or(jb, "v_max_sq", 1.21);
            bool has_line = jb.contains("line") && !jb.at("line").is_null();
            if (b.parent && !has_line) throw ValidationError("bus " + std::to_string(id) + " has a parent but no line");
            if (!b.parent && has_line) throw ValidationError("root bus " + std::to_string(id) + " must not have a line");
            if (has_line) {
                const json& jl = jb.at("line");
                net.lines.push_back({id, number_or(jl, "r", 0.0), number_or(jl, "x", 0.0), number_or(jl, "s_max", 0.0)});
            }
            if (jb.contains("households")) {
                for (const json& h : jb.at("households")) net.bus_households[id].push_back(h.get<std::string>());
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("network JSON: ") + e.what());
    }

    const int n = static_cast<int>(net.buses.size());
    for (int i = 0; i < n; ++i) {
        const auto& p = net.buses[static_cast<std::size_t>(i)].parent;
        if (p && (*p < 0 || *p >= n))
            throw ValidationError("bus " + std::to_string(i) + " has unknown parent " + std::to_string(*p));
    }
    // Walking up from any bus must reach a root within n steps.
    for (int i = 0; i < n; ++i) {
        int cur = i;
        for (int steps = 0; net.buses[static_cast<std::size_t>(cur)].parent; ++steps) {
            if (steps > n) throw ValidationError("cycle through bus " + std::to_string(i));
            cur = *net.buses[static_cast<std::size_t>(cur)].parent;
        }
    }
    for (int i = 0; i < n; ++i) {
        const auto& p = net.buses[static_cast<std::size_t>(i)].parent;
        if (p) net.buses[static_cast<std::size_t>(*p)].children.push_back(i);
    }
    std::sort(net.lines.begin(), net.lines.end(), [](const Line& a, const Line& b) { return a.to_bus < b.to_bus; });
    auto problems = validate_radial(net);
    if (!problems.empty()) throw ValidationError(problems.front());
    return net;
}

NetworkModel load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read network file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_network(ss.str());
}

std::string network_to_json(const NetworkModel& net) {
    json doc;
    doc["base_mva"] = net.base_mva;
    doc["slack"] = {{"g_p_min", net.slack.g_p_min},
                    {"g_p_max", net.slack.g_p_max},
                    {"g_q_min", net.slack.g_q_min},
                    {"g_q_max", net.slack.g_q_max}};
    json buses = json::array();
    for (const auto& b : net.buses) {
        json jb;
        jb["id"] = b.id;
        jb["parent"] = b.parent ? json(*b.parent) : json(nullptr);
        jb["g_shunt"] = b.g_shunt;
        jb["b_shunt"] = b.b_shunt;
        jb["v_min_sq"] = b.v_min_sq;
        jb["v_max_sq"] = b.v_max_sq;
        const Line* l = net.line_to(b.id);
        jb["line"] = l ? json{{"r", l->r}, {"x", l->x}, {"s_max", l->s_max}} : json(nullptr);
        auto it = net.bus_households.find(b.id);
        jb["households"] = it == net.bus_households.end() ? json::array() : json(it->second);
        buses.push_back(jb);
    }
    doc["buses"] = buses;
    return doc.dump(2);
}

BusInjection map_household_injections(const NetworkModel& net,
                                      const std::map<std::string, HouseholdInjection>& injections, int t) {
    BusInjection out;
    out.p.assign(net.num_buses(), 0.0);
    out.q.assign(net.num_buses(), 0.0);
    std::map<std::string, int> where;
    for (const auto& [bus, ids] : net.bus_households)
        for (const auto& id : ids) where[id] = bus;
    for (const auto& [id, inj] : injections) {
        auto it = where.find(id);
        if (it == where.end()) throw UnknownHousehold(id);
        auto ts = static_cast<std::size_t>(t);
        if (ts >= inj.p.size() || ts >= inj.q.size())
            throw DimensionMismatch("injection of '" + id + "' does not cover slot " + std::to_string(t));
        out.p[static_cast<std::size_t>(it->second)] += inj.p[ts];
        out.q[static_cast<std::size_t>(it->second)] += inj.q[ts];
    }
    return out;
}

}  // namespace dermarket
