#include <algorithm>
#include <cmath>
#include <queue>

#include <spdlog/spdlog.h>

#include "dermarket/errors.hpp"
#include "dermarket/solver/solver.hpp"
#include "ipm.hpp"

namespace dermarket::solver {

std::string_view to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::infeasible: return "infeasible";
        case SolveStatus::unbounded: return "unbounded";
        case SolveStatus::iteration_limit: return "iteration_limit";
    }
    return "unknown";
}

double Solution::dual(std::string_view tag) const {
    auto it = duals.find(tag);
    if (it == duals.end()) throw ConfigError("no dual recorded for tag '" + std::string(tag) + "'");
    return it->second;
}

std::optional<double> Solution::find_dual(std::string_view tag) const {
    auto it = duals.find(tag);
    if (it == duals.end()) return std::nullopt;
    return it->second;
}

namespace {

constexpr double kBigBound = 1e20;

// Where a row of the standard form came from, for dual extraction and blame.
struct RowOrigin {
    enum Kind { linear, lower_bound, upper_bound } kind = linear;
    int index = 0;  // constraint or variable index
    double sign = 1.0;
};

struct Conversion {
    detail::StandardForm sf;
    std::vector<int> column;        // program variable -> column, -1 when fixed
    std::vector<double> fixed_value;
    double objective_offset = 0.0;
    std::vector<RowOrigin> a_rows;
    std::vector<RowOrigin> g_lp_rows;
    std::vector<int> dropped_eq;    // linear rows with no free variable
};

bool is_fixed(double lb, double ub) { return lb == ub; }

Conversion convert(const ConicProgram& prog, const std::vector<double>& lb, const std::vector<double>& ub) {
    Conversion cv;
    const std::size_t nv = prog.num_variables();
    cv.column.assign(nv, -1);
    cv.fixed_value.assign(nv, 0.0);
    int n = 0;
    for (std::size_t j = 0; j < nv; ++j) {
        if (lb[j] > ub[j] + 1e-12)
            throw Infeasible("variable bounds cross", prog.variables()[j].name);
        if (is_fixed(lb[j], ub[j])) {
            cv.fixed_value[j] = lb[j];
        } else {
            cv.column[j] = n++;
        }
    }
    const auto& obj = prog.objective();
    cv.sf.c = Eigen::VectorXd::Zero(n);
    cv.objective_offset = prog.objective_constant();
    for (std::size_t j = 0; j < nv; ++j) {
        if (cv.column[j] >= 0) cv.sf.c(cv.column[j]) = obj[j];
        else cv.objective_offset += obj[j] * cv.fixed_value[j];
    }

    // Substitutes fixed variables; returns the constant picked up.
    auto emit = [&](const LinExpr& e, double scale, int row, std::vector<Eigen::Triplet<double>>& trip) {
        double constant = 0.0;
        for (auto [i, c] : e.terms()) {
            int col = cv.column[static_cast<std::size_t>(i)];
            if (col >= 0) trip.emplace_back(row, col, scale * c);
            else constant += c * cv.fixed_value[static_cast<std::size_t>(i)];
        }
        return constant;
    };
    auto has_free = [&](const LinExpr& e) {
        return std::any_of(e.terms().begin(), e.terms().end(),
                           [&](const auto& t) { return cv.column[static_cast<std::size_t>(t.first)] >= 0; });
    };

    std::vector<Eigen::Triplet<double>> ta, tg;
    std::vector<double> b, h;
    const auto& lin = prog.linear();
    for (std::size_t r = 0; r < lin.size(); ++r) {
        const auto& row = lin[r];
        if (row.sense != Sense::eq) continue;
        if (!has_free(row.expr)) {
            cv.dropped_eq.push_back(static_cast<int>(r));
            continue;
        }
        int ri = static_cast<int>(b.size());
        double k = emit(row.expr, 1.0, ri, ta);
        b.push_back(row.rhs - k);
        cv.a_rows.push_back({RowOrigin::linear, static_cast<int>(r), 1.0});
    }
    for (std::size_t r = 0; r < lin.size(); ++r) {
        const auto& row = lin[r];
        if (row.sense == Sense::eq) continue;
        double sign = row.sense == Sense::le ? 1.0 : -1.0;
        if (!has_free(row.expr)) {
            double k = row.expr.evaluate(cv.fixed_value);
            if (sign * (k - row.rhs) > 1e-9) throw Infeasible("constant constraint violated", row.tag);
            continue;
        }
        int ri = static_cast<int>(h.size());
        double k = emit(row.expr, sign, ri, tg);
        h.push_back(sign * (row.rhs - k));
        cv.g_lp_rows.push_back({RowOrigin::linear, static_cast<int>(r), sign});
    }
    for (std::size_t j = 0; j < nv; ++j) {
        int col = cv.column[j];
        if (col < 0) continue;
        if (lb[j] > -kBigBound) {
            tg.emplace_back(static_cast<int>(h.size()), col, -1.0);
            h.push_back(-lb[j]);
            cv.g_lp_rows.push_back({RowOrigin::lower_bound, static_cast<int>(j), -1.0});
        }
        if (ub[j] < kBigBound) {
            tg.emplace_back(static_cast<int>(h.size()), col, 1.0);
            h.push_back(ub[j]);
            cv.g_lp_rows.push_back({RowOrigin::upper_bound, static_cast<int>(j), 1.0});
        }
    }
    cv.sf.lp_rows = static_cast<int>(h.size());
    // Cone rows: s = (t, u) = h - G x.
    for (const auto& cone : prog.cones()) {
        auto push = [&](const LinExpr& e) {
            int ri = static_cast<int>(h.size());
            double k = emit(e, -1.0, ri, tg);
            h.push_back(e.constant() + k);
        };
        push(cone.t);
        for (const auto& u : cone.u) push(u);
        cv.sf.soc_dims.push_back(static_cast<int>(cone.u.size()) + 1);
    }

    cv.sf.A.resize(static_cast<int>(b.size()), n);
    cv.sf.A.setFromTriplets(ta.begin(), ta.end());
    cv.sf.A.makeCompressed();
    cv.sf.b = Eigen::Map<Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
    cv.sf.G.resize(static_cast<int>(h.size()), n);
    cv.sf.G.setFromTriplets(tg.begin(), tg.end());
    cv.sf.G.makeCompressed();
    cv.sf.h = Eigen::Map<Eigen::VectorXd>(h.data(), static_cast<Eigen::Index>(h.size()));
    return cv;
}

std::string blame_tag(const ConicProgram& prog, const RowOrigin& o) {
    if (o.kind == RowOrigin::linear) {
        const auto& tag = prog.linear()[static_cast<std::size_t>(o.index)].tag;
        return tag.empty() ? "row " + std::to_string(o.index) : tag;
    }
    const auto& name = prog.variables()[static_cast<std::size_t>(o.index)].name;
    return name + (o.kind == RowOrigin::lower_bound ? " lower bound" : " upper bound");
}

// Constraint with the largest certificate multiplier.
std::string certificate_tag(const ConicProgram& prog, const Conversion& cv, const detail::IpmResult& r) {
    double best = -1.0;
    std::string tag;
    for (std::size_t i = 0; i < cv.a_rows.size(); ++i) {
        if (std::abs(r.y(static_cast<Eigen::Index>(i))) > best) {
            best = std::abs(r.y(static_cast<Eigen::Index>(i)));
            tag = blame_tag(prog, cv.a_rows[i]);
        }
    }
    for (std::size_t i = 0; i < cv.g_lp_rows.size(); ++i) {
        if (r.z(static_cast<Eigen::Index>(i)) > best) {
            best = r.z(static_cast<Eigen::Index>(i));
            tag = blame_tag(prog, cv.g_lp_rows[i]);
        }
    }
    int off = cv.sf.lp_rows;
    for (std::size_t k = 0; k < prog.cones().size(); ++k) {
        if (r.z(off) > best) {
            best = r.z(off);
            const auto& t = prog.cones()[k].tag;
            tag = t.empty() ? "cone " + std::to_string(k) : t;
        }
        off += cv.sf.soc_dims[k];
    }
    return tag;
}

Solution solve_with_bounds(const ConicProgram& prog, const std::vector<double>& lb, const std::vector<double>& ub,
                           const SolveOptions& opts) {
    Conversion cv = convert(prog, lb, ub);
    for (int r : cv.dropped_eq) {
        const auto& row = prog.linear()[static_cast<std::size_t>(r)];
        double k = row.expr.evaluate(cv.fixed_value);
        if (std::abs(k - row.rhs) > 1e-9 * (1.0 + std::abs(row.rhs)))
            throw Infeasible("constant equality violated", row.tag);
    }

    detail::IpmSettings settings;
    settings.tol = opts.ipm_tol;
    settings.max_iterations = opts.max_iterations;
    settings.ruiz_passes = opts.ruiz_passes;
    detail::IpmResult r;
    if (cv.sf.c.size() == 0) {
        r.status = detail::IpmStatus::optimal;
        r.x.resize(0);
        r.y = Eigen::VectorXd::Zero(cv.sf.A.rows());
        r.z = Eigen::VectorXd::Zero(cv.sf.G.rows());
        r.s = cv.sf.h;
    } else {
        r = detail::solve_ipm(cv.sf, settings);
    }

    if (r.status == detail::IpmStatus::primal_infeasible)
        throw Infeasible("program '" + prog.name() + "' is infeasible", certificate_tag(prog, cv, r));
    if (r.status == detail::IpmStatus::dual_infeasible)
        throw NumericalFailure("program '" + prog.name() + "' is unbounded", "");

    Solution sol;
    sol.iterations = r.iterations;
    sol.primal.assign(prog.num_variables(), 0.0);
    for (std::size_t j = 0; j < prog.num_variables(); ++j)
        sol.primal[j] = cv.column[j] >= 0 ? r.x(cv.column[j]) : cv.fixed_value[j];

    if (r.status != detail::IpmStatus::optimal) {
        Violation v = max_violation(prog, sol.primal);
        throw NumericalFailure("interior point method failed on '" + prog.name() + "' (max violation " +
                                   std::to_string(v.amount) + ")",
                               v.tag);
    }
    sol.status = SolveStatus::optimal;
    sol.objective_value = cv.objective_offset + r.pcost;
    sol.dual_objective = cv.objective_offset + r.dcost;

    const auto& lin = prog.linear();
    sol.row_duals.assign(lin.size(), 0.0);
    for (std::size_t i = 0; i < cv.a_rows.size(); ++i)
        sol.row_duals[static_cast<std::size_t>(cv.a_rows[i].index)] = -r.y(static_cast<Eigen::Index>(i));
    for (std::size_t i = 0; i < cv.g_lp_rows.size(); ++i) {
        const auto& o = cv.g_lp_rows[i];
        if (o.kind == RowOrigin::linear) sol.row_duals[static_cast<std::size_t>(o.index)] = r.z(static_cast<Eigen::Index>(i));
    }
    for (std::size_t k = 0; k < lin.size(); ++k)
        if (!lin[k].tag.empty()) sol.duals[lin[k].tag] = sol.row_duals[k];

    int off = cv.sf.lp_rows;
    const auto& cones = prog.cones();
    sol.cone_duals.resize(cones.size());
    sol.cone_slack.resize(cones.size());
    for (std::size_t k = 0; k < cones.size(); ++k) {
        const int q = cv.sf.soc_dims[k];
        Eigen::VectorXd zk = r.z.segment(off, q);
        sol.cone_duals[k].assign(zk.data(), zk.data() + q);
        double scalar = zk(0);
        if (!cones[k].dual_weights.empty()) {
            scalar = 0.0;
            for (int i = 0; i < q; ++i) scalar += cones[k].dual_weights[static_cast<std::size_t>(i)] * zk(i);
        }
        if (!cones[k].tag.empty()) sol.duals[cones[k].tag] = scalar;
        double norm = 0.0;
        for (const auto& u : cones[k].u) norm += std::pow(u.evaluate(sol.primal), 2);
        sol.cone_slack[k] = cones[k].t.evaluate(sol.primal) - std::sqrt(norm);
        off += q;
    }
    return sol;
}

void base_bounds(const ConicProgram& prog, std::vector<double>& lb, std::vector<double>& ub) {
    lb.clear();
    ub.clear();
    for (const auto& v : prog.variables()) {
        lb.push_back(v.lb);
        ub.push_back(v.ub);
    }
}

struct PairState {
    double violation = 0.0;  // min(charge, discharge)
    int worst = -1;
};

PairState pair_state(const ConicProgram& prog, const std::vector<double>& x, const std::vector<double>& lb,
                     const std::vector<double>& ub, double tol) {
    PairState ps;
    const auto& pairs = prog.complementarity();
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto& pr = pairs[k];
        double v = std::min(x[static_cast<std::size_t>(pr.charge.index)], x[static_cast<std::size_t>(pr.discharge.index)]);
        auto mi = static_cast<std::size_t>(pr.mode.index);
        if (lb[mi] == ub[mi]) continue;
        if (v > tol && v > ps.violation) {
            ps.violation = v;
            ps.worst = static_cast<int>(k);
        }
    }
    return ps;
}

int most_fractional(const ConicProgram& prog, const std::vector<double>& x, const std::vector<double>& lb,
                    const std::vector<double>& ub, double tol, const std::vector<char>& in_pair) {
    int best = -1;
    double best_frac = tol;
    const auto& vars = prog.variables();
    for (std::size_t j = 0; j < vars.size(); ++j) {
        if (vars[j].kind != VarKind::binary || lb[j] == ub[j] || in_pair[j]) continue;
        double f = std::abs(x[j] - std::round(x[j]));
        if (f > best_frac) {
            best_frac = f;
            best = static_cast<int>(j);
        }
    }
    return best;
}

// Rounds binaries; pair modes follow the dominant direction of flow.
std::vector<double> repair_binaries(const ConicProgram& prog, const std::vector<double>& x) {
    std::vector<double> v = x;
    const auto& vars = prog.variables();
    for (std::size_t j = 0; j < vars.size(); ++j)
        if (vars[j].kind == VarKind::binary) v[j] = std::round(std::clamp(x[j], 0.0, 1.0));
    for (const auto& pr : prog.complementarity()) {
        double c = x[static_cast<std::size_t>(pr.charge.index)];
        double d = x[static_cast<std::size_t>(pr.discharge.index)];
        double mode = x[static_cast<std::size_t>(pr.mode.index)];
        if (c > d) v[static_cast<std::size_t>(pr.mode.index)] = 1.0;
        else if (d > c) v[static_cast<std::size_t>(pr.mode.index)] = 0.0;
        else v[static_cast<std::size_t>(pr.mode.index)] = mode >= 0.5 ? 1.0 : 0.0;
    }
    return v;
}

std::optional<Solution> try_fixed(const ConicProgram& prog, const std::vector<double>& x, std::vector<double> lb,
                                  std::vector<double> ub, const SolveOptions& opts) {
    const auto& vars = prog.variables();
    for (std::size_t j = 0; j < vars.size(); ++j)
        if (vars[j].kind == VarKind::binary) lb[j] = ub[j] = x[j];
    try {
        return solve_with_bounds(prog, lb, ub, opts);
    } catch (const Infeasible&) {
        return std::nullopt;
    }
}

}  // namespace

Solution solve_continuous(const ConicProgram& prog, const SolveOptions& opts) {
    std::vector<double> lb, ub;
    base_bounds(prog, lb, ub);
    return solve_with_bounds(prog, lb, ub, opts);
}

Solution solve_mixed(const ConicProgram& prog, const SolveOptions& opts) {
    if (prog.num_binaries() == 0) return solve_continuous(prog, opts);

    std::vector<double> lb0, ub0;
    base_bounds(prog, lb0, ub0);
    const auto& vars = prog.variables();
    std::vector<char> in_pair(vars.size(), 0);
    for (const auto& pr : prog.complementarity()) in_pair[static_cast<std::size_t>(pr.mode.index)] = 1;

    Solution root = solve_with_bounds(prog, lb0, ub0, opts);
    auto gap_closed = [&](double lower, double upper) {
        return upper - lower <= opts.mip_gap * std::max(1.0, std::abs(upper));
    };

    std::optional<Solution> incumbent;
    PairState ps = pair_state(prog, root.primal, lb0, ub0, opts.complementarity_tol);
    int frac = most_fractional(prog, root.primal, lb0, ub0, opts.integrality_tol, in_pair);
    if (ps.worst < 0 && frac < 0) {
        incumbent = try_fixed(prog, repair_binaries(prog, root.primal), lb0, ub0, opts);
        if (incumbent && gap_closed(root.objective_value, incumbent->objective_value)) {
            incumbent->relaxation_accepted = true;
            incumbent->nodes = 1;
            return *incumbent;
        }
    }

    struct Node {
        double bound;
        long id;
        std::vector<double> lb, ub;
        bool operator<(const Node& o) const { return bound != o.bound ? bound > o.bound : id > o.id; }
    };
    std::priority_queue<Node> open;
    long next_id = 0;
    open.push({root.objective_value, next_id++, lb0, ub0});
    long nodes = 0;

    while (!open.empty()) {
        Node node = open.top();
        open.pop();
        if (incumbent && gap_closed(node.bound, incumbent->objective_value)) break;
        if (++nodes > opts.node_limit)
            throw BranchLimit("branch-and-bound node limit reached on '" + prog.name() + "'", "");

        Solution rel;
        try {
            rel = nodes == 1 ? root : solve_with_bounds(prog, node.lb, node.ub, opts);
        } catch (const Infeasible&) {
            continue;
        }
        if (incumbent && gap_closed(rel.objective_value, incumbent->objective_value)) continue;

        PairState st = pair_state(prog, rel.primal, node.lb, node.ub, opts.complementarity_tol);
        int branch = -1;
        if (st.worst >= 0) {
            branch = prog.complementarity()[static_cast<std::size_t>(st.worst)].mode.index;
        } else {
            branch = most_fractional(prog, rel.primal, node.lb, node.ub, opts.integrality_tol, in_pair);
        }
        if (branch < 0) {
            auto cand = try_fixed(prog, repair_binaries(prog, rel.primal), node.lb, node.ub, opts);
            if (cand && (!incumbent || cand->objective_value < incumbent->objective_value)) incumbent = std::move(cand);
            if (incumbent && gap_closed(rel.objective_value, incumbent->objective_value)) continue;
            // Rounding lost optimality: branch on the most undecided pair mode instead.
            double best = -1.0;
            for (const auto& pr : prog.complementarity()) {
                auto mi = static_cast<std::size_t>(pr.mode.index);
                if (node.lb[mi] == node.ub[mi]) continue;
                double f = 0.5 - std::abs(rel.primal[mi] - 0.5);
                if (f > best) {
                    best = f;
                    branch = pr.mode.index;
                }
            }
            if (branch < 0) continue;
        }
        auto bi = static_cast<std::size_t>(branch);
        for (double v : {0.0, 1.0}) {
            Node child{rel.objective_value, next_id++, node.lb, node.ub};
            child.lb[bi] = child.ub[bi] = v;
            open.push(std::move(child));
        }
    }
    if (!incumbent) throw Infeasible("no integer-feasible point for '" + prog.name() + "'", "");
    incumbent->nodes = nodes;
    spdlog::debug("{}: branch-and-bound finished after {} nodes", prog.name(), nodes);
    return *incumbent;
}

Solution resolve_for_duals(const ConicProgram& prog, const std::vector<double>& binary_values,
                           const SolveOptions& opts) {
    std::vector<double> lb, ub;
    base_bounds(prog, lb, ub);
    const auto& vars = prog.variables();
    if (binary_values.size() == vars.size()) {
        for (std::size_t j = 0; j < vars.size(); ++j)
            if (vars[j].kind == VarKind::binary) lb[j] = ub[j] = std::round(binary_values[j]);
    } else if (binary_values.size() == prog.num_binaries()) {
        std::size_t k = 0;
        for (std::size_t j = 0; j < vars.size(); ++j)
            if (vars[j].kind == VarKind::binary) lb[j] = ub[j] = std::round(binary_values[k++]);
    } else {
        throw DimensionMismatch("binary assignment has " + std::to_string(binary_values.size()) +
                                " entries, expected " + std::to_string(prog.num_binaries()));
    }
    return solve_with_bounds(prog, lb, ub, opts);
}

Solution resolve_for_duals(const ConicProgram& prog, const Solution& mixed, const SolveOptions& opts) {
    return resolve_for_duals(prog, mixed.primal, opts);
}

Violation max_violation(const ConicProgram& prog, const std::vector<double>& x) {
    Violation worst;
    auto consider = [&](double amount, const std::string& tag) {
        if (amount > worst.amount) {
            worst.amount = amount;
            worst.tag = tag;
        }
    };
    const auto& vars = prog.variables();
    for (std::size_t j = 0; j < vars.size(); ++j) {
        consider(vars[j].lb - x[j], vars[j].name + " lower bound");
        consider(x[j] - vars[j].ub, vars[j].name + " upper bound");
    }
    const auto& lin = prog.linear();
    for (std::size_t r = 0; r < lin.size(); ++r) {
        double v = lin[r].expr.evaluate(x) - lin[r].rhs;
        std::string tag = lin[r].tag.empty() ? "row " + std::to_string(r) : lin[r].tag;
        switch (lin[r].sense) {
            case Sense::eq: consider(std::abs(v), tag); break;
            case Sense::le: consider(v, tag); break;
            case Sense::ge: consider(-v, tag); break;
        }
    }
    const auto& cones = prog.cones();
    for (std::size_t k = 0; k < cones.size(); ++k) {
        double norm = 0.0;
        for (const auto& u : cones[k].u) norm += std::pow(u.evaluate(x), 2);
        std::string tag = cones[k].tag.empty() ? "cone " + std::to_string(k) : cones[k].tag;
        consider(std::sqrt(norm) - cones[k].t.evaluate(x), tag);
    }
    return worst;
}

}  // namespace dermarket::solver
