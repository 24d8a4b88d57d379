#pragma once

// Random mixed-binary conic programs and a brute-force optimum over every binary assignment.
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "dermarket/errors.hpp"
#include "dermarket/solver/solver.hpp"

namespace testutil {

struct RandomMixed {
    dermarket::solver::ConicProgram prog;
    int binaries = 0;
};

/// `plain` free binaries in two knapsack rows plus `pairs` charge/discharge pairs gated by a
/// mode binary, all tied to one continuous variable inside a norm ball.
inline RandomMixed random_mixed(std::mt19937_64& rng, int plain, int pairs) {
    using namespace dermarket::solver;
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RandomMixed r;
    ConicProgram& p = r.prog;
    Var c = p.add_variable("c", -5.0, 5.0);
    LinExpr row1 = c, row2 = LinExpr(c) * -0.5;
    std::vector<Var> bins;
    for (int i = 0; i < plain; ++i) {
        Var b = p.add_binary("b" + std::to_string(i));
        bins.push_back(b);
        p.add_objective(b, u(rng));
        row1.add(b, u(rng));
        row2.add(b, u(rng));
    }
    LinExpr storage;
    for (int k = 0; k < pairs; ++k) {
        const std::string id = std::to_string(k);
        Var ch = p.add_variable("ch" + id, 0.0, 1.0);
        Var dis = p.add_variable("dis" + id, 0.0, 1.0);
        Var mode = p.add_binary("mode" + id);
        p.add_le(LinExpr(ch) - mode, 0.0);
        p.add_le(LinExpr(dis) + mode, 1.0);
        p.add_complementarity(ch, dis, mode);
        // Charging pays and discharging pays, so the relaxation wants both at once.
        p.add_objective(ch, -0.2 - 0.5 * std::abs(u(rng)));
        p.add_objective(dis, -0.2 - 0.5 * std::abs(u(rng)));
        storage.add(ch, 0.9);
        storage.add(dis, -1.0 / 0.9);
    }
    p.add_objective(c, 0.3 * u(rng));
    p.add_le(row1, 0.5 + std::abs(u(rng)));
    p.add_le(row2, 0.5 + std::abs(u(rng)));
    if (pairs > 0) {
        p.add_le(storage, 0.5);
        p.add_le(-1.0 * storage, 0.5);
    }
    LinExpr lead = bins.empty() ? LinExpr(0.0) : LinExpr(bins[0]) * 0.5;
    p.add_cone(LinExpr(2.0), {LinExpr(c), lead});
    r.binaries = plain + pairs;
    return r;
}

/// Best objective over all 2^binaries assignments; +inf when none is feasible.
inline double enumerate_optimum(const RandomMixed& r) {
    double best = std::numeric_limits<double>::infinity();
    for (long mask = 0; mask < (1L << r.binaries); ++mask) {
        std::vector<double> assign;
        for (int i = 0; i < r.binaries; ++i) assign.push_back(static_cast<double>((mask >> i) & 1));
        try {
            best = std::min(best, dermarket::solver::resolve_for_duals(r.prog, assign).objective_value);
        } catch (const dermarket::Infeasible&) {
        }
    }
    return best;
}

}  // namespace testutil
