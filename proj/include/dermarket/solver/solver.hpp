#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dermarket/solver/conic_program.hpp"

namespace dermarket::solver {

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit };

std::string_view to_string(SolveStatus s);

struct SolveOptions {
    double feas_tol = 1e-7;      // contract on returned KKT residuals
    double ipm_tol = 1e-9;       // internal target for residuals and gap
    int max_iterations = 150;
    double mip_gap = 1e-6;       // relative
    double integrality_tol = 1e-6;
    double complementarity_tol = 1e-7;
    long node_limit = 100000;
    int ruiz_passes = 12;
};

/// Result of a solve. Duals follow one convention throughout: for a tagged linear
/// equality the value is d(objective)/d(rhs); inequality duals are the nonnegative
/// multipliers; cone duals are the nonnegative scalar of `dual_weights` (or the
/// leading component when no weights were given).
struct Solution {
    SolveStatus status = SolveStatus::iteration_limit;
    double objective_value = 0.0;
    double dual_objective = 0.0;
    std::vector<double> primal;
    std::map<std::string, double, std::less<>> duals;
    std::vector<double> row_duals;                  // per linear constraint, same convention
    std::vector<std::vector<double>> cone_duals;    // raw z per cone
    std::vector<double> cone_slack;                 // t - ||u|| per cone at the primal point
    int iterations = 0;
    long nodes = 0;
    bool relaxation_accepted = false;

    double value(Var v) const { return primal.at(static_cast<std::size_t>(v.index)); }
    double value(const LinExpr& e) const { return e.evaluate(primal); }
    double dual(std::string_view tag) const;
    std::optional<double> find_dual(std::string_view tag) const;
};

/// Solves a program whose binaries are absent or fixed. Throws Infeasible or
/// NumericalFailure carrying the most violated constraint tag.
Solution solve_continuous(const ConicProgram& prog, const SolveOptions& opts = {});

/// Relax-and-repair followed by best-first branch-and-bound on the binaries.
Solution solve_mixed(const ConicProgram& prog, const SolveOptions& opts = {});

/// Fixes every binary at `assignment` (indexed like the program's binaries in
/// declaration order, or by variable index when sized to num_variables()) and re-solves.
Solution resolve_for_duals(const ConicProgram& prog, const std::vector<double>& binary_values,
                           const SolveOptions& opts = {});

/// Convenience: binaries taken from a previous solution.
Solution resolve_for_duals(const ConicProgram& prog, const Solution& mixed, const SolveOptions& opts = {});

/// Largest violation of any constraint (linear rows, bounds, cones) at x, with the offending tag.
struct Violation {
    double amount = 0.0;
    std::string tag;
};
Violation max_violation(const ConicProgram& prog, const std::vector<double>& x);

/// Writes the program in CPLEX LP text format (cones as quadratic constraints).
void write_lp(const ConicProgram& prog, const std::string& path);

}  // namespace dermarket::solver
