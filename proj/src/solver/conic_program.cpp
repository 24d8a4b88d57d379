#include "dermarket/solver/conic_program.hpp"

#include <algorithm>
#include <cmath>

#include "dermarket/errors.hpp"

namespace dermarket::solver {

LinExpr& LinExpr::compact() {
    std::sort(terms_.begin(), terms_.end());
    std::vector<std::pair<int, double>> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) {
        if (!out.empty() && out.back().first == t.first) {
            out.back().second += t.second;
        } else {
            out.push_back(t);
        }
    }
    std::erase_if(out, [](const auto& t) { return t.second == 0.0; });
    terms_ = std::move(out);
    return *this;
}

Var ConicProgram::add_variable(std::string name, double lb, double ub, VarKind kind) {
    if (lb > ub) throw ConfigError("variable '" + name + "' has lb > ub");
    if (std::isnan(lb) || std::isnan(ub)) throw ConfigError("variable '" + name + "' has NaN bound");
    vars_.push_back({std::move(name), lb, ub, kind});
    objective_.push_back(0.0);
    return Var{static_cast<int>(vars_.size()) - 1};
}

void ConicProgram::set_bounds(Var v, double lb, double ub) {
    auto& info = vars_.at(static_cast<std::size_t>(v.index));
    if (lb > ub) throw ConfigError("variable '" + info.name + "' has lb > ub");
    info.lb = lb;
    info.ub = ub;
}

std::size_t ConicProgram::num_binaries() const {
    return static_cast<std::size_t>(
        std::count_if(vars_.begin(), vars_.end(), [](const auto& v) { return v.kind == VarKind::binary; }));
}

void ConicProgram::check(const LinExpr& e) const {
    for (auto [i, c] : e.terms()) {
        if (i < 0 || static_cast<std::size_t>(i) >= vars_.size())
            throw ConfigError("expression references undeclared variable " + std::to_string(i));
        if (!std::isfinite(c)) throw ConfigError("non-finite coefficient on " + vars_[i].name);
    }
}

void ConicProgram::register_tag(const std::string& tag) {
    if (tag.empty()) return;
    if (!tags_.emplace(tag, 0).second) throw ConfigError("duplicate dual tag '" + tag + "'");
}

void ConicProgram::add_objective(const LinExpr& e) {
    check(e);
    for (auto [i, c] : e.terms()) objective_[static_cast<std::size_t>(i)] += c;
    objective_constant_ += e.constant();
}

void ConicProgram::add_objective(Var v, double coef) {
    objective_.at(static_cast<std::size_t>(v.index)) += coef;
}

int ConicProgram::add_linear(const LinExpr& expr, Sense sense, double rhs, std::string tag) {
    check(expr);
    register_tag(tag);
    LinExpr e = expr;
    double r = rhs - e.constant();
    e.add_constant(-e.constant());
    e.compact();
    linear_.push_back({std::move(e), sense, r, std::move(tag)});
    return static_cast<int>(linear_.size()) - 1;
}

int ConicProgram::add_cone(LinExpr t, std::vector<LinExpr> u, std::string tag, std::vector<double> dual_weights) {
    check(t);
    for (const auto& e : u) check(e);
    if (!dual_weights.empty() && dual_weights.size() != u.size() + 1)
        throw ConfigError("cone dual weights must have one entry per cone row");
    register_tag(tag);
    t.compact();
    for (auto& e : u) e.compact();
    cones_.push_back({std::move(t), std::move(u), std::move(tag), std::move(dual_weights)});
    return static_cast<int>(cones_.size()) - 1;
}

int ConicProgram::add_quadratic_le(const std::vector<LinExpr>& squares, const LinExpr& bound, std::string tag) {
    std::vector<LinExpr> u;
    u.reserve(squares.size() + 1);
    for (const auto& e : squares) u.push_back(2.0 * e);
    u.push_back(bound - 1.0);
    std::vector<double> w(u.size() + 1, 0.0);
    w.front() = 1.0;
    w.back() = 1.0;
    return add_cone(bound + 1.0, std::move(u), std::move(tag), std::move(w));
}

}  // namespace dermarket::solver
