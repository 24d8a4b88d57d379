#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace dermarket::solver {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Handle to a decision variable of a ConicProgram.
struct Var {
    int index = -1;
    bool valid() const noexcept { return index >= 0; }
    friend bool operator==(Var, Var) = default;
};

/// Sparse affine expression sum_k coef_k * x_k + constant.
class LinExpr {
public:
    LinExpr() = default;
    LinExpr(double constant) : constant_(constant) {}  // NOLINT(google-explicit-constructor)
    LinExpr(Var v) { terms_.emplace_back(v.index, 1.0); }  // NOLINT(google-explicit-constructor)

    LinExpr& add(Var v, double coef) {
        if (coef != 0.0) terms_.emplace_back(v.index, coef);
        return *this;
    }
    LinExpr& add_constant(double c) {
        constant_ += c;
        return *this;
    }

    LinExpr& operator+=(const LinExpr& o) {
        terms_.insert(terms_.end(), o.terms_.begin(), o.terms_.end());
        constant_ += o.constant_;
        return *this;
    }
    LinExpr& operator-=(const LinExpr& o) {
        for (auto [i, c] : o.terms_) terms_.emplace_back(i, -c);
        constant_ -= o.constant_;
        return *this;
    }
    LinExpr& operator*=(double s) {
        for (auto& t : terms_) t.second *= s;
        constant_ *= s;
        return *this;
    }

    friend LinExpr operator+(LinExpr a, const LinExpr& b) { return a += b; }
    friend LinExpr operator-(LinExpr a, const LinExpr& b) { return a -= b; }
    friend LinExpr operator-(LinExpr a) { return a *= -1.0; }
    friend LinExpr operator*(double s, LinExpr a) { return a *= s; }
    friend LinExpr operator*(LinExpr a, double s) { return a *= s; }

    const std::vector<std::pair<int, double>>& terms() const noexcept { return terms_; }
    double constant() const noexcept { return constant_; }

    /// Merges duplicate variable entries and drops zeros.
    LinExpr& compact();

    double evaluate(const std::vector<double>& x) const {
        double v = constant_;
        for (auto [i, c] : terms_) v += c * x[static_cast<std::size_t>(i)];
        return v;
    }

private:
    std::vector<std::pair<int, double>> terms_;
    double constant_ = 0.0;
};

enum class VarKind { continuous, binary };
enum class Sense { eq, le, ge };

struct VariableInfo {
    std::string name;
    double lb = -kInf;
    double ub = kInf;
    VarKind kind = VarKind::continuous;
};

struct LinearConstraint {
    LinExpr expr;  // constant folded into rhs on insertion
    Sense sense = Sense::eq;
    double rhs = 0.0;
    std::string tag;
};

/// ||(u_1, ..., u_k)||_2 <= t. `dual_weights`, when present, collapses the cone
/// multiplier z into a scalar reported under `tag` as sum_j w_j z_j.
struct ConeConstraint {
    LinExpr t;
    std::vector<LinExpr> u;
    std::string tag;
    std::vector<double> dual_weights;
};

/// A charge/discharge pair whose mutual exclusion is enforced by `mode`
/// (charge <= mode * cap, discharge <= (1 - mode) * cap).
struct ComplementarityPair {
    Var charge;
    Var discharge;
    Var mode;
};

/// Linear objective, linear equality/inequality rows and second-order cones over
/// continuous and binary variables. Minimization only.
class ConicProgram {
public:
    explicit ConicProgram(std::string name = "program") : name_(std::move(name)) {}

    const std::string& name() const noexcept { return name_; }

    Var add_variable(std::string name, double lb = -kInf, double ub = kInf,
                     VarKind kind = VarKind::continuous);
    Var add_binary(std::string name) { return add_variable(std::move(name), 0.0, 1.0, VarKind::binary); }

    void set_bounds(Var v, double lb, double ub);
    void fix(Var v, double value) { set_bounds(v, value, value); }

    void add_objective(const LinExpr& e);
    void add_objective(Var v, double coef);

    /// expr (sense) rhs; the expression's constant is moved to the right-hand side.
    int add_linear(const LinExpr& expr, Sense sense, double rhs, std::string tag = {});
    int add_eq(const LinExpr& expr, double rhs, std::string tag = {}) {
        return add_linear(expr, Sense::eq, rhs, std::move(tag));
    }
    int add_le(const LinExpr& expr, double rhs, std::string tag = {}) {
        return add_linear(expr, Sense::le, rhs, std::move(tag));
    }
    int add_ge(const LinExpr& expr, double rhs, std::string tag = {}) {
        return add_linear(expr, Sense::ge, rhs, std::move(tag));
    }

    int add_cone(LinExpr t, std::vector<LinExpr> u, std::string tag = {},
                 std::vector<double> dual_weights = {});

    /// sum_k e_k^2 <= bound, written as the rotated cone ||(2 e_1, ..., 2 e_k, bound - 1)|| <= bound + 1.
    /// The reported dual is the multiplier of the quadratic inequality (d objective / d bound, negated).
    int add_quadratic_le(const std::vector<LinExpr>& squares, const LinExpr& bound, std::string tag = {});

    void add_complementarity(Var charge, Var discharge, Var mode) {
        pairs_.push_back({charge, discharge, mode});
    }

    std::size_t num_variables() const noexcept { return vars_.size(); }
    std::size_t num_binaries() const;
    const std::vector<VariableInfo>& variables() const noexcept { return vars_; }
    const VariableInfo& variable(Var v) const { return vars_.at(static_cast<std::size_t>(v.index)); }
    const std::vector<double>& objective() const noexcept { return objective_; }
    double objective_constant() const noexcept { return objective_constant_; }
    const std::vector<LinearConstraint>& linear() const noexcept { return linear_; }
    const std::vector<ConeConstraint>& cones() const noexcept { return cones_; }
    const std::vector<ComplementarityPair>& complementarity() const noexcept { return pairs_; }

    bool has_tag(std::string_view tag) const { return tags_.count(std::string(tag)) != 0; }

private:
    void register_tag(const std::string& tag);
    void check(const LinExpr& e) const;

    std::string name_;
    std::vector<VariableInfo> vars_;
    std::vector<double> objective_;
    double objective_constant_ = 0.0;
    std::vector<LinearConstraint> linear_;
    std::vector<ConeConstraint> cones_;
    std::vector<ComplementarityPair> pairs_;
    std::unordered_map<std::string, int> tags_;
};

}  // namespace dermarket::solver
