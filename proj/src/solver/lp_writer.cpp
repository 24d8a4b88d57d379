#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dermarket/errors.hpp"
#include "dermarket/solver/solver.hpp"

namespace dermarket::solver {
namespace {

std::string sanitize(const std::string& name) {
    std::string out;
    for (char ch : name) out += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.') ? ch : '_';
    if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0]))) out = "v_" + out;
    return out;
}

void write_terms(std::ostream& os, const LinExpr& e, const std::vector<std::string>& names) {
    LinExpr c = e;
    c.compact();
    if (c.terms().empty()) {
        os << " 0 " << names.front();
        return;
    }
    for (auto [i, coef] : c.terms()) os << (coef < 0 ? " - " : " + ") << std::abs(coef) << ' ' << names[static_cast<std::size_t>(i)];
}

}  // namespace

void write_lp(const ConicProgram& prog, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.precision(17);
    const auto& vars = prog.variables();
    std::vector<std::string> names;
    for (std::size_t j = 0; j < vars.size(); ++j) names.push_back(sanitize(vars[j].name) + "_" + std::to_string(j));

    os << "\\ " << prog.name() << "\nMinimize\n obj:";
    LinExpr obj;
    for (std::size_t j = 0; j < vars.size(); ++j) obj.add(Var{static_cast<int>(j)}, prog.objective()[j]);
    write_terms(os, obj, names);
    if (prog.objective_constant() != 0.0) os << " + " << prog.objective_constant() << " obj_const";
    os << "\nSubject To\n";
    const auto& lin = prog.linear();
    for (std::size_t r = 0; r < lin.size(); ++r) {
        os << ' ' << (lin[r].tag.empty() ? "r" + std::to_string(r) : sanitize(lin[r].tag)) << ':';
        write_terms(os, lin[r].expr, names);
        os << (lin[r].sense == Sense::eq ? " = " : lin[r].sense == Sense::le ? " <= " : " >= ") << lin[r].rhs << '\n';
    }
    // ||u|| <= t as  sum u_k^2 - t^2 <= 0 over auxiliary copies, t >= 0.
    const auto& cones = prog.cones();
    for (std::size_t k = 0; k < cones.size(); ++k) {
        std::string base = "q" + std::to_string(k);
        os << ' ' << base << "_t: " << base << "_t";
        LinExpr t = cones[k].t;
        write_terms(os, -1.0 * t, names);
        os << " = " << t.constant() << '\n';
        for (std::size_t i = 0; i < cones[k].u.size(); ++i) {
            const LinExpr& u = cones[k].u[i];
            os << ' ' << base << "_u" << i << ": " << base << "_u" << i;
            write_terms(os, -1.0 * u, names);
            os << " = " << u.constant() << '\n';
        }
        os << ' ' << (cones[k].tag.empty() ? base : sanitize(cones[k].tag)) << ": [";
        for (std::size_t i = 0; i < cones[k].u.size(); ++i)
            os << (i ? " + " : " ") << base << "_u" << i << " ^2";
        os << " - " << base << "_t ^2 ] <= 0\n";
    }
    os << "Bounds\n";
    if (prog.objective_constant() != 0.0) os << " obj_const = 1\n";
    for (std::size_t j = 0; j < vars.size(); ++j) {
        const auto& v = vars[j];
        if (std::isinf(v.lb) && std::isinf(v.ub)) os << ' ' << names[j] << " free\n";
        else if (std::isinf(v.lb)) os << " -inf <= " << names[j] << " <= " << v.ub << '\n';
        else if (std::isinf(v.ub)) os << ' ' << names[j] << " >= " << v.lb << '\n';
        else os << ' ' << v.lb << " <= " << names[j] << " <= " << v.ub << '\n';
    }
    for (std::size_t k = 0; k < cones.size(); ++k) {
        std::string base = "q" + std::to_string(k);
        for (std::size_t i = 0; i < cones[k].u.size(); ++i) os << ' ' << base << "_u" << i << " free\n";
    }
    bool any_bin = false;
    for (std::size_t j = 0; j < vars.size(); ++j) {
        if (vars[j].kind != VarKind::binary) continue;
        if (!any_bin) os << "Binaries\n";
        any_bin = true;
        os << ' ' << names[j] << '\n';
    }
    os << "End\n";
}

}  // namespace dermarket::solver
