#pragma once

#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace dermarket::solver::detail {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

// min c'x  s.t.  A x = b,  G x + s = h,  s in K
// K = R_+^{lp_rows} x SOC(q_1) x ... x SOC(q_k), cone rows follow the LP rows in G.
struct StandardForm {
    Eigen::VectorXd c;
    SpMat A;
    Eigen::VectorXd b;
    SpMat G;
    Eigen::VectorXd h;
    int lp_rows = 0;
    std::vector<int> soc_dims;
};

enum class IpmStatus { optimal, primal_infeasible, dual_infeasible, max_iterations, numerical_error };

struct IpmSettings {
    double tol = 1e-9;
    double tol_inaccurate = 5e-7;
    int max_iterations = 150;
    int ruiz_passes = 12;
};

struct IpmResult {
    IpmStatus status = IpmStatus::numerical_error;
    Eigen::VectorXd x, y, z, s;  // for infeasible statuses, the (unnormalized) certificate
    double pcost = 0.0;
    double dcost = 0.0;
    double pres = 0.0;
    double dres = 0.0;
    int iterations = 0;
};

IpmResult solve_ipm(const StandardForm& prob, const IpmSettings& settings);

}  // namespace dermarket::solver::detail
