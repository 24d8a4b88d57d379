// Homogeneous self-dual primal-dual interior point method for LP + SOC cones
// with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
#include "ipm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>

namespace dermarket::solver::detail {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kStepFraction = 0.99;
constexpr double kRegularization = 1e-9;

struct ConeLayout {
    int lp = 0;
    std::vector<int> dims;
    std::vector<int> offsets;
    int m = 0;

    ConeLayout(int lp_rows, const std::vector<int>& soc) : lp(lp_rows), dims(soc) {
        int off = lp;
        for (int q : dims) {
            offsets.push_back(off);
            off += q;
        }
        m = off;
    }
    int degree() const { return lp + static_cast<int>(dims.size()); }
};

double soc_det(const Eigen::Ref<const VectorXd>& v) {
    double n1 = v.tail(v.size() - 1).norm();
    return (v(0) - n1) * (v(0) + n1);
}

// Nesterov-Todd scaling point for all cones plus the scaled variable lambda = W z.
struct Scaling {
    VectorXd w_lp;
    std::vector<MatrixXd> W;
    std::vector<MatrixXd> W2;
    VectorXd lambda;

    bool update(const ConeLayout& cones, const VectorXd& s, const VectorXd& z) {
        w_lp.resize(cones.lp);
        lambda.resize(cones.m);
        for (int i = 0; i < cones.lp; ++i) {
            if (s(i) <= 0.0 || z(i) <= 0.0) return false;
            w_lp(i) = std::sqrt(s(i) / z(i));
            lambda(i) = std::sqrt(s(i) * z(i));
        }
        W.resize(cones.dims.size());
        W2.resize(cones.dims.size());
        for (std::size_t k = 0; k < cones.dims.size(); ++k) {
            const int q = cones.dims[k];
            const int off = cones.offsets[k];
            VectorXd sk = s.segment(off, q);
            VectorXd zk = z.segment(off, q);
            double sres = soc_det(sk);
            double zres = soc_det(zk);
            if (sres <= 0.0 || zres <= 0.0 || sk(0) <= 0.0 || zk(0) <= 0.0) return false;
            VectorXd sn = sk / std::sqrt(sres);
            VectorXd zn = zk / std::sqrt(zres);
            double gamma = std::sqrt(std::max(0.5 * (1.0 + sn.dot(zn)), 0.0));
            if (gamma <= 0.0) return false;
            double w0 = (sn(0) + zn(0)) / (2.0 * gamma);
            VectorXd w1 = (sn.tail(q - 1) - zn.tail(q - 1)) / (2.0 * gamma);
            double eta = std::pow(sres / zres, 0.25);
            MatrixXd& Wk = W[k];
            Wk.resize(q, q);
            Wk(0, 0) = w0;
            Wk.block(0, 1, 1, q - 1) = w1.transpose();
            Wk.block(1, 0, q - 1, 1) = w1;
            Wk.block(1, 1, q - 1, q - 1) =
                MatrixXd::Identity(q - 1, q - 1) + w1 * w1.transpose() / (1.0 + w0);
            Wk *= eta;
            W2[k] = Wk * Wk;
            lambda.segment(off, q) = Wk * zk;
        }
        return true;
    }

    VectorXd apply_W(const ConeLayout& cones, const VectorXd& v) const {
        VectorXd out(v.size());
        out.head(cones.lp) = w_lp.cwiseProduct(v.head(cones.lp));
        for (std::size_t k = 0; k < cones.dims.size(); ++k)
            out.segment(cones.offsets[k], cones.dims[k]) = W[k] * v.segment(cones.offsets[k], cones.dims[k]);
        return out;
    }

    VectorXd apply_W2(const ConeLayout& cones, const VectorXd& v) const {
        VectorXd out(v.size());
        out.head(cones.lp) = w_lp.cwiseAbs2().cwiseProduct(v.head(cones.lp));
        for (std::size_t k = 0; k < cones.dims.size(); ++k)
            out.segment(cones.offsets[k], cones.dims[k]) = W2[k] * v.segment(cones.offsets[k], cones.dims[k]);
        return out;
    }
};

// Jordan product u o v.
VectorXd jordan_product(const ConeLayout& cones, const VectorXd& u, const VectorXd& v) {
    VectorXd out(u.size());
    out.head(cones.lp) = u.head(cones.lp).cwiseProduct(v.head(cones.lp));
    for (std::size_t k = 0; k < cones.dims.size(); ++k) {
        const int q = cones.dims[k];
        const int off = cones.offsets[k];
        auto uk = u.segment(off, q);
        auto vk = v.segment(off, q);
        out(off) = uk.dot(vk);
        out.segment(off + 1, q - 1) = uk(0) * vk.tail(q - 1) + vk(0) * uk.tail(q - 1);
    }
    return out;
}

// Solves lambda o x = v for x.
VectorXd jordan_divide(const ConeLayout& cones, const VectorXd& lambda, const VectorXd& v) {
    VectorXd out(v.size());
    out.head(cones.lp) = v.head(cones.lp).cwiseQuotient(lambda.head(cones.lp));
    for (std::size_t k = 0; k < cones.dims.size(); ++k) {
        const int q = cones.dims[k];
        const int off = cones.offsets[k];
        auto l = lambda.segment(off, q);
        auto vk = v.segment(off, q);
        double det = soc_det(l);
        double x0 = (l(0) * vk(0) - l.tail(q - 1).dot(vk.tail(q - 1))) / det;
        out(off) = x0;
        out.segment(off + 1, q - 1) = (vk.tail(q - 1) - x0 * l.tail(q - 1)) / l(0);
    }
    return out;
}

VectorXd identity_element(const ConeLayout& cones) {
    VectorXd e = VectorXd::Zero(cones.m);
    e.head(cones.lp).setOnes();
    for (int off : cones.offsets) e(off) = 1.0;
    return e;
}

// Largest alpha with v + alpha d in the cone (infinity when unbounded).
double max_step(const ConeLayout& cones, const VectorXd& v, const VectorXd& d) {
    double alpha = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cones.lp; ++i)
        if (d(i) < 0.0) alpha = std::min(alpha, -v(i) / d(i));
    for (std::size_t k = 0; k < cones.dims.size(); ++k) {
        const int q = cones.dims[k];
        const int off = cones.offsets[k];
        auto x = v.segment(off, q);
        auto dx = d.segment(off, q);
        double dn = dx.tail(q - 1).norm();
        if (dx(0) >= dn) continue;
        double a = (dx(0) - dn) * (dx(0) + dn);
        double b = x(0) * dx(0) - x.tail(q - 1).dot(dx.tail(q - 1));
        double c = std::max(soc_det(x), 0.0);
        double disc = std::max(b * b - a * c, 0.0);
        double denom = -b + std::sqrt(disc);
        if (denom <= 0.0) {
            alpha = 0.0;
            continue;
        }
        alpha = std::min(alpha, c / denom);
    }
    return alpha;
}

// Distance-from-boundary shift used to make the starting point interior.
VectorXd shift_into_cone(const ConeLayout& cones, VectorXd v) {
    double alpha = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < cones.lp; ++i) alpha = std::max(alpha, -v(i));
    for (std::size_t k = 0; k < cones.dims.size(); ++k) {
        auto vk = v.segment(cones.offsets[k], cones.dims[k]);
        alpha = std::max(alpha, vk.tail(vk.size() - 1).norm() - vk(0));
    }
    if (cones.m == 0) return v;
    if (alpha < 0.0) return v;
    return v + (1.0 + alpha) * identity_element(cones);
}

struct Equilibration {
    VectorXd D, EA, EG;
};

Equilibration equilibrate(StandardForm& p, const ConeLayout& cones, int passes) {
    const int n = static_cast<int>(p.c.size());
    const int na = static_cast<int>(p.A.rows());
    const int mg = static_cast<int>(p.G.rows());
    Equilibration eq{VectorXd::Ones(n), VectorXd::Ones(na), VectorXd::Ones(mg)};
    std::vector<int> block_of(mg, -1);
    for (std::size_t k = 0; k < cones.dims.size(); ++k)
        for (int r = 0; r < cones.dims[k]; ++r) block_of[cones.offsets[k] + r] = static_cast<int>(k);

    for (int pass = 0; pass < passes; ++pass) {
        VectorXd colmax = VectorXd::Zero(n);
        VectorXd rowA = VectorXd::Zero(na);
        VectorXd rowG = VectorXd::Zero(mg);
        for (int j = 0; j < n; ++j) {
            for (SpMat::InnerIterator it(p.A, j); it; ++it) {
                double a = std::abs(it.value());
                colmax(j) = std::max(colmax(j), a);
                rowA(it.row()) = std::max(rowA(it.row()), a);
            }
            for (SpMat::InnerIterator it(p.G, j); it; ++it) {
                double a = std::abs(it.value());
                colmax(j) = std::max(colmax(j), a);
                rowG(it.row()) = std::max(rowG(it.row()), a);
            }
        }
        std::vector<double> blockmax(cones.dims.size(), 0.0);
        for (int r = 0; r < mg; ++r)
            if (block_of[r] >= 0) blockmax[block_of[r]] = std::max(blockmax[block_of[r]], rowG(r));
        for (int r = 0; r < mg; ++r)
            if (block_of[r] >= 0) rowG(r) = blockmax[block_of[r]];

        auto inv_sqrt = [](double v) { return v > 1e-300 ? 1.0 / std::sqrt(v) : 1.0; };
        VectorXd dc = colmax.unaryExpr(inv_sqrt);
        VectorXd da = rowA.unaryExpr(inv_sqrt);
        VectorXd dg = rowG.unaryExpr(inv_sqrt);
        p.A = da.asDiagonal() * p.A * dc.asDiagonal();
        p.G = dg.asDiagonal() * p.G * dc.asDiagonal();
        eq.D = eq.D.cwiseProduct(dc);
        eq.EA = eq.EA.cwiseProduct(da);
        eq.EG = eq.EG.cwiseProduct(dg);
    }
    p.c = p.c.cwiseProduct(eq.D);
    p.b = p.b.cwiseProduct(eq.EA);
    p.h = p.h.cwiseProduct(eq.EG);
    return eq;
}

// Quasi-definite KKT matrix [[dI, A', G'], [A, -dI, 0], [G, 0, -W^2 - dI]] (lower triangle).
class KktSystem {
public:
    KktSystem(const StandardForm& p, const ConeLayout& cones)
        : p_(p), cones_(cones), n_(static_cast<int>(p.c.size())), na_(static_cast<int>(p.A.rows())) {
        const int N = n_ + na_ + cones.m;
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(static_cast<std::size_t>(p.A.nonZeros() + p.G.nonZeros() + N));
        for (int i = 0; i < n_; ++i) trip.emplace_back(i, i, kRegularization);
        for (int j = 0; j < n_; ++j) {
            for (SpMat::InnerIterator it(p.A, j); it; ++it) trip.emplace_back(n_ + it.row(), j, it.value());
            for (SpMat::InnerIterator it(p.G, j); it; ++it)
                trip.emplace_back(n_ + na_ + it.row(), j, it.value());
        }
        for (int i = 0; i < na_; ++i) trip.emplace_back(n_ + i, n_ + i, -kRegularization);
        const int zb = n_ + na_;
        for (int i = 0; i < cones.lp; ++i) trip.emplace_back(zb + i, zb + i, -1.0);
        for (std::size_t k = 0; k < cones.dims.size(); ++k) {
            const int off = zb + cones.offsets[k];
            for (int j = 0; j < cones.dims[k]; ++j)
                for (int i = j; i < cones.dims[k]; ++i) trip.emplace_back(off + i, off + j, i == j ? -1.0 : 0.0);
        }
        K_.resize(N, N);
        K_.setFromTriplets(trip.begin(), trip.end());
        K_.makeCompressed();

        auto position = [&](int r, int c) {
            const int* inner = K_.innerIndexPtr();
            int lo = K_.outerIndexPtr()[c];
            int hi = K_.outerIndexPtr()[c + 1];
            const int* it = std::lower_bound(inner + lo, inner + hi, r);
            return static_cast<int>(it - inner);
        };
        for (int i = 0; i < n_ + na_; ++i) xy_pos_.push_back(position(i, i));
        for (int i = 0; i < cones.lp; ++i) pos_.push_back(position(zb + i, zb + i));
        for (std::size_t k = 0; k < cones.dims.size(); ++k) {
            const int off = zb + cones.offsets[k];
            for (int j = 0; j < cones.dims[k]; ++j)
                for (int i = j; i < cones.dims[k]; ++i) pos_.push_back(position(off + i, off + j));
        }
        At_ = p.A.transpose();
        Gt_ = p.G.transpose();
        ldlt_.analyzePattern(K_);
    }

    // Retries with a larger static regularization when a pivot vanishes; refinement in
    // solve() works against the unregularized matrix either way.
    bool factor(const Scaling& sc) {
        scaling_ = &sc;
        for (double reg : {kRegularization, 1e-7, 1e-5}) {
            fill(sc, reg);
            ldlt_.factorize(K_);
            if (ldlt_.info() == Eigen::Success) return true;
        }
        return false;
    }

    // Solution of the unregularized system via iterative refinement.
    VectorXd solve(const VectorXd& rhs) const {
        VectorXd d = ldlt_.solve(rhs);
        double rhs_norm = rhs.lpNorm<Eigen::Infinity>();
        for (int k = 0; k < 4; ++k) {
            VectorXd r = rhs - apply(d);
            if (!r.allFinite()) break;
            if (r.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + rhs_norm)) break;
            d += ldlt_.solve(r);
        }
        return d;
    }

private:
    void fill(const Scaling& sc, double reg) {
        double* val = K_.valuePtr();
        for (std::size_t i = 0; i < xy_pos_.size(); ++i)
            val[xy_pos_[i]] = i < static_cast<std::size_t>(n_) ? reg : -reg;
        std::size_t idx = 0;
        for (int i = 0; i < cones_.lp; ++i) val[pos_[idx++]] = -sc.w_lp(i) * sc.w_lp(i) - reg;
        for (std::size_t k = 0; k < cones_.dims.size(); ++k)
            for (int j = 0; j < cones_.dims[k]; ++j)
                for (int i = j; i < cones_.dims[k]; ++i)
                    val[pos_[idx++]] = -sc.W2[k](i, j) - (i == j ? reg : 0.0);
    }

    VectorXd apply(const VectorXd& d) const {
        const int m = cones_.m;
        VectorXd out(d.size());
        auto dx = d.head(n_);
        auto dy = d.segment(n_, na_);
        VectorXd dz = d.tail(m);
        out.head(n_) = At_ * dy + Gt_ * dz;
        out.segment(n_, na_) = p_.A * dx;
        out.tail(m) = p_.G * dx - scaling_->apply_W2(cones_, dz);
        return out;
    }

    const StandardForm& p_;
    const ConeLayout& cones_;
    int n_;
    int na_;
    SpMat K_;
    SpMat At_, Gt_;
    std::vector<int> pos_;
    std::vector<int> xy_pos_;  // diagonal of the x and y blocks
    Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
    const Scaling* scaling_ = nullptr;
};

}  // namespace

IpmResult solve_ipm(const StandardForm& original, const IpmSettings& settings) {
    const ConeLayout cones(original.lp_rows, original.soc_dims);
    const int n = static_cast<int>(original.c.size());
    const int na = static_cast<int>(original.A.rows());
    const int m = cones.m;

    StandardForm p = original;
    Equilibration eq = equilibrate(p, cones, settings.ruiz_passes);

    IpmResult res;
    KktSystem kkt(p, cones);
    Scaling sc;

    auto unscale_into = [&](const VectorXd& x, const VectorXd& y, const VectorXd& z, const VectorXd& s, double tau) {
        res.x = eq.D.cwiseProduct(x) / tau;
        res.y = eq.EA.cwiseProduct(y) / tau;
        res.z = eq.EG.cwiseProduct(z) / tau;
        res.s = s.cwiseQuotient(eq.EG) / tau;
    };

    // Starting point from two least-squares style solves with W = I.
    sc.w_lp = VectorXd::Ones(cones.lp);
    sc.W.clear();
    sc.W2.clear();
    for (int q : cones.dims) {
        sc.W.push_back(MatrixXd::Identity(q, q));
        sc.W2.push_back(MatrixXd::Identity(q, q));
    }
    if (!kkt.factor(sc)) {
        res.status = IpmStatus::numerical_error;
        return res;
    }
    VectorXd rhs(n + na + m);
    rhs << VectorXd::Zero(n), p.b, p.h;
    VectorXd sol = kkt.solve(rhs);
    VectorXd x = sol.head(n);
    VectorXd s = shift_into_cone(cones, -sol.tail(m));
    rhs << -p.c, VectorXd::Zero(na), VectorXd::Zero(m);
    sol = kkt.solve(rhs);
    VectorXd y = sol.segment(n, na);
    VectorXd z = shift_into_cone(cones, sol.tail(m));
    double tau = 1.0;
    double kappa = 1.0;

    const VectorXd e = identity_element(cones);
    const double b_norm = original.b.size() ? original.b.lpNorm<Eigen::Infinity>() : 0.0;
    const double h_norm = original.h.size() ? original.h.lpNorm<Eigen::Infinity>() : 0.0;
    const double c_norm = original.c.size() ? original.c.lpNorm<Eigen::Infinity>() : 0.0;
    const SpMat& Ao = original.A;
    const SpMat& Go = original.G;

    bool have_inaccurate = false;
    VectorXd best_x, best_y, best_z, best_s;
    double best_tau = 1.0;
    double best_score = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter <= settings.max_iterations; ++iter) {
        res.iterations = iter;
        // Convergence checks in the original (unscaled) space.
        VectorXd xo = eq.D.cwiseProduct(x) / tau;
        VectorXd yo = eq.EA.cwiseProduct(y) / tau;
        VectorXd zo = eq.EG.cwiseProduct(z) / tau;
        VectorXd so = s.cwiseQuotient(eq.EG) / tau;
        double pres_a = na ? (Ao * xo - original.b).lpNorm<Eigen::Infinity>() / (1.0 + b_norm) : 0.0;
        double pres_g = m ? (Go * xo + so - original.h).lpNorm<Eigen::Infinity>() / (1.0 + h_norm) : 0.0;
        double pres = std::max(pres_a, pres_g);
        VectorXd rdual = original.c;
        if (na) rdual += Ao.transpose() * yo;
        if (m) rdual += Go.transpose() * zo;
        double dres = rdual.lpNorm<Eigen::Infinity>() / (1.0 + c_norm);
        double pcost = original.c.dot(xo);
        double dcost = -(na ? original.b.dot(yo) : 0.0) - (m ? original.h.dot(zo) : 0.0);
        double gap = m ? so.dot(zo) : 0.0;
        double scale = 1.0 + std::min(std::abs(pcost), std::abs(dcost));
        double gap_err = std::max(std::abs(gap), std::abs(pcost - dcost)) / scale;
        res.pres = pres;
        res.dres = dres;
        res.pcost = pcost;
        res.dcost = dcost;
        if (!std::isfinite(pres) || !std::isfinite(dres) || !std::isfinite(gap_err)) break;

        if (pres < settings.tol && dres < settings.tol && gap_err < settings.tol) {
            unscale_into(x, y, z, s, tau);
            res.status = IpmStatus::optimal;
            return res;
        }
        double score = std::max({pres, dres, gap_err});
        if (score < settings.tol_inaccurate && score < best_score) {
            have_inaccurate = true;
            best_score = score;
            best_x = x;
            best_y = y;
            best_z = z;
            best_s = s;
            best_tau = tau;
        }

        // Infeasibility certificates (unnormalized iterates).
        {
            VectorXd yc = eq.EA.cwiseProduct(y);
            VectorXd zc = eq.EG.cwiseProduct(z);
            double hz_by = (na ? original.b.dot(yc) : 0.0) + (m ? original.h.dot(zc) : 0.0);
            if (hz_by < 0.0) {
                VectorXd r = VectorXd::Zero(n);
                if (na) r += Ao.transpose() * yc;
                if (m) r += Go.transpose() * zc;
                if (r.lpNorm<Eigen::Infinity>() / -hz_by < settings.tol * 10 && kappa > 1e3 * tau) {
                    res.x = VectorXd::Zero(n);
                    res.y = yc / -hz_by;
                    res.z = zc / -hz_by;
                    res.s = VectorXd::Zero(m);
                    res.status = IpmStatus::primal_infeasible;
                    return res;
                }
            }
            VectorXd xc = eq.D.cwiseProduct(x);
            double cx = original.c.dot(xc);
            if (cx < 0.0) {
                double r1 = na ? (Ao * xc).lpNorm<Eigen::Infinity>() : 0.0;
                double r2 = m ? (Go * xc + s.cwiseQuotient(eq.EG)).lpNorm<Eigen::Infinity>() : 0.0;
                if (std::max(r1, r2) / -cx < settings.tol * 10 && kappa > 1e3 * tau) {
                    res.x = xc / -cx;
                    res.status = IpmStatus::dual_infeasible;
                    return res;
                }
            }
        }
        if (iter == settings.max_iterations) break;

        // Residuals of the embedding in the scaled space.
        VectorXd rx = p.c * tau;
        if (na) rx += p.A.transpose() * y;
        if (m) rx += p.G.transpose() * z;
        VectorXd ry = p.b * tau - p.A * x;
        VectorXd rz = p.h * tau - p.G * x - s;
        double rt = -p.c.dot(x) - p.b.dot(y) - p.h.dot(z) - kappa;

        if (!sc.update(cones, s, z) || !kkt.factor(sc)) break;
        const double mu = (s.dot(z) + tau * kappa) / (cones.degree() + 1);

        rhs << -p.c, p.b, p.h;
        VectorXd d1 = kkt.solve(rhs);
        auto x1 = d1.head(n);
        auto y1 = d1.segment(n, na);
        auto z1 = d1.tail(m);
        double denom_base = -p.c.dot(x1) - p.b.dot(y1) - p.h.dot(z1);

        struct Direction {
            VectorXd dx, dy, dz, ds;
            double dtau = 0.0, dkappa = 0.0;
        };
        auto direction = [&](double sigma, const VectorXd& ds_target, double dk_target) {
            VectorXd lam_div = jordan_divide(cones, sc.lambda, ds_target);
            rhs << -(1.0 - sigma) * rx, (1.0 - sigma) * ry, (1.0 - sigma) * rz - sc.apply_W(cones, lam_div);
            VectorXd d2 = kkt.solve(rhs);
            Direction d;
            double num = -(1.0 - sigma) * rt + dk_target / tau + p.c.dot(d2.head(n)) +
                         p.b.dot(d2.segment(n, na)) + p.h.dot(d2.tail(m));
            d.dtau = num / (kappa / tau + denom_base);
            d.dx = d2.head(n) + d.dtau * x1;
            d.dy = d2.segment(n, na) + d.dtau * y1;
            d.dz = d2.tail(m) + d.dtau * z1;
            d.ds = sc.apply_W(cones, lam_div - sc.apply_W(cones, d.dz));
            d.dkappa = (dk_target - kappa * d.dtau) / tau;
            return d;
        };
        auto step_to_boundary = [&](const Direction& d) {
            double a = std::min(max_step(cones, s, d.ds), max_step(cones, z, d.dz));
            if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
            if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
            return a;
        };

        VectorXd lam_sq = jordan_product(cones, sc.lambda, sc.lambda);
        Direction aff = direction(0.0, -lam_sq, -tau * kappa);
        double alpha_aff = std::min(1.0, step_to_boundary(aff));
        double sigma = std::clamp(std::pow(1.0 - alpha_aff, 3), 0.0, 1.0);

        VectorXd ws = jordan_divide(cones, sc.lambda, -lam_sq) - sc.apply_W(cones, aff.dz);  // W^{-1} ds_aff
        VectorXd wz = sc.apply_W(cones, aff.dz);
        VectorXd ds_target = -lam_sq - jordan_product(cones, ws, wz) + sigma * mu * e;
        double dk_target = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        Direction dir = direction(sigma, ds_target, dk_target);
        double alpha = std::min(1.0, kStepFraction * step_to_boundary(dir));
        if (!(alpha > 1e-12) || !dir.dx.allFinite()) break;

        x += alpha * dir.dx;
        y += alpha * dir.dy;
        z += alpha * dir.dz;
        s += alpha * dir.ds;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;
    }

    if (have_inaccurate) {
        unscale_into(best_x, best_y, best_z, best_s, best_tau);
        res.status = IpmStatus::optimal;
        return res;
    }
    unscale_into(x, y, z, s, tau);
    res.status = res.iterations >= settings.max_iterations ? IpmStatus::max_iterations : IpmStatus::numerical_error;
    return res;
}

}  // namespace dermarket::solver::detail
