#pragma once

// Primal active-set method for strictly convex QPs with a diagonal Hessian:
//
//   min 0.5 x'diag(h)x + g'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub
//
// Same multiplier convention as solve_lp.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "poolbid/error.hpp"
#include "poolbid/lp_simplex.hpp"

namespace poolbid {

struct QpResult {
    Eigen::VectorXd x;
    Eigen::VectorXd y_eq;
    Eigen::VectorXd y_ub;
    Eigen::VectorXd z_lb;
    Eigen::VectorXd z_ub;
    double objective = 0.0;
    int iterations = 0;
};

struct ActiveSetOptions {
    double zero_step_tol = 1e-11;
    double multiplier_tol = 1e-10;
    int max_iterations = 0;  // 0: 50 * (vars + constraints); exceeding it trips the cycling guard
};

namespace detail {

// Inequality constraints indexed as: [0, mu) rows of A_ub, [mu, mu+n) lower bounds, [mu+n, mu+2n) upper bounds.
struct InequalityView {
    const LinearConstraints& lc;
    Eigen::Index n, mu;

    Eigen::Index count() const { return mu + 2 * n; }
    double dot(Eigen::Index i, const Eigen::VectorXd& v) const {
        if (i < mu) return lc.A_ub.row(i).dot(v);
        if (i < mu + n) return -v[i - mu];
        return v[i - mu - n];
    }
    double rhs(Eigen::Index i) const {
        if (i < mu) return lc.b_ub[i];
        if (i < mu + n) return -lc.lb[i - mu];
        return lc.ub[i - mu - n];
    }
    Eigen::VectorXd row(Eigen::Index i) const {
        if (i < mu) return lc.A_ub.row(i).transpose();
        Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
        if (i < mu + n) e[i - mu] = -1.0; else e[i - mu - n] = 1.0;
        return e;
    }
};

} // namespace detail

inline QpResult solve_qp(const Eigen::VectorXd& h, const Eigen::VectorXd& g, const LinearConstraints& lc,
                         const ActiveSetOptions& opt = {}) {
    using Eigen::Index;
    const Index n = lc.num_vars();
    const Index me = lc.A_eq.rows(), mu = lc.A_ub.rows();
    if (h.size() != n || g.size() != n) throw ValidationError("QP dimension mismatch");
    if ((h.array() <= 0.0).any()) throw ValidationError("QP Hessian must be positive definite");

    // Feasible vertex from the simplex phase I.
    LpResult start = solve_lp(Eigen::VectorXd::Zero(n), lc);
    Eigen::VectorXd x = start.x;

    detail::InequalityView ineq{lc, n, mu};
    const Index nin = ineq.count();
    const Eigen::VectorXd hinv = h.cwiseInverse();

    std::vector<Index> work;  // working inequality ids
    auto stacked = [&](const std::vector<Index>& ids) {
        Eigen::MatrixXd A(me + static_cast<Index>(ids.size()), n);
        if (me > 0) A.topRows(me) = lc.A_eq;
        for (std::size_t k = 0; k < ids.size(); ++k) A.row(me + static_cast<Index>(k)) = ineq.row(ids[k]).transpose();
        return A;
    };
    auto full_row_rank = [&](const Eigen::MatrixXd& A) {
        if (A.rows() == 0) return true;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        lu.setThreshold(1e-10);
        return lu.rank() == A.rows();
    };
    for (Index i = 0; i < nin; ++i) {
        double rhs = ineq.rhs(i);
        if (!std::isfinite(rhs)) continue;
        if (rhs - ineq.dot(i, x) > 1e-9 * (1.0 + std::abs(rhs))) continue;
        if (me + static_cast<Index>(work.size()) >= n) break;
        work.push_back(i);
        if (!full_row_rank(stacked(work))) work.pop_back();
    }

    const int max_iter = opt.max_iterations > 0 ? opt.max_iterations : static_cast<int>(50 * (n + me + nin));
    QpResult res;
    Eigen::VectorXd lambda;
    for (int it = 0;; ++it) {
        if (it > max_iter) throw NumericalError("active-set cycling guard tripped");
        res.iterations = it;
        // Minimizer of the objective on {A_W z = b_W}: z = -H^-1 (g + A_W' lambda).
        Eigen::MatrixXd A = stacked(work);
        Eigen::VectorXd bw(A.rows());
        if (me > 0) bw.head(me) = lc.b_eq;
        for (std::size_t k = 0; k < work.size(); ++k) bw[me + static_cast<Index>(k)] = ineq.rhs(work[k]);
        Eigen::VectorXd z;
        if (A.rows() > 0) {
            Eigen::MatrixXd schur = A * hinv.asDiagonal() * A.transpose();
            Eigen::LDLT<Eigen::MatrixXd> ldlt(schur);
            if (ldlt.info() != Eigen::Success) throw NumericalError("singular working-set system");
            lambda = -ldlt.solve(bw + A * hinv.cwiseProduct(g));
            z = -hinv.cwiseProduct(g + A.transpose() * lambda);
        } else {
            lambda.resize(0);
            z = -hinv.cwiseProduct(g);
        }
        Eigen::VectorXd p = z - x;
        if (p.cwiseAbs().maxCoeff() <= opt.zero_step_tol * (1.0 + x.cwiseAbs().maxCoeff())) {
            x = z;
            Index worst = -1;
            double worst_val = -opt.multiplier_tol * (1.0 + g.cwiseAbs().maxCoeff());
            for (std::size_t k = 0; k < work.size(); ++k) {
                double l = lambda[me + static_cast<Index>(k)];
                if (l < worst_val) {
                    worst_val = l;
                    worst = static_cast<Index>(k);
                }
            }
            if (worst < 0) break;
            work.erase(work.begin() + worst);
            continue;
        }
        double alpha = 1.0;
        Index block = -1;
        for (Index i = 0; i < nin; ++i) {
            if (std::find(work.begin(), work.end(), i) != work.end()) continue;
            double ap = ineq.dot(i, p);
            if (ap <= 1e-14) continue;
            double rhs = ineq.rhs(i);
            if (!std::isfinite(rhs)) continue;
            double step = std::max(rhs - ineq.dot(i, x), 0.0) / ap;
            if (step < alpha) {
                alpha = step;
                block = i;
            }
        }
        if (block < 0) {
            x = z;
        } else {
            x += alpha * p;
            work.push_back(block);
        }
    }

    res.x = x;
    res.y_eq = lambda.head(me);
    res.y_ub = Eigen::VectorXd::Zero(mu);
    res.z_lb = Eigen::VectorXd::Zero(n);
    res.z_ub = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < work.size(); ++k) {
        Index i = work[k];
        double l = std::max(lambda[me + static_cast<Index>(k)], 0.0);
        if (i < mu) res.y_ub[i] = l;
        else if (i < mu + n) res.z_lb[i - mu] = l;
        else res.z_ub[i - mu - n] = l;
    }
    res.objective = 0.5 * x.dot(h.cwiseProduct(x)) + g.dot(x);
    return res;
}

} // namespace poolbid
