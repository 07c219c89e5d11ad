#pragma once

// Dense bounded-variable revised simplex with Bland's anti-cycling rule.
//
//   min c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lb <= x <= ub
//
// Multipliers follow c + A_eq' y_eq + A_ub' y_ub - z_lb + z_ub = 0 with y_ub, z_lb, z_ub >= 0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "poolbid/error.hpp"

namespace poolbid {

struct LinearConstraints {
    Eigen::MatrixXd A_eq;
    Eigen::VectorXd b_eq;
    Eigen::MatrixXd A_ub;
    Eigen::VectorXd b_ub;
    Eigen::VectorXd lb;   // finite
    Eigen::VectorXd ub;   // +inf allowed

    Eigen::Index num_vars() const { return lb.size(); }
};

struct LpResult {
    Eigen::VectorXd x;
    Eigen::VectorXd y_eq;
    Eigen::VectorXd y_ub;
    Eigen::VectorXd z_lb;
    Eigen::VectorXd z_ub;
    double objective = 0.0;
    int iterations = 0;
    /// Some nonbasic column has a zero reduced cost: the optimum may not be unique.
    bool dual_degenerate = false;
};

struct SimplexOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    int max_iterations = 0;  // 0: 200 * (vars + rows)
};

namespace detail {

enum class VarState { basic, at_lower, at_upper };

struct SimplexTableau {
    Eigen::MatrixXd A;   // m x ntot
    Eigen::VectorXd b;
    Eigen::VectorXd lo, hi;
    std::vector<int> basis;
    std::vector<VarState> state;
    Eigen::VectorXd x;   // all variables

    Eigen::Index rows() const { return A.rows(); }
    Eigen::Index cols() const { return A.cols(); }

    Eigen::PartialPivLU<Eigen::MatrixXd> factor() const {
        Eigen::MatrixXd B(rows(), rows());
        for (Eigen::Index r = 0; r < rows(); ++r) B.col(r) = A.col(basis[static_cast<std::size_t>(r)]);
        return Eigen::PartialPivLU<Eigen::MatrixXd>(B);
    }

    void recompute_basics(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu) {
        Eigen::VectorXd rhs = b;
        for (Eigen::Index j = 0; j < cols(); ++j)
            if (state[static_cast<std::size_t>(j)] != VarState::basic) rhs -= A.col(j) * x[j];
        Eigen::VectorXd xb = lu.solve(rhs);
        for (Eigen::Index r = 0; r < rows(); ++r) x[basis[static_cast<std::size_t>(r)]] = xb[r];
    }
};

// Runs simplex iterations on `t` for cost vector `cost`; columns with allowed[j] == false never enter.
// Returns the row duals of the final basis.
inline Eigen::VectorXd run_simplex(SimplexTableau& t, const Eigen::VectorXd& cost, const std::vector<bool>& allowed,
                                   const SimplexOptions& opt, int& iterations, int max_iter) {
    const Eigen::Index m = t.rows(), ntot = t.cols();
    const double scale = 1.0 + cost.cwiseAbs().maxCoeff();
    for (;;) {
        auto lu = t.factor();
        t.recompute_basics(lu);
        Eigen::VectorXd cb(m);
        for (Eigen::Index r = 0; r < m; ++r) cb[r] = cost[t.basis[static_cast<std::size_t>(r)]];
        Eigen::VectorXd y = lu.transpose().solve(cb);

        int entering = -1;
        double dir = 0.0;
        for (Eigen::Index j = 0; j < ntot; ++j) {
            const auto s = t.state[static_cast<std::size_t>(j)];
            if (s == VarState::basic || !allowed[static_cast<std::size_t>(j)]) continue;
            if (t.hi[j] - t.lo[j] <= 0.0) continue;  // fixed
            double d = cost[j] - t.A.col(j).dot(y);
            if (s == VarState::at_lower && d < -opt.optimality_tol * scale) { entering = static_cast<int>(j); dir = 1.0; break; }
            if (s == VarState::at_upper && d > opt.optimality_tol * scale) { entering = static_cast<int>(j); dir = -1.0; break; }
        }
        if (entering < 0) return y;
        if (++iterations > max_iter) throw NumericalError("simplex iteration limit reached");

        Eigen::VectorXd u = lu.solve(t.A.col(entering));
        // x_B(t) = x_B - dir * t * u
        double best = t.hi[entering] - t.lo[entering];
        int leave_row = -1;  // -1: bound flip of the entering variable
        int leave_var = entering;
        const double piv_tol = 1e-11;
        for (Eigen::Index r = 0; r < m; ++r) {
            double delta = dir * u[r];
            if (std::abs(delta) <= piv_tol) continue;
            const int v = t.basis[static_cast<std::size_t>(r)];
            double room = delta > 0 ? t.x[v] - t.lo[v] : t.hi[v] - t.x[v];
            if (room == std::numeric_limits<double>::infinity()) continue;
            double step = std::max(room, 0.0) / std::abs(delta);
            const double slop = std::isfinite(best) ? 1e-12 * (1.0 + std::abs(best)) : 0.0;
            bool better = step < best - slop;
            bool tie = !better && step <= best + slop;
            if (better || (tie && v < leave_var)) {
                best = step;
                leave_row = static_cast<int>(r);
                leave_var = v;
            }
        }
        if (best == std::numeric_limits<double>::infinity()) throw NumericalError("LP unbounded");

        if (leave_row < 0) {
            t.state[static_cast<std::size_t>(entering)] = dir > 0 ? VarState::at_upper : VarState::at_lower;
            t.x[entering] = dir > 0 ? t.hi[entering] : t.lo[entering];
            continue;
        }
        const int v = leave_var;
        const double delta = dir * u[leave_row];
        t.state[static_cast<std::size_t>(v)] = delta > 0 ? VarState::at_lower : VarState::at_upper;
        t.x[v] = delta > 0 ? t.lo[v] : t.hi[v];
        t.x[entering] += dir * best;
        t.basis[static_cast<std::size_t>(leave_row)] = entering;
        t.state[static_cast<std::size_t>(entering)] = VarState::basic;
    }
}

} // namespace detail

inline LpResult solve_lp(const Eigen::VectorXd& c, const LinearConstraints& lc, const SimplexOptions& opt = {}) {
    using Eigen::Index;
    const Index n = lc.num_vars();
    const Index me = lc.A_eq.rows(), mu = lc.A_ub.rows();
    const Index m = me + mu;
    if (c.size() != n || lc.ub.size() != n || (me > 0 && lc.A_eq.cols() != n) || (mu > 0 && lc.A_ub.cols() != n) ||
        lc.b_eq.size() != me || lc.b_ub.size() != mu)
        throw ValidationError("LP dimension mismatch");
    for (Index j = 0; j < n; ++j)
        if (!std::isfinite(lc.lb[j]) || lc.ub[j] < lc.lb[j]) throw InfeasibleError("infeasible variable bounds");

    // Columns: x (n) | slacks (mu) | artificials (m)
    const Index ntot = n + mu + m;
    detail::SimplexTableau t;
    t.A = Eigen::MatrixXd::Zero(m, ntot);
    t.b.resize(m);
    t.lo = Eigen::VectorXd::Zero(ntot);
    t.hi = Eigen::VectorXd::Constant(ntot, std::numeric_limits<double>::infinity());
    t.x = Eigen::VectorXd::Zero(ntot);
    t.state.assign(static_cast<std::size_t>(ntot), detail::VarState::at_lower);
    t.basis.resize(static_cast<std::size_t>(m));
    if (me > 0) t.A.block(0, 0, me, n) = lc.A_eq;
    if (mu > 0) {
        t.A.block(me, 0, mu, n) = lc.A_ub;
        t.A.block(me, n, mu, mu).setIdentity();
    }
    t.b << lc.b_eq, lc.b_ub;
    t.lo.head(n) = lc.lb;
    t.hi.head(n) = lc.ub;
    t.x.head(n) = lc.lb;

    Eigen::VectorXd resid = t.b - t.A.leftCols(n) * lc.lb;
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(ntot);
    for (Index r = 0; r < m; ++r) {
        const Index art = n + mu + r;
        if (r >= me && resid[r] >= 0.0) {
            // slack is a feasible starting basic; artificial is unused
            t.basis[static_cast<std::size_t>(r)] = static_cast<int>(n + r - me);
            t.state[static_cast<std::size_t>(n + r - me)] = detail::VarState::basic;
            t.hi[art] = 0.0;
            continue;
        }
        t.A(r, art) = resid[r] >= 0.0 ? 1.0 : -1.0;
        t.basis[static_cast<std::size_t>(r)] = static_cast<int>(art);
        t.state[static_cast<std::size_t>(art)] = detail::VarState::basic;
        phase1[art] = 1.0;
    }

    const int max_iter = opt.max_iterations > 0 ? opt.max_iterations : static_cast<int>(200 * (ntot + m));
    int iterations = 0;
    std::vector<bool> allowed(static_cast<std::size_t>(ntot), true);
    detail::run_simplex(t, phase1, allowed, opt, iterations, max_iter);
    const double bscale = 1.0 + t.b.cwiseAbs().maxCoeff();
    if (phase1.dot(t.x) > opt.feasibility_tol * bscale) throw InfeasibleError("infeasible");

    // Phase II: artificials pinned at zero and barred from entering.
    for (Index r = 0; r < m; ++r) {
        const Index art = n + mu + r;
        t.hi[art] = 0.0;
        allowed[static_cast<std::size_t>(art)] = false;
        if (t.state[static_cast<std::size_t>(art)] != detail::VarState::basic) {
            t.state[static_cast<std::size_t>(art)] = detail::VarState::at_lower;
            t.x[art] = 0.0;
        }
    }
    Eigen::VectorXd cost = Eigen::VectorXd::Zero(ntot);
    cost.head(n) = c;
    Eigen::VectorXd y = detail::run_simplex(t, cost, allowed, opt, iterations, max_iter);

    LpResult res;
    res.iterations = iterations;
    res.x = t.x.head(n);
    res.y_eq = -y.head(me);
    res.y_ub = (-y.tail(mu)).cwiseMax(0.0);
    res.z_lb = Eigen::VectorXd::Zero(n);
    res.z_ub = Eigen::VectorXd::Zero(n);
    const double scale = 1.0 + c.cwiseAbs().maxCoeff();
    for (Index j = 0; j < n; ++j) {
        if (t.state[static_cast<std::size_t>(j)] == detail::VarState::basic) continue;
        double d = c[j] - t.A.col(j).dot(y);
        if (d >= 0.0) res.z_lb[j] = d; else res.z_ub[j] = -d;
        if (std::abs(d) <= opt.optimality_tol * scale && lc.ub[j] > lc.lb[j]) res.dual_degenerate = true;
    }
    for (Index s = 0; s < mu; ++s) {
        if (t.state[static_cast<std::size_t>(n + s)] == detail::VarState::basic) continue;
        if (std::abs(y[me + s]) <= opt.optimality_tol * scale) res.dual_degenerate = true;
    }
    res.objective = c.dot(res.x);
    return res;
}

} // namespace poolbid
