#pragma once

// Pairwise coupling: min 0.5 p'Qp over the probability simplex, solved through its KKT system.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "poolbid/error.hpp"

namespace poolbid {

struct ProbOutput {
    Eigen::VectorXd p;
    Eigen::MatrixXd r;   // r(i, j) = P(i | i or j); diagonal unused (zero)
    Eigen::MatrixXd Q;   // as used in the final solve (ridge included)
    double alpha = 0.0;
    bool ridge_applied = false;
};

inline Eigen::MatrixXd coupling_matrix(const Eigen::MatrixXd& r) {
    const Eigen::Index K = r.rows();
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(K, K);
    for (Eigen::Index i = 0; i < K; ++i)
        for (Eigen::Index j = 0; j < K; ++j) {
            if (i == j) {
                for (Eigen::Index s = 0; s < K; ++s)
                    if (s != i) Q(i, i) += r(s, i) * r(s, i);
            } else {
                Q(i, j) = -r(j, i) * r(i, j);
            }
        }
    return Q;
}

/// Solves [Q e; e' 0][p; alpha] = [0; 1].
inline void solve_coupling_kkt(const Eigen::MatrixXd& Q, Eigen::VectorXd& p, double& alpha) {
    const Eigen::Index K = Q.rows();
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(K + 1, K + 1);
    kkt.topLeftCorner(K, K) = Q;
    kkt.topRightCorner(K, 1).setOnes();
    kkt.bottomLeftCorner(1, K).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(K + 1);
    rhs[K] = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) throw NumericalError("singular coupling system");
    Eigen::VectorXd sol = lu.solve(rhs);
    p = sol.head(K);
    alpha = sol[K];
}

/// r must satisfy r(i, j) + r(j, i) = 1 off the diagonal with entries in (0, 1).
inline ProbOutput couple_probabilities(const Eigen::MatrixXd& r) {
    const Eigen::Index K = r.rows();
    if (K < 1 || r.cols() != K) throw ValidationError("pairwise matrix must be square");
    for (Eigen::Index i = 0; i < K; ++i)
        for (Eigen::Index j = i + 1; j < K; ++j) {
            if (!(r(i, j) > 0.0 && r(i, j) < 1.0)) throw ValidationError("pairwise probability outside (0, 1)");
            if (std::abs(r(i, j) + r(j, i) - 1.0) > 1e-12) throw ValidationError("pairwise probabilities not complementary");
        }
    ProbOutput out;
    out.r = r;
    out.r.diagonal().setZero();
    if (K == 1) {
        out.p = Eigen::VectorXd::Ones(1);
        out.Q = Eigen::MatrixXd::Zero(1, 1);
        return out;
    }
    out.Q = coupling_matrix(out.r);
    solve_coupling_kkt(out.Q, out.p, out.alpha);
    if (out.p.minCoeff() < -1e-9) {
        out.Q.diagonal().array() += 1e-10;
        out.ridge_applied = true;
        solve_coupling_kkt(out.Q, out.p, out.alpha);
    }
    return out;
}

/// Bordered KKT inverse, whose top-left block is -M in the gradient formula. Works whether or not Q is singular.
inline Eigen::MatrixXd coupling_kkt_inverse(const Eigen::MatrixXd& Q) {
    const Eigen::Index K = Q.rows();
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(K + 1, K + 1);
    kkt.topLeftCorner(K, K) = Q;
    kkt.topRightCorner(K, 1).setOnes();
    kkt.bottomLeftCorner(1, K).setOnes();
    Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
    if (!lu.isInvertible()) throw NumericalError("singular coupling system");
    return lu.inverse();
}

} // namespace poolbid
