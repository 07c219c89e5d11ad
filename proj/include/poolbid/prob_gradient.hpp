#pragma once

// Gradient of the coupled probability vector with respect to the features:
//   dp/dX_m = M D_m p,  D_m = dQ/dX_m,  M = Q^-1 [e (e'Q^-1 e)^-1 e'Q^-1 - I].

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

#include "poolbid/classifier.hpp"
#include "poolbid/coupling.hpp"

namespace poolbid {

struct GradientBundle {
    Eigen::MatrixXd grad_p;         // K x d, raw feature units
    Eigen::MatrixXd grad_p_scaled;  // K x d, scaled feature units
    Eigen::MatrixXd M;              // K x K
    std::vector<Eigen::MatrixXd> D; // one K x K matrix per feature
    Eigen::MatrixXd dr;             // pairs x d: d r(i, j) / d scaled X_m for i < j in pair order
};

inline double clip_probability(double r) { return std::clamp(r, 1e-12, 1.0 - 1e-12); }

/// D_m from the pairwise matrix, the sigmoid slopes A and the SVM weights (scaled space).
/// Pair parameters are symmetric: (A, w) of pair {i, j} serve both orders, and the sign
/// (-1)^[s < i] / (-1)^[i < j] accounts for r(j, i) = 1 - r(i, j).
inline Eigen::MatrixXd build_Dk(const Eigen::MatrixXd& r, const OvoClassifier& clf, Eigen::Index m) {
    const int K = clf.K;
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(K, K);
    auto A_of = [&](int i, int j) { return clf.pair(std::min(i, j), std::max(i, j)).platt.A; };
    auto w_of = [&](int i, int j) { return clf.pair(std::min(i, j), std::max(i, j)).svm.w[m]; };
    for (int i = 0; i < K; ++i)
        for (int j = 0; j < K; ++j) {
            if (i == j) {
                double s_sum = 0.0;
                for (int s = 0; s < K; ++s) {
                    if (s == i) continue;
                    const double rsi = clip_probability(r(s, i));
                    const double sign = s < i ? -1.0 : 1.0;
                    s_sum += A_of(s, i) * sign * 2.0 * rsi * rsi * (1.0 - rsi) * w_of(s, i);
                }
                D(i, i) = s_sum;
            } else {
                const double rij = clip_probability(r(i, j));
                const double sign = i < j ? -1.0 : 1.0;
                D(i, j) = A_of(i, j) * sign * (2.0 * rij - 1.0) * rij * (1.0 - rij) * w_of(i, j);
            }
        }
    return D;
}

/// Explicit formula; needs an invertible Q.
inline Eigen::MatrixXd coupling_sensitivity_explicit(const Eigen::MatrixXd& Q) {
    const Eigen::Index K = Q.rows();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(Q);
    Eigen::MatrixXd Qi = ldlt.solve(Eigen::MatrixXd::Identity(K, K));
    if (ldlt.info() != Eigen::Success || !Qi.allFinite()) throw NumericalError("singular coupling matrix");
    const Eigen::VectorXd e = Eigen::VectorXd::Ones(K);
    const Eigen::VectorXd Qie = Qi * e;
    return Qi * (e * Qie.transpose() / e.dot(Qie) - Eigen::MatrixXd::Identity(K, K));
}

/// Same M through the bordered KKT inverse; it stays defined when Q is singular (always so for K = 2).
inline Eigen::MatrixXd coupling_sensitivity(const Eigen::MatrixXd& Q) {
    return -coupling_kkt_inverse(Q).topLeftCorner(Q.rows(), Q.cols());
}

inline GradientBundle grad_probabilities(const ProbOutput& prob, const OvoClassifier& clf, const std::vector<double>& raw) {
    if (prob.p.size() != clf.K) throw ValidationError("probability output does not match the classifier");
    const Eigen::VectorXd xs = scale_features(clf, raw);
    const Eigen::Index d = xs.size();
    GradientBundle g;
    g.grad_p_scaled = Eigen::MatrixXd::Zero(clf.K, d);
    g.dr = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(clf.pairs.size()), d);
    for (std::size_t k = 0; k < clf.pairs.size(); ++k) {
        const auto& pm = clf.pairs[k];
        const double r = clip_probability(prob.r(pm.svm.class_i, pm.svm.class_j));
        g.dr.row(static_cast<Eigen::Index>(k)) = (-pm.platt.A * r * (1.0 - r)) * pm.svm.w.transpose();
    }
    if (clf.K == 1) {
        g.M = Eigen::MatrixXd::Zero(1, 1);
        g.grad_p = g.grad_p_scaled;
        return g;
    }
    g.M = coupling_sensitivity(prob.Q);
    g.D.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index m = 0; m < d; ++m) {
        g.D.push_back(build_Dk(prob.r, clf, m));
        g.grad_p_scaled.col(m) = g.M * (g.D.back() * prob.p);
    }
    g.grad_p = g.grad_p_scaled;
    for (Eigen::Index m = 0; m < d; ++m) g.grad_p.col(m) *= clf.scaler.jacobian(static_cast<std::size_t>(m));
    return g;
}

} // namespace poolbid
