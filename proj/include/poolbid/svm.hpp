#pragma once

// Linear soft-margin SVM (hinge loss, dual coordinate descent) and Platt's sigmoid calibration.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "poolbid/error.hpp"

namespace poolbid {

/// Decision value f = w'x - rho. Positive f votes for the y = +1 class.
struct BinarySvm {
    int class_i = 0;  // y = -1
    int class_j = 1;  // y = +1
    Eigen::VectorXd w;
    double rho = 0.0;
    double C = 1.0;
    int epochs = 0;
    bool converged = false;

    double decision(const Eigen::VectorXd& x) const { return w.dot(x) - rho; }
};

struct SvmOptions {
    double kkt_tol = 1e-6;
    int max_epochs = 2000;
    std::uint64_t seed = 7;
};

/// Rows of X are samples; y in {-1, +1}. The bias is learned as the weight of a constant unit feature.
inline BinarySvm train_binary_svm(const Eigen::MatrixXd& X, const std::vector<int>& y, double C,
                                  const SvmOptions& opt = {}) {
    const Eigen::Index n = X.rows(), d = X.cols();
    if (static_cast<Eigen::Index>(y.size()) != n) throw ValidationError("label count does not match rows");
    if (!(C > 0.0) || !std::isfinite(C)) throw ValidationError("C must be positive");
    bool has_pos = false, has_neg = false;
    for (int v : y) {
        if (v == 1) has_pos = true;
        else if (v == -1) has_neg = true;
        else throw ValidationError("labels must be -1 or +1");
    }
    if (!has_pos || !has_neg) throw ValidationError("single-class input");

    Eigen::VectorXd qii(n);
    for (Eigen::Index i = 0; i < n; ++i) qii[i] = X.row(i).squaredNorm() + 1.0;
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double bias = 0.0;

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(opt.seed);

    BinarySvm m;
    m.C = C;
    for (int ep = 0; ep < opt.max_epochs; ++ep) {
        std::shuffle(order.begin(), order.end(), rng);
        // No equality row in this dual (the bias is a regularized weight), so every projected gradient must vanish.
        double pg_inf = 0.0;
        for (Eigen::Index i : order) {
            const double yi = y[static_cast<std::size_t>(i)];
            const double g = yi * (w.dot(X.row(i).transpose()) + bias) - 1.0;
            double pg = g;
            if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
            else if (alpha[i] >= C) pg = std::max(g, 0.0);
            pg_inf = std::max(pg_inf, std::abs(pg));
            if (pg == 0.0) continue;
            const double old = alpha[i];
            alpha[i] = std::clamp(old - g / qii[i], 0.0, C);
            const double delta = (alpha[i] - old) * yi;
            if (delta != 0.0) {
                w += delta * X.row(i).transpose();
                bias += delta;
            }
        }
        m.epochs = ep + 1;
        if (pg_inf <= opt.kkt_tol) {
            m.converged = true;
            break;
        }
    }
    m.w = w;
    m.rho = -bias;
    return m;
}

// ---------------------------------------------------------------------------

/// r = 1 / (1 + exp(A f + B)) is the probability of the "positive" event.
struct PlattParams {
    double A = -1.0;
    double B = 0.0;

    double probability(double f) const {
        const double z = A * f + B;
        // evaluated on the stable branch
        return z >= 0.0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
    }
};

struct PlattOptions {
    int max_iterations = 100;
    double grad_tol = 1e-10;  // scaled by 1 + sum |f|
    double min_step = 1e-12;
    double hessian_ridge = 1e-12;
};

/// Newton's method with backtracking on the smoothed-target negative log likelihood.
inline PlattParams fit_platt(const std::vector<double>& f, const std::vector<bool>& positive, const PlattOptions& opt = {}) {
    if (f.size() != positive.size()) throw ValidationError("decision value count does not match labels");
    std::size_t np = 0, nn = 0;
    for (bool p : positive) (p ? np : nn)++;
    if (np == 0 || nn == 0) throw ValidationError("both classes are needed to fit the sigmoid");
    const double hi = (static_cast<double>(np) + 1.0) / (static_cast<double>(np) + 2.0);
    const double lo = 1.0 / (static_cast<double>(nn) + 2.0);
    const std::size_t n = f.size();
    std::vector<double> t(n);
    double fscale = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        t[i] = positive[i] ? hi : lo;
        fscale += std::abs(f[i]);
    }

    // per-sample loss -[t log r + (1 - t) log(1 - r)] = log(1 + e^z) - (1 - t) z with z = A f + B
    auto objective = [&](double A, double B) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = A * f[i] + B;
            const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
            v += softplus - (1.0 - t[i]) * z;
        }
        return v;
    };

    PlattParams p;
    p.A = 0.0;
    p.B = std::log((static_cast<double>(nn) + 1.0) / (static_cast<double>(np) + 1.0));
    double fval = objective(p.A, p.B);
    for (int it = 0; it < opt.max_iterations; ++it) {
        double h11 = opt.hessian_ridge, h22 = opt.hessian_ridge, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = PlattParams{p.A, p.B}.probability(f[i]);
            const double q = 1.0 - r;
            const double d2 = r * q;
            h11 += f[i] * f[i] * d2;
            h22 += d2;
            h21 += f[i] * d2;
            const double d1 = t[i] - r;
            g1 += f[i] * d1;
            g2 += d1;
        }
        if (std::max(std::abs(g1), std::abs(g2)) <= opt.grad_tol * fscale) return p;
        const double det = h11 * h22 - h21 * h21;
        const double dA = -(h22 * g1 - h21 * g2) / det;
        const double dB = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * dA + g2 * dB;
        double step = 1.0;
        bool moved = false;
        while (step >= opt.min_step) {
            const double nA = p.A + step * dA, nB = p.B + step * dB;
            const double nv = objective(nA, nB);
            if (nv < fval + 1e-4 * step * gd) {
                p.A = nA;
                p.B = nB;
                fval = nv;
                moved = true;
                break;
            }
            step /= 2.0;
        }
        if (!moved) {
            // No further decrease is representable; accept if the gradient is already at rounding level.
            if (std::max(std::abs(g1), std::abs(g2)) <= 1e-6 * fscale) return p;
            throw NumericalError("sigmoid fit line search failed");
        }
    }
    throw NumericalError("sigmoid fit did not converge in 100 iterations");
}

} // namespace poolbid
