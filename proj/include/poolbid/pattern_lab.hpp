#pragma once

// System-pattern labels, frequency ranking, per-pattern affine price/dispatch maps.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "poolbid/error.hpp"
#include "poolbid/opf.hpp"
#include "poolbid/scenario.hpp"

namespace poolbid {

/// Fingerprint of the rows binding at `tol` (relative primal slack). Pure function of its inputs.
inline std::string extract_pattern(const OpfSolution& s, double tol = kBindingTol) {
    return fingerprint_of(s.row_tags, binding_rows(s.row_slack, s.row_rhs, tol));
}

struct SystemPattern {
    std::string fingerprint;
    int k = -1;           // rank by descending frequency (0-based)
    int count = 0;
    int first_seen = 0;   // position of the first occurrence
    bool retained = false;
};

struct PatternRanking {
    std::vector<SystemPattern> patterns;      // sorted by rank
    std::map<std::string, int> index_of;      // fingerprint -> k

    /// Retained pattern index of a fingerprint, or -1 (filtered / unseen).
    int label_of(const std::string& fp) const {
        auto it = index_of.find(fp);
        if (it == index_of.end()) return -1;
        return patterns[static_cast<std::size_t>(it->second)].retained ? it->second : -1;
    }
    int retained_count() const {
        int n = 0;
        for (const auto& p : patterns) n += p.retained ? 1 : 0;
        return n;
    }
};

/// Sorts patterns by descending count, ties by first occurrence; the first top_k are retained.
/// `eligible` (optional) vetoes retention, e.g. for patterns too rare to fit.
inline PatternRanking rank_patterns(const std::vector<std::string>& labels, int top_k,
                                    const std::function<bool(const SystemPattern&)>& eligible = {}) {
    if (top_k < 1) throw ValidationError("top_k must be at least 1");
    if (labels.empty()) throw ValidationError("no pattern labels to rank");
    std::unordered_map<std::string, std::size_t> pos;
    std::vector<SystemPattern> pats;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        auto [it, inserted] = pos.try_emplace(labels[t], pats.size());
        if (inserted) pats.push_back({labels[t], -1, 0, static_cast<int>(t), false});
        ++pats[it->second].count;
    }
    std::stable_sort(pats.begin(), pats.end(), [](const SystemPattern& a, const SystemPattern& b) {
        return a.count != b.count ? a.count > b.count : a.first_seen < b.first_seen;
    });
    PatternRanking r;
    int kept = 0;
    for (std::size_t k = 0; k < pats.size(); ++k) {
        pats[k].k = static_cast<int>(k);
        if (kept < top_k && (!eligible || eligible(pats[k]))) {
            pats[k].retained = true;
            ++kept;
        }
        r.index_of[pats[k].fingerprint] = static_cast<int>(k);
    }
    r.patterns = std::move(pats);
    return r;
}

// ---------------------------------------------------------------------------
// Affine maps

class InsufficientSamplesError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

/// y = coef * X + intercept
struct AffineMap {
    Mat coef;
    Vec intercept;

    Vec operator()(const Vec& x) const { return coef * x + intercept; }
};

struct FitDiagnostics {
    int samples = 0;
    double max_residual = 0.0;          // absolute
    double max_relative_residual = 0.0; // |residual| / (1 + max |y|) per output
    bool ridge_applied = false;
};

/// Fitted maps of one pattern: prices pi = phi(X), dispatch q = psi(X).
struct PatternModel {
    int k = -1;
    AffineMap price;
    AffineMap dispatch;
    FitDiagnostics price_fit;
    FitDiagnostics dispatch_fit;
};

struct MarketSample {
    Vec features;   // [x; L] at the chosen information level
    Vec price;      // pi, one per bus
    Vec dispatch;   // q, dispatch vector
};

inline int minimum_fit_samples(Eigen::Index feature_dim) { return static_cast<int>(feature_dim) + 5; }

/// Least squares of Y on [X, 1] through column-standardized normal equations; a 1e-8 ridge is
/// added when the normal matrix is singular.
inline AffineMap fit_affine(const Mat& X, const Mat& Y, FitDiagnostics& diag) {
    const Eigen::Index t = X.rows(), d = X.cols();
    Vec mean = X.colwise().mean().transpose();
    Mat Xc = X.rowwise() - mean.transpose();
    Vec scale(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        double s = Xc.col(j).norm() / std::sqrt(static_cast<double>(t));
        scale[j] = s > 0 ? s : 1.0;
    }
    Mat Z = Xc * scale.cwiseInverse().asDiagonal();
    Vec ymean = Y.colwise().mean().transpose();
    Mat Yc = Y.rowwise() - ymean.transpose();
    Mat normal = Z.transpose() * Z / static_cast<double>(t);
    Mat rhs = Z.transpose() * Yc / static_cast<double>(t);

    Mat beta;
    Eigen::LDLT<Mat> ldlt(normal);
    Vec dd = ldlt.vectorD().cwiseAbs();
    bool singular = ldlt.info() != Eigen::Success || (d > 0 && dd.minCoeff() <= 1e-12 * std::max(1.0, dd.maxCoeff()));
    if (singular) {
        diag.ridge_applied = true;
        Mat reg = normal + 1e-8 * Mat::Identity(d, d);
        beta = reg.ldlt().solve(rhs);
    } else {
        beta = ldlt.solve(rhs);
    }
    AffineMap m;
    m.coef = (scale.cwiseInverse().asDiagonal() * beta).transpose();
    m.intercept = ymean - m.coef * mean;

    Mat resid = (X * m.coef.transpose()).rowwise() + m.intercept.transpose();
    resid -= Y;
    diag.samples = static_cast<int>(t);
    diag.max_residual = resid.size() ? resid.cwiseAbs().maxCoeff() : 0.0;
    diag.max_relative_residual = 0.0;
    for (Eigen::Index o = 0; o < Y.cols(); ++o) {
        double denom = 1.0 + Y.col(o).cwiseAbs().maxCoeff();
        diag.max_relative_residual = std::max(diag.max_relative_residual, resid.col(o).cwiseAbs().maxCoeff() / denom);
    }
    return m;
}

/// Fits phi and psi for one pattern. Throws InsufficientSamplesError below dim + 5 samples.
inline PatternModel fit_parametric_model(int k, const std::vector<MarketSample>& samples) {
    if (samples.empty()) throw InsufficientSamplesError("insufficient samples");
    const Eigen::Index d = samples.front().features.size();
    if (static_cast<int>(samples.size()) < minimum_fit_samples(d))
        throw InsufficientSamplesError("insufficient samples: " + std::to_string(samples.size()) + " < " +
                                       std::to_string(minimum_fit_samples(d)));
    const Eigen::Index t = static_cast<Eigen::Index>(samples.size());
    Mat X(t, d), P(t, samples.front().price.size()), Q(t, samples.front().dispatch.size());
    for (Eigen::Index r = 0; r < t; ++r) {
        const auto& s = samples[static_cast<std::size_t>(r)];
        X.row(r) = s.features.transpose();
        P.row(r) = s.price.transpose();
        Q.row(r) = s.dispatch.transpose();
    }
    PatternModel m;
    m.k = k;
    m.price = fit_affine(X, P, m.price_fit);
    m.dispatch = fit_affine(X, Q, m.dispatch_fit);
    return m;
}

/// Pattern index -> fitted maps, plus the layout the maps consume.
struct ParametricModel {
    std::map<int, PatternModel> patterns;
    int num_decision_features = 0;  // leading x block of the feature vector

    bool has(int k) const { return patterns.count(k) > 0; }
    const PatternModel& at(int k) const {
        auto it = patterns.find(k);
        if (it == patterns.end()) throw ValidationError("unknown pattern index " + std::to_string(k));
        return it->second;
    }
};

struct MarketPrediction {
    Vec price;
    Vec dispatch;
};

inline MarketPrediction predict_market_outcome(const ParametricModel& model, int k, const Vec& features) {
    const auto& m = model.at(k);
    if (features.size() != m.price.coef.cols()) throw ValidationError("feature dimension mismatch");
    return {m.price(features), m.dispatch(features)};
}

// ---------------------------------------------------------------------------
// Empirical verification of the affine structure

struct AffineCheck {
    std::string fingerprint;
    int samples = 0;            // non-degenerate samples in the pattern
    bool fitted = false;        // enough samples to fit
    double price_residual = 0.0;
    double dispatch_residual = 0.0;
    bool passed = false;
};

struct AffineReport {
    std::vector<AffineCheck> patterns;   // ordered by frequency
    int total_samples = 0;
    int degenerate_samples = 0;
    int licq_violations = 0;             // non-degenerate samples whose binding rows are rank deficient
    double tolerance = 1e-6;

    bool all_passed() const {
        bool any = false;
        for (const auto& p : patterns) {
            if (!p.fitted) continue;
            any = true;
            if (!p.passed) return false;
        }
        return any;
    }
};

using ScenarioSampler = std::function<std::pair<BidSet, LoadVector>(std::mt19937_64&)>;

/// Solves n sampled markets, groups them by pattern and regresses (pi, q) on the full feature vector.
inline AffineReport verify_affine(const NetworkCase& c, const PtdfMatrix& ptdf, const ScenarioSampler& sampler,
                                  int n_samples, std::uint64_t seed, const LossModel& loss = LossModel::lossless(),
                                  double tolerance = 1e-6) {
    std::mt19937_64 rng(seed);
    std::map<std::string, std::vector<MarketSample>> groups;
    std::vector<std::string> order;
    AffineReport rep;
    rep.tolerance = tolerance;
    FeatureSpec spec = FeatureSpec::make(c, InfoLevel::II, {});
    std::vector<std::string> labels;
    for (int t = 0; t < n_samples; ++t) {
        auto [bids, loads] = sampler(rng);
        OpfSolution s = solve_opf(c, ptdf, bids, loads, loss);
        ++rep.total_samples;
        std::string fp = extract_pattern(s);
        labels.push_back(fp);
        if (s.degenerate) {
            ++rep.degenerate_samples;
            continue;
        }
        Mat gb(static_cast<Eigen::Index>(s.binding_set.size()), s.G.cols());
        for (std::size_t k = 0; k < s.binding_set.size(); ++k) gb.row(static_cast<Eigen::Index>(k)) = s.G.row(s.binding_set[k]);
        Eigen::FullPivLU<Mat> lu(gb);
        lu.setThreshold(1e-9);
        if (lu.rank() < gb.rows()) ++rep.licq_violations;
        auto f = build_feature_vector(spec, bids, loads);
        groups[fp].push_back({Eigen::Map<Vec>(f.data(), static_cast<Eigen::Index>(f.size())), s.lmp, s.dispatch});
    }
    auto ranking = rank_patterns(labels, static_cast<int>(labels.size()));
    for (const auto& p : ranking.patterns) {
        AffineCheck chk;
        chk.fingerprint = p.fingerprint;
        auto it = groups.find(p.fingerprint);
        chk.samples = it == groups.end() ? 0 : static_cast<int>(it->second.size());
        if (it != groups.end() && chk.samples >= minimum_fit_samples(it->second.front().features.size())) {
            auto m = fit_parametric_model(p.k, it->second);
            chk.fitted = true;
            chk.price_residual = m.price_fit.max_relative_residual;
            chk.dispatch_residual = m.dispatch_fit.max_relative_residual;
            chk.passed = chk.price_residual <= tolerance && chk.dispatch_residual <= tolerance;
        }
        rep.patterns.push_back(chk);
    }
    return rep;
}

} // namespace poolbid
