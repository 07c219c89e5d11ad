#pragma once

// One-vs-one linear SVM ensemble with Platt calibration and pairwise coupling.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "poolbid/coupling.hpp"
#include "poolbid/error.hpp"
#include "poolbid/scenario.hpp"
#include "poolbid/svm.hpp"

namespace poolbid {

inline std::vector<double> default_c_grid() { return {0.1, 1, 10, 100, 1e3, 1e4}; }

/// Pair (i, j), i < j. The SVM labels class i as -1; the sigmoid's positive event is class i, so r(i, j) = P(i | i or j).
struct PairModel {
    BinarySvm svm;
    PlattParams platt;
};

struct CvScore {
    double C = 0.0;
    double mean_accuracy = 0.0;
    std::vector<double> fold_accuracy;
};

struct OvoClassifier {
    int K = 0;
    std::vector<std::string> patterns;  // pattern fingerprint of class k
    std::vector<PairModel> pairs;       // (0,1), (0,2), ..., (K-2,K-1)
    MinMaxScaler scaler;
    std::vector<std::string> feature_names;
    std::vector<double> class_prior;    // training frequency of each class
    double C = 0.0;
    std::vector<CvScore> cv;

    std::size_t pair_index(int i, int j) const {
        // rows of the strict upper triangle, row-major
        const auto k = static_cast<std::size_t>(K);
        const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(j);
        return a * k - a * (a + 1) / 2 + (b - a - 1);
    }
    const PairModel& pair(int i, int j) const { return pairs.at(pair_index(i, j)); }
    std::size_t dim() const { return scaler.dim(); }
};

struct OvoOptions {
    std::vector<double> c_grid = default_c_grid();
    SvmOptions svm;
    PlattOptions platt;
};

struct LabeledSet {
    Eigen::MatrixXd X;        // raw features, one row per sample
    std::vector<int> label;   // class index in [0, K)
    std::vector<int> fold;    // CV fold of each row
};

namespace detail {

inline std::vector<PairModel> train_pairs(const Eigen::MatrixXd& Xs, const std::vector<int>& label,
                                          const std::vector<char>& use, int K, double C, const SvmOptions& opt) {
    std::vector<PairModel> out;
    for (int i = 0; i < K; ++i)
        for (int j = i + 1; j < K; ++j) {
            std::vector<Eigen::Index> rows;
            std::vector<int> y;
            bool has_i = false, has_j = false;
            for (std::size_t t = 0; t < label.size(); ++t) {
                if (!use[t] || (label[t] != i && label[t] != j)) continue;
                rows.push_back(static_cast<Eigen::Index>(t));
                y.push_back(label[t] == i ? -1 : 1);
                (label[t] == i ? has_i : has_j) = true;
            }
            PairModel pm;
            if (has_i && has_j) {
                Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), Xs.cols());
                for (std::size_t k = 0; k < rows.size(); ++k) sub.row(static_cast<Eigen::Index>(k)) = Xs.row(rows[k]);
                pm.svm = train_binary_svm(sub, y, C, opt);
            } else {
                // A fold without one of the classes: constant vote for the class that is present.
                pm.svm.w = Eigen::VectorXd::Zero(Xs.cols());
                pm.svm.rho = has_i ? 1.0 : -1.0;
                pm.svm.C = C;
                pm.svm.converged = true;
            }
            pm.svm.class_i = i;
            pm.svm.class_j = j;
            out.push_back(std::move(pm));
        }
    return out;
}

/// Majority vote over pairwise decision signs; ties go to the lower class index.
inline int vote(const std::vector<PairModel>& pairs, const Eigen::VectorXd& x, int K) {
    std::vector<int> votes(static_cast<std::size_t>(K), 0);
    for (const auto& pm : pairs) ++votes[static_cast<std::size_t>(pm.svm.decision(x) > 0.0 ? pm.svm.class_j : pm.svm.class_i)];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

inline Eigen::MatrixXd scale_rows(const MinMaxScaler& s, const Eigen::MatrixXd& X) {
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
        std::vector<double> row(static_cast<std::size_t>(X.cols()));
        for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(t, j);
        auto sc = s.apply(row);
        for (Eigen::Index j = 0; j < X.cols(); ++j) out(t, j) = sc[static_cast<std::size_t>(j)];
    }
    return out;
}

} // namespace detail

/// Picks one C for the whole ensemble by k-fold CV accuracy (majority vote), then fits the sigmoids on the
/// out-of-fold decision values of that C and retrains every pair on all rows.
inline OvoClassifier train_ovo(const LabeledSet& data, int K, std::vector<std::string> patterns,
                               std::vector<std::string> feature_names, const OvoOptions& opt = {}) {
    const auto n = static_cast<std::size_t>(data.X.rows());
    if (K < 2) throw ValidationError("fewer than 2 retained patterns");
    if (data.label.size() != n || data.fold.size() != n) throw ValidationError("label/fold count does not match rows");
    if (opt.c_grid.empty()) throw ValidationError("empty C grid");
    std::vector<int> counts(static_cast<std::size_t>(K), 0);
    for (int l : data.label) {
        if (l < 0 || l >= K) throw ValidationError("label outside the retained patterns");
        ++counts[static_cast<std::size_t>(l)];
    }
    for (int c : counts)
        if (c == 0) throw ValidationError("a retained pattern has no training rows");
    const int folds = data.fold.empty() ? 0 : *std::max_element(data.fold.begin(), data.fold.end()) + 1;
    if (folds < 2) throw ValidationError("need at least 2 folds");

    std::vector<std::vector<double>> raw(n);
    for (std::size_t t = 0; t < n; ++t)
        for (Eigen::Index j = 0; j < data.X.cols(); ++j) raw[t].push_back(data.X(static_cast<Eigen::Index>(t), j));

    OvoClassifier clf;
    clf.K = K;
    clf.patterns = std::move(patterns);
    clf.feature_names = std::move(feature_names);
    clf.scaler = fit_minmax(raw);
    for (int c : counts) clf.class_prior.push_back(static_cast<double>(c) / static_cast<double>(n));
    const Eigen::MatrixXd Xs = detail::scale_rows(clf.scaler, data.X);
    const std::size_t npairs = static_cast<std::size_t>(K * (K - 1) / 2);

    double best_acc = -1.0;
    std::vector<std::vector<double>> best_oof;  // [pair][row] out-of-fold decision values
    for (double C : opt.c_grid) {
        CvScore score;
        score.C = C;
        std::vector<std::vector<double>> oof(npairs, std::vector<double>(n, 0.0));
        for (int f = 0; f < folds; ++f) {
            std::vector<char> use(n);
            for (std::size_t t = 0; t < n; ++t) use[t] = data.fold[t] != f;
            auto pairs = detail::train_pairs(Xs, data.label, use, K, C, opt.svm);
            int hit = 0, total = 0;
            for (std::size_t t = 0; t < n; ++t) {
                if (use[t]) continue;
                const Eigen::VectorXd x = Xs.row(static_cast<Eigen::Index>(t)).transpose();
                for (std::size_t k = 0; k < npairs; ++k) oof[k][t] = pairs[k].svm.decision(x);
                hit += detail::vote(pairs, x, K) == data.label[t];
                ++total;
            }
            score.fold_accuracy.push_back(total ? static_cast<double>(hit) / total : 0.0);
        }
        double s = 0.0;
        for (double a : score.fold_accuracy) s += a;
        score.mean_accuracy = s / static_cast<double>(score.fold_accuracy.size());
        if (score.mean_accuracy > best_acc) {
            best_acc = score.mean_accuracy;
            clf.C = C;
            best_oof = std::move(oof);
        }
        clf.cv.push_back(std::move(score));
    }

    std::vector<char> all(n, 1);
    clf.pairs = detail::train_pairs(Xs, data.label, all, K, clf.C, opt.svm);
    for (std::size_t k = 0; k < npairs; ++k) {
        const int i = clf.pairs[k].svm.class_i, j = clf.pairs[k].svm.class_j;
        std::vector<double> f;
        std::vector<bool> positive;
        for (std::size_t t = 0; t < n; ++t) {
            if (data.label[t] != i && data.label[t] != j) continue;
            f.push_back(best_oof[k][t]);
            positive.push_back(data.label[t] == i);
        }
        clf.pairs[k].platt = fit_platt(f, positive, opt.platt);
    }
    return clf;
}

/// Pairwise matrix at a scaled feature point.
inline Eigen::MatrixXd pairwise_probabilities(const OvoClassifier& clf, const Eigen::VectorXd& xs) {
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(clf.K, clf.K);
    for (const auto& pm : clf.pairs) {
        const double v = pm.platt.probability(pm.svm.decision(xs));
        r(pm.svm.class_i, pm.svm.class_j) = v;
        r(pm.svm.class_j, pm.svm.class_i) = 1.0 - v;
    }
    return r;
}

inline Eigen::VectorXd scale_features(const OvoClassifier& clf, const std::vector<double>& raw) {
    if (raw.size() != clf.dim()) throw ValidationError("feature dimension mismatch");
    auto s = clf.scaler.apply(raw);
    return Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
}

/// Sigmoid outputs are kept strictly inside (0, 1) so the coupling system stays well posed.
inline ProbOutput predict_proba(const OvoClassifier& clf, const std::vector<double>& raw) {
    Eigen::MatrixXd r = pairwise_probabilities(clf, scale_features(clf, raw));
    for (Eigen::Index i = 0; i < r.rows(); ++i)
        for (Eigen::Index j = i + 1; j < r.cols(); ++j) {
            r(i, j) = std::clamp(r(i, j), 1e-12, 1.0 - 1e-12);
            r(j, i) = 1.0 - r(i, j);
        }
    return couple_probabilities(r);
}

inline std::vector<ProbOutput> predict_proba(const OvoClassifier& clf, const Eigen::MatrixXd& X) {
    std::vector<ProbOutput> out;
    out.reserve(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index t = 0; t < X.rows(); ++t) {
        std::vector<double> row(static_cast<std::size_t>(X.cols()));
        for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(t, j);
        out.push_back(predict_proba(clf, row));
    }
    return out;
}

inline int argmax(const Eigen::VectorXd& p) {
    Eigen::Index k = 0;
    p.maxCoeff(&k);
    return static_cast<int>(k);
}

struct ClassificationMetrics {
    double accuracy = 0.0;
    double dummy1 = 0.0;   // always the most frequent class
    double dummy2 = 0.0;   // random guess from the empirical distribution, in expectation
    Eigen::MatrixXd confusion;  // row i: sum of p over rows with true class i
    std::vector<int> class_counts;
    int rows = 0;
};

/// Dummy baselines use the empirical class distribution of the evaluated labels.
inline ClassificationMetrics dummy_metrics(const std::vector<int>& labels, int K) {
    if (labels.empty()) throw ValidationError("empty test set");
    ClassificationMetrics m;
    m.rows = static_cast<int>(labels.size());
    m.class_counts.assign(static_cast<std::size_t>(K), 0);
    for (int l : labels) {
        if (l < 0 || l >= K) throw ValidationError("test label outside the retained patterns");
        ++m.class_counts[static_cast<std::size_t>(l)];
    }
    for (int c : m.class_counts) {
        const double pk = static_cast<double>(c) / m.rows;
        m.dummy1 = std::max(m.dummy1, pk);
        m.dummy2 += pk * pk;
    }
    return m;
}

inline ClassificationMetrics evaluate(const std::vector<ProbOutput>& probs, const std::vector<int>& labels, int K) {
    if (probs.size() != labels.size()) throw ValidationError("prediction count does not match labels");
    ClassificationMetrics m = dummy_metrics(labels, K);
    m.confusion = Eigen::MatrixXd::Zero(K, K);
    int hit = 0;
    for (std::size_t t = 0; t < labels.size(); ++t) {
        m.confusion.row(labels[t]) += probs[t].p.transpose();
        hit += argmax(probs[t].p) == labels[t];
    }
    m.accuracy = static_cast<double>(hit) / m.rows;
    return m;
}

inline ClassificationMetrics evaluate(const OvoClassifier& clf, const Eigen::MatrixXd& X, const std::vector<int>& labels) {
    return evaluate(predict_proba(clf, X), labels, clf.K);
}

// ---------------------------------------------------------------------------
// JSON model file

inline nlohmann::json to_json(const OvoClassifier& c) {
    nlohmann::json j;
    j["K"] = c.K;
    j["patterns"] = c.patterns;
    j["C"] = c.C;
    j["class_prior"] = c.class_prior;
    j["feature_names"] = c.feature_names;
    j["scaler"] = {{"lo", c.scaler.lo}, {"hi", c.scaler.hi}};
    auto& cv = j["cv"] = nlohmann::json::array();
    for (const auto& s : c.cv) cv.push_back({{"C", s.C}, {"mean_accuracy", s.mean_accuracy}, {"fold_accuracy", s.fold_accuracy}});
    auto& pairs = j["pairs"] = nlohmann::json::array();
    for (const auto& pm : c.pairs) {
        pairs.push_back({{"i", pm.svm.class_i},
                         {"j", pm.svm.class_j},
                         {"w", std::vector<double>(pm.svm.w.data(), pm.svm.w.data() + pm.svm.w.size())},
                         {"rho", pm.svm.rho},
                         {"C", pm.svm.C},
                         {"epochs", pm.svm.epochs},
                         {"converged", pm.svm.converged},
                         {"A", pm.platt.A},
                         {"B", pm.platt.B}});
    }
    return j;
}

inline OvoClassifier classifier_from_json(const nlohmann::json& j) {
    try {
        OvoClassifier c;
        c.K = j.at("K").get<int>();
        c.patterns = j.at("patterns").get<std::vector<std::string>>();
        c.C = j.at("C").get<double>();
        c.class_prior = j.at("class_prior").get<std::vector<double>>();
        c.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        c.scaler.lo = j.at("scaler").at("lo").get<std::vector<double>>();
        c.scaler.hi = j.at("scaler").at("hi").get<std::vector<double>>();
        for (const auto& s : j.at("cv"))
            c.cv.push_back({s.at("C").get<double>(), s.at("mean_accuracy").get<double>(),
                            s.at("fold_accuracy").get<std::vector<double>>()});
        for (const auto& p : j.at("pairs")) {
            PairModel pm;
            pm.svm.class_i = p.at("i").get<int>();
            pm.svm.class_j = p.at("j").get<int>();
            auto w = p.at("w").get<std::vector<double>>();
            pm.svm.w = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
            pm.svm.rho = p.at("rho").get<double>();
            pm.svm.C = p.at("C").get<double>();
            pm.svm.epochs = p.at("epochs").get<int>();
            pm.svm.converged = p.at("converged").get<bool>();
            pm.platt.A = p.at("A").get<double>();
            pm.platt.B = p.at("B").get<double>();
            c.pairs.push_back(std::move(pm));
        }
        if (c.K < 1 || c.pairs.size() != static_cast<std::size_t>(c.K * (c.K - 1) / 2) ||
            c.patterns.size() != static_cast<std::size_t>(c.K))
            throw ValidationError("inconsistent pair count in model file");
        for (const auto& pm : c.pairs)
            if (static_cast<std::size_t>(pm.svm.w.size()) != c.scaler.dim()) throw ValidationError("weight dimension mismatch in model file");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model file: ") + e.what());
    }
}

} // namespace poolbid
