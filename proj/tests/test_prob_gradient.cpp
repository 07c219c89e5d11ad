#include <gtest/gtest.h>

#include <random>

#include "poolbid/prob_gradient.hpp"
#include "test_support.hpp"

using namespace poolbid;

namespace {

/// Random classifier over the unit box (identity scaler) with sigmoid slopes of either sign.
OvoClassifier random_classifier(int K, int d, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    OvoClassifier clf;
    clf.K = K;
    for (int k = 0; k < K; ++k) clf.patterns.push_back("P" + std::to_string(k));
    clf.scaler.lo.assign(static_cast<std::size_t>(d), 0.0);
    clf.scaler.hi.assign(static_cast<std::size_t>(d), 1.0);
    for (int i = 0; i < K; ++i)
        for (int j = i + 1; j < K; ++j) {
            PairModel pm;
            pm.svm.class_i = i;
            pm.svm.class_j = j;
            pm.svm.w = Eigen::VectorXd::NullaryExpr(d, [&] { return g(rng); });
            pm.svm.rho = 0.3 * g(rng);
            pm.platt = {1.0 + 0.5 * g(rng), 0.2 * g(rng)};
            clf.pairs.push_back(pm);
        }
    return clf;
}

OvoClassifier hand_pair() {
    OvoClassifier clf;
    clf.K = 2;
    clf.patterns = {"A", "B"};
    clf.scaler.lo = {0, 0};
    clf.scaler.hi = {1, 1};
    PairModel pm;
    pm.svm.w = Eigen::Vector2d(1, 0);
    pm.svm.rho = 0;
    pm.svm.class_i = 0;
    pm.svm.class_j = 1;
    pm.platt = {-1, 0};
    clf.pairs.push_back(pm);
    return clf;
}

} // namespace

TEST(BuildDk, HandExample) {
    auto clf = hand_pair();
    Eigen::MatrixXd r(2, 2);
    r << 0, 0.5, 0.5, 0;
    auto D = build_Dk(r, clf, 0);
    EXPECT_DOUBLE_EQ(D(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(D(0, 0), -0.25);
    EXPECT_TRUE(build_Dk(r, clf, 1).isZero(0.0));
}

TEST(BuildDk, OffDiagonalSymmetric) {
    std::mt19937_64 rng(4);
    auto clf = random_classifier(5, 3, rng);
    auto r = fixtures::random_pairwise(5, rng);
    for (int m = 0; m < 3; ++m) {
        auto D = build_Dk(r, clf, m);
        EXPECT_LE((D - D.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(BuildDk, MatchesFiniteDifferenceOfQ) {
    std::mt19937_64 rng(5);
    auto clf = random_classifier(4, 3, rng);
    std::vector<double> x{0.3, 0.6, 0.4};
    auto at = [&](std::vector<double> v) { return coupling_matrix(pairwise_probabilities(clf, scale_features(clf, v))); };
    auto r = pairwise_probabilities(clf, scale_features(clf, x));
    for (int m = 0; m < 3; ++m) {
        auto xp = x, xm = x;
        xp[static_cast<std::size_t>(m)] += 1e-6;
        xm[static_cast<std::size_t>(m)] -= 1e-6;
        Eigen::MatrixXd fd = (at(xp) - at(xm)) / 2e-6;
        EXPECT_LE((fd - build_Dk(r, clf, m)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(GradProbabilities, TwoClassHandExample) {
    auto clf = hand_pair();
    std::vector<double> x{0.0, 0.7};
    auto prob = predict_proba(clf, x);
    EXPECT_NEAR(prob.p[0], 0.5, 1e-15);
    auto g = grad_probabilities(prob, clf, x);
    EXPECT_NEAR(g.grad_p(0, 0), 0.25, 1e-12);
    EXPECT_NEAR(g.grad_p(1, 0), -0.25, 1e-12);
    EXPECT_EQ(g.grad_p(0, 1), 0.0);
}

TEST(GradProbabilities, ExplicitMatchesBorderedInverse) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 50; ++t) {
        int K = 3 + t % 5;
        auto Q = coupling_matrix(fixtures::random_pairwise(K, rng, 0.05));
        auto a = coupling_sensitivity(Q), b = coupling_sensitivity_explicit(Q);
        EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-7 * (1 + b.cwiseAbs().maxCoeff()));
    }
}

TEST(GradProbabilities, ColumnsSumToZeroAndMatchFiniteDifferences) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.2, 0.8);
    for (int t = 0; t < 20; ++t) {
        int K = 2 + t % 4;
        int d = 3;
        auto clf = random_classifier(K, d, rng);
        std::vector<double> x{u(rng), u(rng), u(rng)};
        auto prob = predict_proba(clf, x);
        auto g = grad_probabilities(prob, clf, x);
        for (int m = 0; m < d; ++m) {
            EXPECT_LE(std::abs(g.grad_p.col(m).sum()), 1e-10);
            auto xp = x, xm = x;
            xp[static_cast<std::size_t>(m)] += 1e-5;
            xm[static_cast<std::size_t>(m)] -= 1e-5;
            Eigen::VectorXd fd = (predict_proba(clf, xp).p - predict_proba(clf, xm).p) / 2e-5;
            double scale = std::max(fd.cwiseAbs().maxCoeff(), 1e-3);
            EXPECT_LE((fd - g.grad_p.col(m)).cwiseAbs().maxCoeff() / scale, 1e-4) << "K=" << K << " m=" << m;
        }
    }
}

TEST(GradProbabilities, RawUnitsFollowScaler) {
    auto clf = hand_pair();
    clf.scaler.lo = {10, 0};
    clf.scaler.hi = {14, 1};
    std::vector<double> x{10, 0.5};
    auto g = grad_probabilities(predict_proba(clf, x), clf, x);
    EXPECT_NEAR(g.grad_p(0, 0), 0.25 / 4.0, 1e-12);
    EXPECT_NEAR(g.grad_p_scaled(0, 0), 0.25, 1e-12);
}

TEST(GradProbabilities, ZeroWeightFeatureHasZeroColumn) {
    std::mt19937_64 rng(8);
    auto clf = random_classifier(4, 3, rng);
    for (auto& pm : clf.pairs) pm.svm.w[1] = 0.0;
    std::vector<double> x{0.4, 0.5, 0.6};
    auto g = grad_probabilities(predict_proba(clf, x), clf, x);
    EXPECT_TRUE(g.grad_p.col(1).isZero(0.0));
}
