// Pairwise probabilities -> coupled class posterior and its feature gradient for a hand-built 3-class model.
#include <cstdio>

#include "poolbid/prob_gradient.hpp"

int main() {
    using namespace poolbid;
    OvoClassifier clf;
    clf.K = 3;
    clf.patterns = {"A", "B", "C"};
    clf.scaler.lo = {0, 0};
    clf.scaler.hi = {10, 10};
    const double w[3][2] = {{1.5, 0.0}, {0.0, 1.5}, {-1.0, 1.0}};
    int k = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j, ++k) {
            PairModel pm;
            pm.svm.class_i = i;
            pm.svm.class_j = j;
            pm.svm.w = Eigen::Vector2d(w[k][0], w[k][1]);
            pm.svm.rho = 0.5;
            pm.platt = {-2.0, 0.0};
            clf.pairs.push_back(pm);
        }
    for (double x0 : {2.0, 5.0, 8.0}) {
        std::vector<double> x{x0, 4.0};
        auto prob = predict_proba(clf, x);
        auto g = grad_probabilities(prob, clf, x);
        std::printf("x = (%.1f, %.1f)  p = (%.4f, %.4f, %.4f)  dp/dx0 = (%+.4f, %+.4f, %+.4f)\n", x[0], x[1], prob.p[0], prob.p[1],
                    prob.p[2], g.grad_p(0, 0), g.grad_p(1, 0), g.grad_p(2, 0));
    }
}
