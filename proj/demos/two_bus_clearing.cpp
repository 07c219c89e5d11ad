// Clears the congested 2-bus market and prints dispatch, prices and the binding pattern.
#include <cstdio>

#include "poolbid/pattern_lab.hpp"

int main() {
    using namespace poolbid;
    auto c = load_case(std::string(POOLBID_CASE_DIR) + "/case2.m");
    BidSet bids;
    bids.form = BidForm::quadratic;
    bids.quadratic = {{0.1, 10, 200, 0}, {0.1, 30, 200, 0}};
    for (double load : {40.0, 100.0, 160.0}) {
        auto s = solve_opf(c, compute_ptdf(c), bids, LoadVector{{0, load}});
        std::printf("load %5.1f  P = (%6.2f, %6.2f)  pi = (%6.2f, %6.2f)  mu+ = %5.2f  %s\n", load, s.dispatch[0], s.dispatch[1],
                    s.lmp[0], s.lmp[1], s.mu_plus[0], extract_pattern(s).c_str());
    }
}
