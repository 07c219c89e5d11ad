#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "poolbid/opf.hpp"
#include "test_support.hpp"

using namespace poolbid;

namespace {

NetworkCase single_bus() { return parse_case(fixtures::ring_text(1, false, 1)); }

BidSet block_bids(std::vector<std::vector<double>> prices, std::vector<std::vector<double>> caps) {
    BidSet b;
    b.form = BidForm::block;
    for (std::size_t g = 0; g < prices.size(); ++g)
        b.block.push_back({prices[g], caps[g], std::vector<double>(prices[g].size(), 0.0)});
    return b;
}

BidSet quad_bids(std::vector<QuadraticOffer> offers) {
    BidSet b;
    b.form = BidForm::quadratic;
    b.quadratic = std::move(offers);
    return b;
}

// Checks every KKT condition of the compact form and returns the duality gap.
void expect_kkt(const OpfSolution& s, const BidSet& bids, double tol = 1e-8) {
    // primal feasibility and complementary slackness
    EXPECT_LE(std::abs(s.row_slack[0]), tol * (1 + std::abs(s.row_rhs[0])));
    for (Eigen::Index r = 1; r < s.row_slack.size(); ++r) {
        EXPECT_GE(s.row_slack[r], -tol) << "row " << r;
        EXPECT_GE(s.row_dual[r], -1e-9) << "row " << r;
        EXPECT_LE(std::abs(s.row_slack[r] * s.row_dual[r]), tol) << "row " << r;
    }
    // stationarity: c + H P + G' Lambda = 0
    Vec grad(s.dispatch.size());
    std::size_t nb = bids.blocks_per_generator();
    for (std::size_t g = 0; g < bids.num_generators(); ++g)
        for (std::size_t b = 0; b < nb; ++b) {
            auto k = static_cast<Eigen::Index>(g * nb + b);
            grad[k] = bids.form == BidForm::block ? bids.block[g].price[b]
                                                  : bids.quadratic[g].a * s.dispatch[k] + bids.quadratic[g].b;
        }
    Vec stat = grad + s.G.transpose() * s.row_dual;
    EXPECT_LE(stat.cwiseAbs().maxCoeff(), tol * (1 + grad.cwiseAbs().maxCoeff()));
    EXPECT_LE(std::abs(s.objective - s.dual_objective), tol * (1 + std::abs(s.objective)));
}

} // namespace

TEST(BlockOpf, MeritOrderSetsPrice) {
    auto c = single_bus();
    auto p = compute_ptdf(c);
    auto s = solve_block_opf(c, p, block_bids({{10, 20}}, {{50, 50}}), LoadVector{{70}});
    EXPECT_NEAR(s.dispatch[0], 50, 1e-9);
    EXPECT_NEAR(s.dispatch[1], 20, 1e-9);
    EXPECT_NEAR(s.lambda, 20, 1e-9);
    EXPECT_NEAR(s.lmp[0], 20, 1e-9);
}

TEST(BlockOpf, ZeroLoad) {
    auto c = single_bus();
    auto s = solve_block_opf(c, compute_ptdf(c), block_bids({{10, 20}}, {{50, 50}}), LoadVector{{0}});
    EXPECT_TRUE(s.dispatch.isZero(1e-12));
    EXPECT_NEAR(s.objective, 0.0, 1e-12);
}

TEST(BlockOpf, LoadAboveCapacityIsInfeasible) {
    auto c = single_bus();
    try {
        solve_block_opf(c, compute_ptdf(c), block_bids({{10, 20}}, {{50, 50}}), LoadVector{{200}});
        FAIL();
    } catch (const InfeasibleError& e) {
        EXPECT_NE(std::string(e.what()).find("infeasible"), std::string::npos);
    }
}

TEST(BlockOpf, UncongestedPriceMatchesMeritOrderOracle) {
    auto c = single_bus();
    auto p = compute_ptdf(c);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 200; ++t) {
        std::size_t nb = 1 + static_cast<std::size_t>(u(rng) * 5);
        std::vector<double> price(nb), cap(nb);
        double acc = 0;
        for (auto& v : price) v = (acc += 1 + 10 * u(rng));
        double total = 0;
        for (auto& v : cap) total += (v = 5 + 50 * u(rng));
        double load = total * u(rng);
        auto s = solve_block_opf(c, p, block_bids({price}, {cap}), LoadVector{{load}});
        // oracle: walk the merit order
        double left = load, marginal = price[0];
        for (std::size_t b = 0; b < nb && left > 0; ++b) {
            marginal = price[b];
            left -= cap[b];
        }
        if (s.degenerate) continue;  // load exactly on a block edge
        EXPECT_NEAR(s.lambda, marginal, 1e-8) << "trial " << t;
    }
}

TEST(QuadraticOpf, CongestedTwoBus) {
    auto c = fixtures::case2();
    auto p = compute_ptdf(c);
    auto bids = quad_bids({{0.1, 10, 200, 0}, {0.1, 30, 200, 0}});
    auto s = solve_quadratic_opf(c, p, bids, LoadVector{{0, 100}});
    EXPECT_NEAR(s.dispatch[0], 50, 1e-8);
    EXPECT_NEAR(s.dispatch[1], 50, 1e-8);
    EXPECT_NEAR(s.lmp[0], 15, 1e-8);
    EXPECT_NEAR(s.lmp[1], 35, 1e-8);
    EXPECT_NEAR(s.lambda, 35, 1e-8);
    EXPECT_NEAR(s.mu_plus[0], 20, 1e-8);
    EXPECT_NEAR(s.mu_minus[0], 0, 1e-12);
    expect_kkt(s, bids);
}

TEST(QuadraticOpf, UncongestedTwoBus) {
    auto c = fixtures::case2();
    c.branches[0].f_plus = c.branches[0].f_minus = 200;
    auto bids = quad_bids({{0.1, 10, 200, 0}, {0.1, 30, 200, 0}});
    auto s = solve_quadratic_opf(c, compute_ptdf(c), bids, LoadVector{{0, 100}});
    EXPECT_NEAR(s.dispatch[0], 100, 1e-8);
    EXPECT_NEAR(s.dispatch[1], 0, 1e-8);
    EXPECT_NEAR(s.lmp[0], 20, 1e-8);
    EXPECT_NEAR(s.lmp[1], 20, 1e-8);
    expect_kkt(s, bids);
}

TEST(QuadraticOpf, SingleBusInterior) {
    auto c = single_bus();
    auto s = solve_quadratic_opf(c, compute_ptdf(c), quad_bids({{0.1, 10, 200, 0}}), LoadVector{{40}});
    EXPECT_NEAR(s.dispatch[0], 40, 1e-9);
    EXPECT_NEAR(s.lmp[0], 14, 1e-9);
}

TEST(Lmps, UncongestedLosslessIsFlat) {
    PtdfMatrix p{Mat::Random(3, 4)};
    Vec pi = compute_lmps(27.5, Vec::Zero(3), Vec::Zero(3), p);
    EXPECT_TRUE((pi.array() == 27.5).all());
}

TEST(Lmps, LossyUncongested) {
    auto c = fixtures::case2();
    LossModel loss = LossModel::uniform(c, 0.0);
    loss.loss_sensitivity = {0.02, 0.0};
    Vec pi = compute_lmps(20, Vec::Zero(1), Vec::Zero(1), compute_ptdf(c), loss);
    EXPECT_NEAR(pi[0], 19.6, 1e-12);
    EXPECT_NEAR(pi[1], 20.0, 1e-12);
}

TEST(Opf, RandomInstancesSatisfyKkt) {
    auto c = fixtures::case3();
    auto p = compute_ptdf(c);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 200; ++t) {
        auto form = t % 2 ? BidForm::block : BidForm::quadratic;
        auto bids = base_bids(c, form, 2);
        for (auto& o : bids.quadratic) o.b *= 0.5 + u(rng);
        for (auto& o : bids.block) {
            for (auto& v : o.price) v *= 0.7 + 0.6 * u(rng);
            std::sort(o.price.begin(), o.price.end());
        }
        LoadVector loads{{60 * u(rng), 100 * u(rng), 160 * u(rng)}};
        LossModel loss = t % 4 < 2 ? LossModel::lossless() : LossModel::uniform(c, 0.03 * u(rng));
        auto s = solve_opf(c, p, bids, loads, loss);
        expect_kkt(s, bids);
        // generator LMP equals its marginal offer plus capacity rent
        if (form == BidForm::quadratic) {
            auto gb = c.generator_buses();
            for (std::size_t g = 0; g < 3; ++g) {
                double mc = bids.quadratic[g].a * s.dispatch[static_cast<Eigen::Index>(g)] + bids.quadratic[g].b;
                EXPECT_NEAR(s.lmp[gb[g]], mc + s.sigma_upper[static_cast<Eigen::Index>(g)] - s.sigma_lower[static_cast<Eigen::Index>(g)], 1e-7);
            }
        }
    }
}

TEST(Opf, QuadraticMatchesFineBlockDiscretization) {
    auto c = fixtures::case3();
    auto p = compute_ptdf(c);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 20; ++t) {
        auto q = base_bids(c, BidForm::quadratic);
        for (auto& o : q.quadratic) o.b *= 0.5 + u(rng);
        LoadVector loads{{40 * u(rng), 80 * u(rng), 150 * u(rng)}};
        auto exact = solve_quadratic_opf(c, p, q, loads);
        BidSet blk;
        blk.form = BidForm::block;
        const int nb = 100;
        for (const auto& o : q.quadratic) {
            BlockOffer bo;
            double w = o.q_upper / nb;
            for (int b = 0; b < nb; ++b) {
                bo.price.push_back(o.a * (b + 0.5) * w + o.b);
                bo.q_upper.push_back(w);
                bo.q_lower.push_back(0);
            }
            blk.block.push_back(bo);
        }
        auto approx = solve_block_opf(c, p, blk, loads);
        EXPECT_LE(std::abs(approx.objective - exact.objective), 0.01 * std::abs(exact.objective)) << "trial " << t;
    }
}

TEST(Opf, LossyBindingSetIsDeterministic) {
    auto c = fixtures::case3();
    auto p = compute_ptdf(c);
    auto bids = base_bids(c, BidForm::quadratic);
    LoadVector loads{{30, 70, 140}};
    auto loss = LossModel::uniform(c, 0.02);
    auto a = solve_quadratic_opf(c, p, bids, loads, loss);
    auto b = solve_quadratic_opf(c, p, bids, loads, loss);
    EXPECT_EQ(a.binding_set, b.binding_set);
    EXPECT_EQ(opf_csv_row(1, a), opf_csv_row(1, b));
}

TEST(Opf, CsvRowShape) {
    auto c = fixtures::case2();
    auto bids = quad_bids({{0.1, 10, 200, 0}, {0.1, 30, 200, 0}});
    auto s = solve_quadratic_opf(c, compute_ptdf(c), bids, LoadVector{{0, 100}});
    auto header = io::split(opf_csv_header(2, 1, 2), ',');
    auto row = io::split(opf_csv_row(4, s), ',');
    EXPECT_EQ(header.size(), row.size());
    EXPECT_EQ(row.front(), "4");
    EXPECT_EQ(row.back(), "EQ|LINE+1");
}

TEST(Simplex, UnboundedEnteringColumnKeepsRatioTest) {
    auto c = fixtures::case3();
    BidSet b;
    b.form = BidForm::quadratic;
    b.quadratic = {{0.1, 11.9807, 150, 0}, {0.08, 30.4392, 150, 0}, {0.12, 18.266, 250, 0}};
    LoadVector L{{49.8694, 92.7143, 123.814}};
    CompactForm f = build_compact_form(c, compute_ptdf(c), b, L, LossModel::lossless());
    Vec h = f.rhs(L);
    auto lp = solve_lp(Vec::Zero(3), detail::split_compact(f, h).lc);
    Vec slack = h - f.G * lp.x;
    EXPECT_NEAR(slack[0], 0.0, 1e-9);
    EXPECT_GE(slack.tail(slack.size() - 1).minCoeff(), -1e-9);
    auto s = solve_quadratic_opf(c, compute_ptdf(c), b, L);
    EXPECT_GE(s.row_slack.minCoeff(), -1e-9);
}
