#include <gtest/gtest.h>

#include <cmath>

#include "poolbid/scenario.hpp"
#include "test_support.hpp"

using namespace poolbid;

TEST(Scenarios, ZeroNoiseReproducesBase) {
    auto c = fixtures::case3();
    auto base = base_bids(c, BidForm::block, 2);
    ScenarioOptions opt;
    opt.n = 5;
    opt.sigma_rel = 0;
    opt.load_sigma_rel = 0;
    opt.profile = {1.0};
    for (const auto& s : generate_scenarios(base, base_loads(c), opt)) {
        for (std::size_t g = 0; g < 3; ++g) {
            EXPECT_EQ(s.bids.block[g].price, base.block[g].price);
            EXPECT_EQ(s.bids.block[g].q_upper, base.block[g].q_upper);
        }
        EXPECT_EQ(s.loads.L, c.base_load);
    }
}

TEST(Scenarios, RelativeDeviationMatchesSigma) {
    auto c = fixtures::case3();
    for (auto form : {BidForm::quadratic, BidForm::block}) {
        auto base = base_bids(c, form, 2);
        ScenarioOptions opt;
        opt.n = 8760;
        opt.sigma_rel = 0.1;
        opt.seed = 99;
        auto sc = generate_scenarios(base, base_loads(c), opt);
        double s1 = 0, s2 = 0;
        for (const auto& s : sc) {
            double r = form == BidForm::quadratic ? s.bids.quadratic[0].b / base.quadratic[0].b
                                                  : s.bids.block[0].q_upper[0] / base.block[0].q_upper[0];
            s1 += r;
            s2 += r * r;
        }
        double n = static_cast<double>(sc.size());
        double sd = std::sqrt(s2 / n - (s1 / n) * (s1 / n));
        EXPECT_NEAR(sd, 0.1, 0.005);
    }
}

TEST(Scenarios, BlockPricesStayMonotone) {
    auto c = fixtures::case3();
    ScenarioOptions opt;
    opt.n = 500;
    opt.sigma_rel = 0.5;
    for (const auto& s : generate_scenarios(base_bids(c, BidForm::block, 3), base_loads(c), opt)) {
        EXPECT_NO_THROW(validate_bids(c, s.bids));
        for (const auto& o : s.bids.block)
            for (double v : o.price) EXPECT_GT(v, 0.0);
    }
}

TEST(Scenarios, FixedSeedIsDeterministic) {
    auto c = fixtures::case3();
    ScenarioOptions opt;
    opt.n = 50;
    opt.seed = 1234;
    auto a = generate_scenarios(base_bids(c, BidForm::quadratic), base_loads(c), opt);
    auto b = generate_scenarios(base_bids(c, BidForm::quadratic), base_loads(c), opt);
    for (std::size_t t = 0; t < a.size(); ++t) {
        EXPECT_EQ(a[t].loads.L, b[t].loads.L);
        EXPECT_EQ(a[t].bids.quadratic[2].b, b[t].bids.quadratic[2].b);
    }
}

TEST(Features, LevelThreeLayout) {
    auto c = fixtures::case3();
    auto bids = base_bids(c, BidForm::block, 2);
    LoadVector L{{1, 2, 3}};
    auto spec = FeatureSpec::make(c, InfoLevel::III, {0});
    auto f = build_feature_vector(spec, bids, L);
    const auto& o = bids.block[0];
    std::vector<double> want{o.price[0], o.price[1], o.q_upper[0], o.q_upper[1], 1, 2, 3};
    EXPECT_EQ(f, want);
    auto names = feature_names(spec, c, bids);
    EXPECT_EQ(names.front(), "c[1:1]");
    EXPECT_EQ(names[3], "qu[1:2]");
    EXPECT_EQ(names.back(), "L[3]");
    EXPECT_EQ(decision_positions(spec, bids), (std::vector<int>{0, 1, 2, 3}));
}

TEST(Features, LevelFourSingleZoneIsTotalLoad) {
    auto c = fixtures::case3();
    for (auto& [bus, z] : c.zone_of) z = 1;
    auto bids = base_bids(c, BidForm::quadratic);
    auto f = build_feature_vector(FeatureSpec::make(c, InfoLevel::IV, {1}), bids, LoadVector{{10, 20, 30}});
    ASSERT_EQ(f.size(), 2u);
    EXPECT_EQ(f[0], bids.quadratic[1].b);
    EXPECT_EQ(f[1], 60.0);
}

TEST(Features, LevelFourNeedsZones) {
    auto c = fixtures::case3();
    FeatureSpec spec;
    spec.level = InfoLevel::IV;
    spec.genco = {0};
    EXPECT_THROW(build_feature_vector(spec, base_bids(c, BidForm::quadratic), LoadVector{{1, 2, 3}}), ValidationError);
}

TEST(Features, LevelTwoContainsLevelThree) {
    auto c = fixtures::case3();
    auto bids = base_bids(c, BidForm::block, 2);
    LoadVector L{{5, 6, 7}};
    auto f2 = build_feature_vector(FeatureSpec::make(c, InfoLevel::II, {1}), bids, L);
    auto f3 = build_feature_vector(FeatureSpec::make(c, InfoLevel::III, {1}), bids, L);
    for (double v : f3) EXPECT_NE(std::find(f2.begin(), f2.end(), v), f2.end());
    EXPECT_EQ(f2.size(), 3 * 4 + 3u);
}

TEST(Features, DecisionRoundTrip) {
    auto c = fixtures::case3();
    auto bids = base_bids(c, BidForm::block, 2);
    std::vector<double> x{1, 2, 30, 40};
    apply_decision(bids, {2}, x);
    EXPECT_EQ(extract_decision(bids, {2}), x);
    EXPECT_THROW(apply_decision(bids, {2}, {1.0}), ValidationError);
}

TEST(Scaler, Definition) {
    auto s = fit_minmax({{0, 7}, {5, 7}, {10, 7}});
    EXPECT_EQ(s.apply({0, 7}), (std::vector<double>{0, 0.5}));
    EXPECT_EQ(s.apply({5, 7}), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(s.apply({10, 7}), (std::vector<double>{1, 0.5}));
    EXPECT_DOUBLE_EQ(s.apply({12, 3})[0], 1.2);
    EXPECT_EQ(s.jacobian(1), 0.0);
    EXPECT_THROW(fit_minmax({}), ValidationError);
}

TEST(Split, EightyTwentyFiveFolds) {
    auto s = split_dataset(100, 0.8, 5, 3);
    int test = 0;
    std::vector<int> sizes(5, 0);
    for (int f : s.fold) {
        if (f < 0) ++test;
        else ++sizes[static_cast<std::size_t>(f)];
    }
    EXPECT_EQ(test, 20);
    EXPECT_EQ(sizes, std::vector<int>(5, 16));
}

TEST(Split, UnevenFoldsDifferByAtMostOne) {
    auto s = split_dataset(97, 0.8, 5, 3);
    std::vector<int> sizes(5, 0);
    for (int f : s.fold)
        if (f >= 0) ++sizes[static_cast<std::size_t>(f)];
    EXPECT_LE(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()), 1);
}

TEST(Split, DeterministicAndValidated) {
    EXPECT_EQ(split_dataset(50, 0.8, 5, 8).fold, split_dataset(50, 0.8, 5, 8).fold);
    EXPECT_NE(split_dataset(50, 0.8, 5, 8).fold, split_dataset(50, 0.8, 5, 9).fold);
    EXPECT_THROW(split_dataset(3, 0.8, 5, 1), ValidationError);
    EXPECT_THROW(split_dataset(30, 1.0, 5, 1), ValidationError);
}
