#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>

#include "poolbid/experiment.hpp"
#include "test_support.hpp"

using namespace poolbid;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::current_path() / "experiment_scratch" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

ExperimentConfig small_config(const fs::path& out) {
    ExperimentConfig cfg;
    cfg.case_path = fixtures::case_dir() + "/case3.m";
    cfg.n_scenarios = 400;
    cfg.n_intervals = 3;
    cfg.c_grid = {1, 100};
    cfg.max_iter = 40;
    cfg.levels = {InfoLevel::II, InfoLevel::III};
    cfg.strategies = {StrategyId::oracle, StrategyId::level_II, StrategyId::level_V};
    cfg.out_dir = out.string();
    return cfg;
}

std::size_t data_rows(const std::string& path) { return io::parse_csv(io::read_file(path)).rows.size(); }

int run_cli(const std::string& args) {
    int status = std::system((std::string(POOLBID_CLI) + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST(Config, ParsesKeysAndResolvesCasePath) {
    auto cfg = parse_config("# comment\ncase = case3.m\nform = block  # trailing\nblocks = 3\ngenco = 1, 2\n"
                            "levels = II\nstrategies = oracle, level_II, level_V\nc_grid = 1,10\n",
                            fixtures::case_dir());
    EXPECT_EQ(cfg.case_path, (fs::path(fixtures::case_dir()) / "case3.m").lexically_normal().string());
    EXPECT_EQ(cfg.form, BidForm::block);
    EXPECT_EQ(cfg.blocks, 3u);
    EXPECT_EQ(cfg.genco, (std::vector<int>{0, 1}));
    EXPECT_EQ(cfg.c_grid, (std::vector<double>{1, 10}));
    EXPECT_NO_THROW(cfg.validate());
}

TEST(Config, Errors) {
    EXPECT_THROW(parse_config("nonsense = 1\n"), ConfigError);
    EXPECT_THROW(parse_config("form = triangle\n"), ConfigError);
    EXPECT_THROW(parse_config("n_scenarios = many\n"), ConfigError);
    EXPECT_THROW(parse_config("seed = 1\nseed = 2\n"), ConfigError);
    EXPECT_THROW(parse_config("genco = 0\n"), ConfigError);
    EXPECT_THROW(parse_config("just a line\n"), ConfigError);
    EXPECT_THROW(parse_config("levels = II\nstrategies = level_III\ncase = x\n").validate(), ConfigError);
}

TEST(Config, MissingCaseFailsBeforeAnySolve) {
    auto out = scratch("missing_case");
    ExperimentConfig cfg;
    cfg.case_path = (out / "nope.m").string();
    cfg.out_dir = (out / "o").string();
    EXPECT_THROW(cmd_gen_data(cfg), ConfigError);
    EXPECT_FALSE(fs::exists(out / "o"));
}

TEST(Config, DigestTracksContentNotOutputLocation) {
    auto a = small_config("/tmp/a"), b = small_config("/tmp/b");
    EXPECT_EQ(a.digest(), b.digest());
    b.eta = 0.02;
    EXPECT_NE(a.digest(), b.digest());
    EXPECT_EQ(a.data_digest(), b.data_digest());
    b.sigma_rel = 0.2;
    EXPECT_NE(a.data_digest(), b.data_digest());
    auto s1 = a.seeds();
    a.seed = 2;
    EXPECT_NE(a.seeds().scenario, s1.scenario);
    a.seed_overrides["scenario_seed"] = 99;
    EXPECT_EQ(a.seeds().scenario, 99u);
}

TEST(Pipeline, StagesProduceConsistentFiles) {
    auto out = scratch("pipeline");
    auto cfg = small_config(out);
    RunOptions run;
    run.emit_plot_data = true;
    auto gd = cmd_gen_data(cfg, run);
    EXPECT_EQ(gd.scenarios, 400u);
    EXPECT_EQ(data_rows((out / "outcomes.csv").string()), 400u);
    EXPECT_EQ(data_rows((out / "scenarios.csv").string()), 400u);
    EXPECT_EQ(io::read_file((out / "outcomes.csv").string()).rfind(cfg.provenance(), 0), 0u);

    auto tr = cmd_train(cfg, run);
    auto cls = io::parse_csv(io::read_file((out / "classification.csv").string()));
    EXPECT_EQ(cls.rows.size(), cfg.levels.size() * cfg.c_grid.size());
    for (auto level : cfg.levels) {
        const auto& m = tr.test.at(level);
        auto conf = io::parse_csv(io::read_file((out / ("confusion_" + to_string(level) + ".csv")).string()));
        for (std::size_t i = 0; i < conf.rows.size(); ++i) {
            double s = 0.0;
            for (int k = 0; k < tr.K; ++k) s += io::parse_double(conf.rows[i][static_cast<std::size_t>(2 + k)]);
            EXPECT_NEAR(s, m.class_counts[i], 1e-6);
        }
    }
    EXPECT_GE(tr.cv_accuracy.at(InfoLevel::II), 0.0);

    cmd_optimize(cfg, run);
    EXPECT_TRUE(fs::exists(out / "traces.csv"));
    auto ev = cmd_evaluate(cfg, run);
    ASSERT_EQ(ev.table.size(), cfg.strategies.size());
    for (std::size_t k = 0; k < ev.table.size(); ++k) EXPECT_EQ(ev.table[k].id, cfg.strategies[k]);
    EXPECT_EQ(ev.table[0].pct_of_oracle, 100.0);
    auto res = io::parse_csv(io::read_file((out / "results.csv").string()));
    EXPECT_EQ(res.rows.size(), cfg.strategies.size());
    EXPECT_FALSE(cmd_report(cfg, run).empty());
}

TEST(Pipeline, TrainNeedsGenData) {
    auto cfg = small_config(scratch("no_data"));
    EXPECT_THROW(cmd_train(cfg), ConfigError);
}

TEST(Pipeline, TrainRejectsForeignDataset) {
    auto out = scratch("foreign");
    auto cfg = small_config(out);
    cmd_gen_data(cfg);
    cfg.sigma_rel = 0.2;
    EXPECT_THROW(cmd_train(cfg), ConfigError);
}

TEST(Pipeline, RerunIsByteIdentical) {
    auto a = scratch("rerun_a"), b = scratch("rerun_b");
    for (const auto& out : {a, b}) {
        auto cfg = small_config(out);
        cfg.strategies = {StrategyId::oracle, StrategyId::level_II};
        cmd_gen_data(cfg);
        cmd_train(cfg);
        cmd_optimize(cfg);
        cmd_evaluate(cfg);
    }
    for (const auto& e : fs::directory_iterator(a))
        EXPECT_EQ(io::read_file(e.path().string()), io::read_file((b / e.path().filename()).string())) << e.path().filename();
}

TEST(Cli, ExitCodes) {
    auto out = scratch("cli");
    io::write_file((out / "bad.cfg").string(), "case = nowhere.m\n");
    io::write_file((out / "typo.cfg").string(), "cass = x\n");
    io::write_file((out / "ok.cfg").string(), "case = " + fixtures::case_dir() + "/case3.m\nn_scenarios = 200\n");
    EXPECT_EQ(run_cli("gen-data --config " + (out / "bad.cfg").string()), 2);
    EXPECT_EQ(run_cli("gen-data --config " + (out / "typo.cfg").string()), 2);
    EXPECT_EQ(run_cli("gen-data"), 2);
    EXPECT_EQ(run_cli("train --config " + (out / "ok.cfg").string() + " --out " + (out / "empty").string()), 2);
    EXPECT_EQ(run_cli("gen-data --config " + (out / "ok.cfg").string() + " --seed 4 --out " + (out / "o").string()), 0);
    EXPECT_NE(io::read_file((out / "o" / "dataset.json").string()).find("\"seed\": 4"), std::string::npos);
}
