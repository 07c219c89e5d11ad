#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "poolbid/experiment.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool emit_plot_data = false;
};

void add_flags(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "experiment config file (key = value)")->required();
    sub->add_option("--seed", f.seed, "override the master seed");
    sub->add_option("--out", f.out, "output directory (overrides 'out' in the config)");
    sub->add_flag("--emit-plot-data", f.emit_plot_data, "also write per-iteration ascent traces");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"poolbid: strategic bidding experiments on DC-OPF pool markets"};
    app.require_subcommand(1, 1);
    Flags flags;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"gen-data", "sample scenarios, clear them and label their binding patterns"},
        {"train", "fit the pattern classifiers and affine market models"},
        {"optimize", "compute each strategy's bid on sampled test intervals"},
        {"evaluate", "settle the bids under the true market clearing"},
        {"report", "print the classification and revenue tables"}};
    for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        auto cfg = poolbid::load_config(flags.config);
        if (flags.seed) cfg.seed = *flags.seed;
        if (!flags.out.empty()) cfg.out_dir = flags.out;
        poolbid::RunOptions run;
        run.emit_plot_data = flags.emit_plot_data;
        run.log = &std::cout;
        if (cmd == "gen-data") poolbid::cmd_gen_data(cfg, run);
        else if (cmd == "train") poolbid::cmd_train(cfg, run);
        else if (cmd == "optimize") poolbid::cmd_optimize(cfg, run);
        else if (cmd == "evaluate") poolbid::cmd_evaluate(cfg, run);
        else poolbid::cmd_report(cfg, run);
    } catch (const poolbid::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const poolbid::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const poolbid::Error& e) {
        std::cerr << cmd << " failed: " << e.what() << "\n";
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
