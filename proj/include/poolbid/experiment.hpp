#pragma once

// Config-driven experiment pipeline: gen-data -> train -> optimize -> evaluate -> report.
// Each stage reads only files written by earlier stages in the same output directory.

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "poolbid/classifier.hpp"
#include "poolbid/io.hpp"
#include "poolbid/pattern_lab.hpp"
#include "poolbid/strategy_bench.hpp"

namespace poolbid {

namespace detail {

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

template <class F>
auto with_context(const std::string& where, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const InfeasibleError& e) {
        throw InfeasibleError(where + ": " + e.what());
    } catch (const NumericalError& e) {
        throw NumericalError(where + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError(where + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(where + ": " + e.what());
    }
}

inline std::string csv_safe(std::string s) {
    for (auto& ch : s)
        if (ch == ',' || ch == '\n' || ch == '\r') ch = ';';
    return s;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Configuration

struct ExperimentSeeds {
    std::uint64_t scenario = 0;
    std::uint64_t split = 0;
    std::uint64_t svm = 0;
    std::uint64_t interval = 0;
};

/// One file = one experiment. Flat `key = value` lines, '#' starts a comment.
struct ExperimentConfig {
    std::string case_path;
    BidForm form = BidForm::quadratic;
    std::size_t blocks = 2;
    bool lossy = false;
    double loss_sensitivity = 0.02;
    std::size_t n_scenarios = 2000;
    double sigma_rel = 0.1;
    double load_sigma_rel = 0.1;
    double profile_scale = 1.0;
    double train_frac = 0.8;
    int k_folds = 5;
    int top_k = 10;
    std::vector<double> c_grid = default_c_grid();
    double eta = 0.01;
    int max_iter = 200;
    std::vector<InfoLevel> levels{InfoLevel::II, InfoLevel::III, InfoLevel::IV};
    std::vector<StrategyId> strategies = all_strategies();
    std::vector<int> genco{0};  // 0-based generator rows; the file uses 1-based
    int n_intervals = 20;
    int interval_patterns = 10;
    int rdc_neighbors = 50;
    int oracle_grid = 9;
    double price_cap_factor = 10.0;  // price box is [0, factor * marginal cost at capacity]
    std::uint64_t seed = 1;
    std::map<std::string, std::uint64_t> seed_overrides;  // scenario_seed, split_seed, svm_seed, interval_seed
    std::string out_dir = "out";

    ExperimentSeeds seeds() const {
        auto pick = [&](const char* key, std::uint64_t salt) {
            auto it = seed_overrides.find(key);
            return it != seed_overrides.end() ? it->second : detail::splitmix64(seed * 4 + salt);
        };
        return {pick("scenario_seed", 0), pick("split_seed", 1), pick("svm_seed", 2), pick("interval_seed", 3)};
    }

    bool has_level(InfoLevel l) const { return std::find(levels.begin(), levels.end(), l) != levels.end(); }

    void validate() const;
    std::string data_canonical() const;
    std::string canonical() const;
    std::string data_digest() const { return detail::hex64(detail::fnv1a(data_canonical())); }
    std::string digest() const { return detail::hex64(detail::fnv1a(canonical())); }
    /// One-line comment heading every CSV output.
    std::string provenance() const;
    nlohmann::json provenance_json() const;
};

namespace detail {

template <class T, class F>
std::string join_map(const std::vector<T>& v, F f) {
    std::vector<std::string> s;
    for (const auto& x : v) s.push_back(f(x));
    return io::join(s, ",");
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError(key + ": expected a nonnegative integer, got '" + v + "'");
    return out;
}

inline int parse_int(const std::string& key, const std::string& v) {
    int out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
}

inline double parse_num(const std::string& key, const std::string& v) {
    try {
        double d = io::parse_double(v);
        if (!std::isfinite(d)) throw Error("");
        return d;
    } catch (const Error&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

inline std::vector<std::string> parse_list(const std::string& v) {
    std::vector<std::string> out;
    for (auto& s : io::split(v, ',')) {
        auto t = io::trim(s);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

} // namespace detail

inline void ExperimentConfig::validate() const {
    if (case_path.empty()) throw ConfigError("missing 'case'");
    if (!std::filesystem::is_regular_file(case_path)) throw ConfigError("case file not found: " + case_path);
    if (form == BidForm::block && blocks < 1) throw ConfigError("blocks must be at least 1");
    if (n_scenarios < 2) throw ConfigError("n_scenarios must be at least 2");
    if (sigma_rel < 0 || load_sigma_rel < 0) throw ConfigError("deviations must be nonnegative");
    if (!(profile_scale > 0)) throw ConfigError("profile_scale must be positive");
    if (!(train_frac > 0 && train_frac < 1)) throw ConfigError("train_frac must lie in (0, 1)");
    if (k_folds < 2) throw ConfigError("k_folds must be at least 2");
    if (top_k < 2) throw ConfigError("top_k must be at least 2");
    if (c_grid.empty()) throw ConfigError("empty c_grid");
    for (double C : c_grid)
        if (!(C > 0)) throw ConfigError("c_grid entries must be positive");
    if (!(eta > 0)) throw ConfigError("eta must be positive");
    if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
    if (levels.empty()) throw ConfigError("no information levels");
    if (strategies.empty()) throw ConfigError("no strategies");
    if (genco.empty()) throw ConfigError("empty genco");
    if (n_intervals < 1) throw ConfigError("n_intervals must be at least 1");
    if (interval_patterns < 1) throw ConfigError("interval_patterns must be at least 1");
    if (rdc_neighbors < 1) throw ConfigError("rdc_neighbors must be at least 1");
    if (oracle_grid < 2) throw ConfigError("oracle_grid must be at least 2");
    if (!(price_cap_factor > 0)) throw ConfigError("price_cap_factor must be positive");
    for (auto s : strategies) {
        InfoLevel need = s == StrategyId::level_III ? InfoLevel::III : s == StrategyId::level_IV ? InfoLevel::IV : InfoLevel::II;
        if (s != StrategyId::oracle && !has_level(need))
            throw ConfigError("strategy " + to_string(s) + " needs level " + to_string(need) + " in 'levels'");
    }
    if (!has_level(InfoLevel::II) && strategies != std::vector<StrategyId>{StrategyId::oracle})
        throw ConfigError("level II is required: it sets the step scale");
}

inline std::string ExperimentConfig::data_canonical() const {
    const auto s = seeds();
    std::string c;
    auto kv = [&](const std::string& k, const std::string& v) { c += k + "=" + v + "\n"; };
    kv("case", std::filesystem::path(case_path).filename().string());
    kv("case_hash", detail::hex64(detail::fnv1a(io::read_file(case_path))));
    kv("form", to_string(form));
    kv("blocks", std::to_string(form == BidForm::block ? blocks : 1));
    kv("loss", lossy ? "lossy" : "lossless");
    kv("loss_sensitivity", lossy ? io::fmt(loss_sensitivity) : "0");
    kv("n_scenarios", std::to_string(n_scenarios));
    kv("sigma_rel", io::fmt(sigma_rel));
    kv("load_sigma_rel", io::fmt(load_sigma_rel));
    kv("profile_scale", io::fmt(profile_scale));
    kv("train_frac", io::fmt(train_frac));
    kv("k_folds", std::to_string(k_folds));
    kv("top_k", std::to_string(top_k));
    kv("genco", detail::join_map(genco, [](int g) { return std::to_string(g + 1); }));
    kv("scenario_seed", std::to_string(s.scenario));
    kv("split_seed", std::to_string(s.split));
    return c;
}

inline std::string ExperimentConfig::canonical() const {
    const auto s = seeds();
    std::string c = data_canonical();
    auto kv = [&](const std::string& k, const std::string& v) { c += k + "=" + v + "\n"; };
    kv("c_grid", detail::join_map(c_grid, [](double v) { return io::fmt(v); }));
    kv("eta", io::fmt(eta));
    kv("max_iter", std::to_string(max_iter));
    kv("levels", detail::join_map(levels, [](InfoLevel l) { return to_string(l); }));
    kv("strategies", detail::join_map(strategies, [](StrategyId id) { return to_string(id); }));
    kv("n_intervals", std::to_string(n_intervals));
    kv("interval_patterns", std::to_string(interval_patterns));
    kv("rdc_neighbors", std::to_string(rdc_neighbors));
    kv("oracle_grid", std::to_string(oracle_grid));
    kv("price_cap_factor", io::fmt(price_cap_factor));
    kv("svm_seed", std::to_string(s.svm));
    kv("interval_seed", std::to_string(s.interval));
    return c;
}

inline std::string ExperimentConfig::provenance() const {
    const auto s = seeds();
    return "# config_digest=" + digest() + " data_digest=" + data_digest() + " seed=" + std::to_string(seed) +
           " scenario_seed=" + std::to_string(s.scenario) + " split_seed=" + std::to_string(s.split) +
           " svm_seed=" + std::to_string(s.svm) + " interval_seed=" + std::to_string(s.interval) + "\n";
}

inline nlohmann::json ExperimentConfig::provenance_json() const {
    const auto s = seeds();
    return {{"config_digest", digest()},
            {"data_digest", data_digest()},
            {"seeds",
             {{"seed", seed}, {"scenario_seed", s.scenario}, {"split_seed", s.split}, {"svm_seed", s.svm}, {"interval_seed", s.interval}}},
            {"config", canonical()}};
}

/// Parses config text; a relative case path is resolved against `base_dir`.
inline ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {}) {
    ExperimentConfig cfg;
    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = io::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = io::trim(line.substr(0, eq));
        const std::string v = io::trim(line.substr(eq + 1));
        if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'");
        if (key == "case") {
            std::filesystem::path p(v);
            cfg.case_path = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).lexically_normal().string();
        } else if (key == "form") {
            if (v != "block" && v != "quadratic") throw ConfigError("form: expected block or quadratic");
            cfg.form = parse_bid_form(v);
        } else if (key == "blocks") {
            cfg.blocks = static_cast<std::size_t>(detail::parse_u64(key, v));
        } else if (key == "loss") {
            if (v != "lossless" && v != "lossy") throw ConfigError("loss: expected lossless or lossy");
            cfg.lossy = v == "lossy";
        } else if (key == "loss_sensitivity") {
            cfg.loss_sensitivity = detail::parse_num(key, v);
        } else if (key == "n_scenarios") {
            cfg.n_scenarios = static_cast<std::size_t>(detail::parse_u64(key, v));
        } else if (key == "sigma_rel") {
            cfg.sigma_rel = detail::parse_num(key, v);
        } else if (key == "load_sigma_rel") {
            cfg.load_sigma_rel = detail::parse_num(key, v);
        } else if (key == "profile_scale") {
            cfg.profile_scale = detail::parse_num(key, v);
        } else if (key == "train_frac") {
            cfg.train_frac = detail::parse_num(key, v);
        } else if (key == "k_folds") {
            cfg.k_folds = detail::parse_int(key, v);
        } else if (key == "top_k") {
            cfg.top_k = detail::parse_int(key, v);
        } else if (key == "c_grid") {
            cfg.c_grid.clear();
            for (auto& s : detail::parse_list(v)) cfg.c_grid.push_back(detail::parse_num(key, s));
        } else if (key == "eta") {
            cfg.eta = detail::parse_num(key, v);
        } else if (key == "max_iter") {
            cfg.max_iter = detail::parse_int(key, v);
        } else if (key == "levels") {
            cfg.levels.clear();
            for (auto& s : detail::parse_list(v)) cfg.levels.push_back(parse_info_level(s));
        } else if (key == "strategies") {
            cfg.strategies.clear();
            for (auto& s : detail::parse_list(v)) cfg.strategies.push_back(parse_strategy(s));
        } else if (key == "genco") {
            cfg.genco.clear();
            for (auto& s : detail::parse_list(v)) {
                int g = detail::parse_int(key, s);
                if (g < 1) throw ConfigError("genco: generator rows are 1-based");
                cfg.genco.push_back(g - 1);
            }
        } else if (key == "n_intervals") {
            cfg.n_intervals = detail::parse_int(key, v);
        } else if (key == "interval_patterns") {
            cfg.interval_patterns = detail::parse_int(key, v);
        } else if (key == "rdc_neighbors") {
            cfg.rdc_neighbors = detail::parse_int(key, v);
        } else if (key == "oracle_grid") {
            cfg.oracle_grid = detail::parse_int(key, v);
        } else if (key == "price_cap_factor") {
            cfg.price_cap_factor = detail::parse_num(key, v);
        } else if (key == "seed") {
            cfg.seed = detail::parse_u64(key, v);
        } else if (key == "scenario_seed" || key == "split_seed" || key == "svm_seed" || key == "interval_seed") {
            cfg.seed_overrides[key] = detail::parse_u64(key, v);
        } else if (key == "out") {
            std::filesystem::path p(v);
            cfg.out_dir = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).lexically_normal().string();
        } else {
            throw ConfigError("unknown key '" + key + "'");
        }
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::string text;
    try {
        text = io::read_file(path);
    } catch (const Error&) {
        throw ConfigError("cannot read config '" + path + "'");
    }
    return parse_config(text, std::filesystem::path(path).parent_path());
}

struct RunOptions {
    bool emit_plot_data = false;
    std::ostream* log = nullptr;
};

// ---------------------------------------------------------------------------
// Shared plumbing

struct ExperimentContext {
    NetworkCase net;
    PtdfMatrix ptdf;
    LossModel loss;
    BidSet shape;  // base offers; every scenario is this shape with new decision values
};

inline ExperimentContext make_context(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentContext ctx;
    try {
        ctx.net = load_case(cfg.case_path);
    } catch (const ParseError& e) {
        throw ConfigError(std::string("case file: ") + e.what());
    }
    for (int g : cfg.genco)
        if (g >= static_cast<int>(ctx.net.generators.size())) throw ConfigError("genco names a generator the case does not have");
    ctx.ptdf = compute_ptdf(ctx.net);
    ctx.loss = cfg.lossy ? LossModel::uniform(ctx.net, cfg.loss_sensitivity) : LossModel::lossless();
    ctx.shape = base_bids(ctx.net, cfg.form, cfg.blocks);
    return ctx;
}

inline std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
    return (std::filesystem::path(cfg.out_dir) / name).string();
}

inline std::string read_stage_file(const ExperimentConfig& cfg, const std::string& name, const char* producer) {
    const auto p = out_path(cfg, name);
    if (!std::filesystem::is_regular_file(p))
        throw ConfigError("missing " + p + " (run '" + producer + "' first)");
    return io::read_file(p);
}

inline nlohmann::json read_manifest(const ExperimentConfig& cfg, const std::string& name, const char* producer, bool full_digest) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_stage_file(cfg, name, producer));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(name + ": " + e.what());
    }
    const std::string key = full_digest ? "config_digest" : "data_digest";
    const std::string want = full_digest ? cfg.digest() : cfg.data_digest();
    if (j.value("provenance", nlohmann::json::object()).value(key, "") != want)
        throw ConfigError(name + " was produced by a different configuration (rerun '" + producer + "')");
    return j;
}

inline void write_json(const std::string& path, const nlohmann::json& j) { io::write_file(path, j.dump(2) + "\n"); }

/// Scenario rows rebuilt from scenarios.csv.
struct DatasetRow {
    int id = 0;
    int hour = 0;
    int fold = -1;
    int label = -1;  // retained class, -1 otherwise
    bool degenerate = false;
    BidSet bids;
    LoadVector loads;
};

struct Dataset {
    std::vector<DatasetRow> rows;
    std::vector<std::string> classes;  // retained fingerprints in class order
    std::vector<double> class_count;   // training counts
    Mat price;                         // rows x buses
    Mat dispatch;                      // rows x dispatch size
};

inline Dataset load_dataset(const ExperimentConfig& cfg, const ExperimentContext& ctx) {
    read_manifest(cfg, "dataset.json", "gen-data", false);
    Dataset ds;
    auto num = [](const std::string& s) {
        try {
            return io::parse_double(s);
        } catch (const Error& e) {
            throw ConfigError(std::string("dataset: ") + e.what());
        }
    };

    auto pat = io::parse_csv(read_stage_file(cfg, "patterns.csv", "gen-data"));
    const int c_fp = pat.column("fingerprint"), c_cls = pat.column("class"), c_cnt = pat.column("count");
    for (const auto& r : pat.rows) {
        int cls = std::stoi(r[static_cast<std::size_t>(c_cls)]);
        if (cls < 0) continue;
        if (cls != static_cast<int>(ds.classes.size())) throw ConfigError("patterns.csv: classes out of order");
        ds.classes.push_back(r[static_cast<std::size_t>(c_fp)]);
        ds.class_count.push_back(num(r[static_cast<std::size_t>(c_cnt)]));
    }

    auto sc = io::parse_csv(read_stage_file(cfg, "scenarios.csv", "gen-data"));
    const FeatureSpec full = FeatureSpec::make(ctx.net, InfoLevel::II, {});
    const auto names = feature_names(full, ctx.net, ctx.shape);
    std::vector<int> all(ctx.shape.num_generators());
    std::iota(all.begin(), all.end(), 0);
    const std::size_t nx = decision_size(ctx.shape) * all.size();
    const int c_id = sc.column("id"), c_hour = sc.column("hour"), c_fold = sc.column("fold"), c_label = sc.column("class"),
              c_deg = sc.column("degenerate");
    std::vector<int> col;
    for (const auto& n : names) col.push_back(sc.column(n));
    for (const auto& r : sc.rows) {
        DatasetRow row;
        row.id = std::stoi(r[static_cast<std::size_t>(c_id)]);
        row.hour = std::stoi(r[static_cast<std::size_t>(c_hour)]);
        row.fold = std::stoi(r[static_cast<std::size_t>(c_fold)]);
        row.label = std::stoi(r[static_cast<std::size_t>(c_label)]);
        row.degenerate = r[static_cast<std::size_t>(c_deg)] == "1";
        std::vector<double> v;
        for (int k : col) v.push_back(num(r[static_cast<std::size_t>(k)]));
        row.bids = ctx.shape;
        apply_decision(row.bids, all, std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(nx)));
        row.loads.L.assign(v.begin() + static_cast<std::ptrdiff_t>(nx), v.end());
        ds.rows.push_back(std::move(row));
    }

    auto oc = io::parse_csv(read_stage_file(cfg, "outcomes.csv", "gen-data"));
    if (oc.rows.size() != ds.rows.size()) throw ConfigError("outcomes.csv and scenarios.csv disagree on row count");
    const auto nb = static_cast<Eigen::Index>(ctx.net.num_buses());
    const auto nd = static_cast<Eigen::Index>(ctx.shape.dispatch_size());
    ds.price.resize(static_cast<Eigen::Index>(ds.rows.size()), nb);
    ds.dispatch.resize(static_cast<Eigen::Index>(ds.rows.size()), nd);
    std::vector<int> pc, dc;
    for (Eigen::Index i = 0; i < nb; ++i) pc.push_back(oc.column("pi" + std::to_string(i + 1)));
    for (Eigen::Index k = 0; k < nd; ++k) dc.push_back(oc.column("P" + std::to_string(k + 1)));
    for (std::size_t t = 0; t < oc.rows.size(); ++t) {
        const auto ti = static_cast<Eigen::Index>(t);
        for (Eigen::Index i = 0; i < nb; ++i) ds.price(ti, i) = num(oc.rows[t][static_cast<std::size_t>(pc[static_cast<std::size_t>(i)])]);
        for (Eigen::Index k = 0; k < nd; ++k) ds.dispatch(ti, k) = num(oc.rows[t][static_cast<std::size_t>(dc[static_cast<std::size_t>(k)])]);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// gen-data

struct GenDataSummary {
    std::size_t scenarios = 0;
    std::size_t train_rows = 0;
    std::size_t degenerate = 0;
    std::size_t distinct_patterns = 0;
    int retained = 0;
};

inline GenDataSummary cmd_gen_data(const ExperimentConfig& cfg, const RunOptions& run = {}) {
    const auto ctx = make_context(cfg);
    const auto seeds = cfg.seeds();
    std::filesystem::create_directories(cfg.out_dir);
    const std::string prov = cfg.provenance();

    ScenarioOptions so;
    so.n = cfg.n_scenarios;
    so.sigma_rel = cfg.sigma_rel;
    so.load_sigma_rel = cfg.load_sigma_rel;
    so.seed = seeds.scenario;
    so.profile_scale = cfg.profile_scale;
    ScenarioDiagnostics diag;
    const auto scenarios = generate_scenarios(ctx.shape, base_loads(ctx.net), so, &diag);

    std::vector<OpfSolution> sols;
    sols.reserve(scenarios.size());
    for (const auto& s : scenarios)
        sols.push_back(detail::with_context("scenario " + std::to_string(s.id),
                                            [&] { return solve_opf(ctx.net, ctx.ptdf, s.bids, s.loads, ctx.loss); }));

    const auto split = split_dataset(scenarios.size(), cfg.train_frac, cfg.k_folds, seeds.split);

    // rank on training rows; a pattern needs enough non-degenerate rows to fit its level-II maps
    const FeatureSpec full = FeatureSpec::make(ctx.net, InfoLevel::II, {});
    const auto names = feature_names(full, ctx.net, ctx.shape);
    const int need = minimum_fit_samples(static_cast<Eigen::Index>(names.size()));
    std::vector<std::string> train_fp;
    std::map<std::string, int> fit_rows;
    GenDataSummary sum;
    sum.scenarios = scenarios.size();
    for (std::size_t t = 0; t < scenarios.size(); ++t) {
        sum.degenerate += sols[t].degenerate ? 1 : 0;
        if (!split.is_train(t)) continue;
        const auto fp = extract_pattern(sols[t]);
        train_fp.push_back(fp);
        if (!sols[t].degenerate) ++fit_rows[fp];
    }
    sum.train_rows = train_fp.size();
    const auto ranking = rank_patterns(train_fp, cfg.top_k, [&](const SystemPattern& p) { return fit_rows[p.fingerprint] >= need; });
    std::map<std::string, int> class_of;
    std::string pcsv = prov + "fingerprint,k,count,fit_rows,retained,class\n";
    for (const auto& p : ranking.patterns) {
        int cls = -1;
        if (p.retained) {
            cls = static_cast<int>(class_of.size());
            class_of[p.fingerprint] = cls;
        }
        pcsv += p.fingerprint + "," + std::to_string(p.k) + "," + std::to_string(p.count) + "," +
                std::to_string(fit_rows[p.fingerprint]) + "," + (p.retained ? "1" : "0") + "," + std::to_string(cls) + "\n";
    }
    sum.distinct_patterns = ranking.patterns.size();
    sum.retained = static_cast<int>(class_of.size());
    if (sum.retained < 2) throw ValidationError("fewer than 2 retained patterns");
    io::write_file(out_path(cfg, "patterns.csv"), pcsv);

    std::vector<int> cls(scenarios.size(), -1);
    std::vector<std::string> fps(scenarios.size());
    for (std::size_t t = 0; t < scenarios.size(); ++t) {
        fps[t] = extract_pattern(sols[t]);
        auto it = class_of.find(fps[t]);
        if (it != class_of.end()) cls[t] = it->second;
    }

    std::string scsv = prov + "id,hour,fold,class,degenerate," + io::join(names, ",") + "\n";
    for (std::size_t t = 0; t < scenarios.size(); ++t) {
        std::vector<std::string> cells{std::to_string(scenarios[t].id), std::to_string(scenarios[t].hour),
                                       std::to_string(split.fold[t]), std::to_string(cls[t]), sols[t].degenerate ? "1" : "0"};
        for (double v : build_feature_vector(full, scenarios[t].bids, scenarios[t].loads)) cells.push_back(io::fmt(v));
        scsv += io::join(cells, ",") + "\n";
    }
    io::write_file(out_path(cfg, "scenarios.csv"), scsv);

    nlohmann::json level_names = nlohmann::json::object();
    for (auto level : cfg.levels) {
        const auto spec = FeatureSpec::make(ctx.net, level, cfg.genco);
        const auto ln = feature_names(spec, ctx.net, ctx.shape);
        level_names[to_string(level)] = ln;
        std::string f = prov + "id,fold,class," + io::join(ln, ",") + "\n";
        for (std::size_t t = 0; t < scenarios.size(); ++t) {
            std::vector<std::string> cells{std::to_string(scenarios[t].id), std::to_string(split.fold[t]), std::to_string(cls[t])};
            for (double v : build_feature_vector(spec, scenarios[t].bids, scenarios[t].loads)) cells.push_back(io::fmt(v));
            f += io::join(cells, ",") + "\n";
        }
        io::write_file(out_path(cfg, "features_" + to_string(level) + ".csv"), f);
    }

    std::string ocsv = prov + opf_csv_header(ctx.shape.dispatch_size(), ctx.net.branches.size(), ctx.net.num_buses()) + "\n";
    for (std::size_t t = 0; t < scenarios.size(); ++t) ocsv += opf_csv_row(scenarios[t].id, sols[t]) + "\n";
    io::write_file(out_path(cfg, "outcomes.csv"), ocsv);

    nlohmann::json m;
    m["provenance"] = cfg.provenance_json();
    m["scenarios"] = sum.scenarios;
    m["train_rows"] = sum.train_rows;
    m["test_rows"] = sum.scenarios - sum.train_rows;
    m["degenerate"] = sum.degenerate;
    m["distinct_training_patterns"] = sum.distinct_patterns;
    m["retained"] = sum.retained;
    m["resampled_nonpositive"] = diag.resampled_nonpositive;
    m["resampled_ties"] = diag.resampled_ties;
    m["feature_names"] = level_names;
    write_json(out_path(cfg, "dataset.json"), m);
    if (run.log)
        *run.log << "gen-data: " << sum.scenarios << " scenarios, " << sum.distinct_patterns << " training patterns, "
                 << sum.retained << " retained, " << sum.degenerate << " degenerate\n";
    return sum;
}

// ---------------------------------------------------------------------------
// train

inline nlohmann::json to_json(const AffineMap& m) {
    nlohmann::json coef = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.coef.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.coef.cols()));
        for (Eigen::Index c = 0; c < m.coef.cols(); ++c) row[static_cast<std::size_t>(c)] = m.coef(r, c);
        coef.push_back(row);
    }
    return {{"coef", coef}, {"intercept", std::vector<double>(m.intercept.data(), m.intercept.data() + m.intercept.size())}};
}

inline AffineMap affine_from_json(const nlohmann::json& j) {
    AffineMap m;
    auto rows = j.at("coef").get<std::vector<std::vector<double>>>();
    auto icp = j.at("intercept").get<std::vector<double>>();
    const auto nr = static_cast<Eigen::Index>(rows.size());
    const auto nc = nr ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    if (static_cast<Eigen::Index>(icp.size()) != nr) throw ConfigError("affine map: intercept length mismatch");
    m.coef.resize(nr, nc);
    for (Eigen::Index r = 0; r < nr; ++r) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(r)].size()) != nc) throw ConfigError("affine map: ragged coefficients");
        for (Eigen::Index c = 0; c < nc; ++c) m.coef(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    m.intercept = Eigen::Map<Vec>(icp.data(), nr);
    return m;
}

inline nlohmann::json to_json(const ParametricModel& pm) {
    nlohmann::json j;
    j["num_decision_features"] = pm.num_decision_features;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [k, m] : pm.patterns)
        arr.push_back({{"k", k},
                       {"samples", m.price_fit.samples},
                       {"price", to_json(m.price)},
                       {"dispatch", to_json(m.dispatch)},
                       {"price_max_relative_residual", m.price_fit.max_relative_residual},
                       {"dispatch_max_relative_residual", m.dispatch_fit.max_relative_residual}});
    j["patterns"] = arr;
    return j;
}

inline ParametricModel parametric_from_json(const nlohmann::json& j) {
    try {
        ParametricModel pm;
        pm.num_decision_features = j.at("num_decision_features").get<int>();
        for (const auto& p : j.at("patterns")) {
            PatternModel m;
            m.k = p.at("k").get<int>();
            m.price = affine_from_json(p.at("price"));
            m.dispatch = affine_from_json(p.at("dispatch"));
            m.price_fit.samples = m.dispatch_fit.samples = p.at("samples").get<int>();
            m.price_fit.max_relative_residual = p.at("price_max_relative_residual").get<double>();
            m.dispatch_fit.max_relative_residual = p.at("dispatch_max_relative_residual").get<double>();
            pm.patterns[m.k] = std::move(m);
        }
        return pm;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed parametric model: ") + e.what());
    }
}

struct LevelModel {
    InfoLevel level = InfoLevel::II;
    FeatureSpec spec;
    OvoClassifier classifier;
    ParametricModel parametric;
};

struct TrainSummary {
    std::map<InfoLevel, ClassificationMetrics> test;
    std::map<InfoLevel, double> cv_accuracy;
    std::map<InfoLevel, double> C;
    int K = 0;
};

inline TrainSummary cmd_train(const ExperimentConfig& cfg, const RunOptions& run = {}) {
    const auto ctx = make_context(cfg);
    const auto ds = load_dataset(cfg, ctx);
    const int K = static_cast<int>(ds.classes.size());
    if (K < 2) throw ValidationError("fewer than 2 retained patterns");
    const std::string prov = cfg.provenance();
    TrainSummary sum;
    sum.K = K;

    std::string cls_csv = prov + "level,C,mean_accuracy";
    for (int f = 0; f < cfg.k_folds; ++f) cls_csv += ",fold" + std::to_string(f + 1);
    cls_csv += ",selected\n";
    std::string met_csv = prov + "level,K,C,train_rows,test_rows,cv_accuracy,accuracy,dummy1,dummy2\n";

    for (auto level : cfg.levels) {
        const std::string ln = to_string(level);
        LevelModel lm;
        lm.level = level;
        lm.spec = FeatureSpec::make(ctx.net, level, cfg.genco);
        const auto names = feature_names(lm.spec, ctx.net, ctx.shape);
        const auto d = static_cast<Eigen::Index>(names.size());

        std::vector<const DatasetRow*> tr, te;
        std::vector<std::size_t> tr_idx;
        for (std::size_t t = 0; t < ds.rows.size(); ++t) {
            const auto& r = ds.rows[t];
            if (r.label < 0) continue;
            if (r.fold >= 0) {
                tr.push_back(&r);
                tr_idx.push_back(t);
            } else {
                te.push_back(&r);
            }
        }
        auto features = [&](const DatasetRow& r) { return build_feature_vector(lm.spec, r.bids, r.loads); };

        LabeledSet data;
        data.X.resize(static_cast<Eigen::Index>(tr.size()), d);
        for (std::size_t t = 0; t < tr.size(); ++t) {
            auto f = features(*tr[t]);
            for (Eigen::Index m = 0; m < d; ++m) data.X(static_cast<Eigen::Index>(t), m) = f[static_cast<std::size_t>(m)];
            data.label.push_back(tr[t]->label);
            data.fold.push_back(tr[t]->fold);
        }
        OvoOptions oo;
        oo.c_grid = cfg.c_grid;
        oo.svm.seed = cfg.seeds().svm;
        lm.classifier = detail::with_context("level " + ln, [&] { return train_ovo(data, K, ds.classes, names, oo); });

        Mat Xte(static_cast<Eigen::Index>(te.size()), d);
        std::vector<int> yte;
        for (std::size_t t = 0; t < te.size(); ++t) {
            auto f = features(*te[t]);
            for (Eigen::Index m = 0; m < d; ++m) Xte(static_cast<Eigen::Index>(t), m) = f[static_cast<std::size_t>(m)];
            yte.push_back(te[t]->label);
        }
        const auto metrics = evaluate(lm.classifier, Xte, yte);

        // parametric maps per class on non-degenerate training rows
        lm.parametric.num_decision_features = static_cast<int>(decision_size(ctx.shape) * lm.spec.observed_generators(ctx.shape.num_generators()).size());
        for (int k = 0; k < K; ++k) {
            std::vector<MarketSample> samples;
            for (std::size_t t = 0; t < tr.size(); ++t) {
                if (tr[t]->label != k || tr[t]->degenerate) continue;
                const auto row = static_cast<Eigen::Index>(tr_idx[t]);
                MarketSample s;
                s.features = data.X.row(static_cast<Eigen::Index>(t)).transpose();
                s.price = ds.price.row(row).transpose();
                s.dispatch = ds.dispatch.row(row).transpose();
                samples.push_back(std::move(s));
            }
            lm.parametric.patterns[k] =
                detail::with_context("level " + ln + " pattern " + std::to_string(k), [&] { return fit_parametric_model(k, samples); });
        }

        double cv_best = 0.0;
        for (const auto& s : lm.classifier.cv) {
            cls_csv += ln + "," + io::fmt(s.C) + "," + io::fmt(s.mean_accuracy);
            for (double a : s.fold_accuracy) cls_csv += "," + io::fmt(a);
            cls_csv += std::string(",") + (s.C == lm.classifier.C ? "1" : "0") + "\n";
            if (s.C == lm.classifier.C) cv_best = s.mean_accuracy;
        }
        met_csv += ln + "," + std::to_string(K) + "," + io::fmt(lm.classifier.C) + "," + std::to_string(tr.size()) + "," +
                   std::to_string(te.size()) + "," + io::fmt(cv_best) + "," + io::fmt(metrics.accuracy) + "," +
                   io::fmt(metrics.dummy1) + "," + io::fmt(metrics.dummy2) + "\n";

        std::string conf = prov + "true_class,count";
        for (int k = 0; k < K; ++k) conf += ",p" + std::to_string(k);
        conf += "\n";
        for (int i = 0; i < K; ++i) {
            conf += std::to_string(i) + "," + std::to_string(metrics.class_counts[static_cast<std::size_t>(i)]);
            for (int k = 0; k < K; ++k) conf += "," + io::fmt(metrics.confusion(i, k));
            conf += "\n";
        }
        io::write_file(out_path(cfg, "confusion_" + ln + ".csv"), conf);

        nlohmann::json mj;
        mj["provenance"] = cfg.provenance_json();
        mj["level"] = ln;
        mj["classifier"] = to_json(lm.classifier);
        mj["parametric"] = to_json(lm.parametric);
        write_json(out_path(cfg, "model_" + ln + ".json"), mj);

        sum.test[level] = metrics;
        sum.cv_accuracy[level] = cv_best;
        sum.C[level] = lm.classifier.C;
        if (run.log)
            *run.log << "train level " << ln << ": C=" << io::fmt(lm.classifier.C) << " cv=" << io::fmt(cv_best)
                     << " test=" << io::fmt(metrics.accuracy) << " dummy1=" << io::fmt(metrics.dummy1) << "\n";
    }
    io::write_file(out_path(cfg, "classification.csv"), cls_csv);
    io::write_file(out_path(cfg, "metrics.csv"), met_csv);
    nlohmann::json tj;
    tj["provenance"] = cfg.provenance_json();
    tj["K"] = K;
    tj["classes"] = ds.classes;
    write_json(out_path(cfg, "train.json"), tj);
    return sum;
}

inline LevelModel load_level_model(const ExperimentConfig& cfg, const ExperimentContext& ctx, InfoLevel level) {
    const std::string name = "model_" + to_string(level) + ".json";
    auto j = read_manifest(cfg, name, "train", false);
    LevelModel lm;
    lm.level = level;
    lm.spec = FeatureSpec::make(ctx.net, level, cfg.genco);
    if (!j.contains("classifier") || !j.contains("parametric")) throw ConfigError(name + ": missing sections");
    lm.classifier = classifier_from_json(j["classifier"]);
    lm.parametric = parametric_from_json(j["parametric"]);
    if (lm.classifier.dim() != feature_names(lm.spec, ctx.net, ctx.shape).size())
        throw ConfigError(name + ": feature dimension does not match the case");
    return lm;
}

// ---------------------------------------------------------------------------
// optimize

/// Test rows whose class is among the `interval_patterns` most frequent, sampled without replacement.
inline std::vector<std::size_t> sample_intervals(const ExperimentConfig& cfg, const Dataset& ds) {
    std::vector<std::size_t> pool;
    for (std::size_t t = 0; t < ds.rows.size(); ++t)
        if (ds.rows[t].fold < 0 && ds.rows[t].label >= 0 && ds.rows[t].label < cfg.interval_patterns) pool.push_back(t);
    if (pool.empty()) throw ValidationError("no test intervals in the retained patterns");
    std::mt19937_64 rng(cfg.seeds().interval);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(std::min(pool.size(), static_cast<std::size_t>(cfg.n_intervals)));
    std::sort(pool.begin(), pool.end());
    return pool;
}

inline StrategyConfig strategy_config(const ExperimentConfig& cfg, const ExperimentContext& ctx, const LevelModel* level_ii) {
    StrategyConfig sc;
    sc.genco = cfg.genco;
    sc.cost.assign(cfg.genco.size(), CostCurve{});
    sc.form = cfg.form;
    sc.blocks = ctx.shape.blocks_per_generator();
    sc.eta = cfg.eta;
    sc.max_iter = cfg.max_iter;
    sc.seed = cfg.seed;
    default_bounds(ctx.net, sc, cfg.price_cap_factor);
    if (level_ii) {
        const auto pos = decision_positions(level_ii->spec, ctx.shape);
        for (std::size_t v = 0; v < pos.size(); ++v) {
            const double range = level_ii->classifier.scaler.scale_of(static_cast<std::size_t>(pos[v]));
            sc.step_scale.push_back(range > 0.0 ? range : (sc.upper[v] - sc.lower[v]) / 10.0);
        }
    }
    return sc;
}

struct OptimizeSummary {
    std::size_t intervals = 0;
    int failures = 0;
};

inline OptimizeSummary cmd_optimize(const ExperimentConfig& cfg, const RunOptions& run = {}) {
    const auto ctx = make_context(cfg);
    const auto ds = load_dataset(cfg, ctx);
    read_manifest(cfg, "train.json", "train", false);
    const int K = static_cast<int>(ds.classes.size());
    std::map<InfoLevel, LevelModel> models;
    for (auto level : cfg.levels) models.emplace(level, load_level_model(cfg, ctx, level));
    const LevelModel* ii = models.count(InfoLevel::II) ? &models.at(InfoLevel::II) : nullptr;
    const StrategyConfig sc = strategy_config(cfg, ctx, ii);
    const auto picks = sample_intervals(cfg, ds);

    std::vector<std::vector<double>> train_loads;
    std::vector<int> train_labels;
    for (const auto& r : ds.rows)
        if (r.fold >= 0) {
            train_loads.push_back(r.loads.L);
            train_labels.push_back(r.label);
        }
    const Eigen::VectorXd p_bar = empirical_probabilities(train_labels, K);

    const std::string prov = cfg.provenance();
    std::vector<std::string> xnames;
    for (std::size_t v = 0; v < sc.decision_size(); ++v) xnames.push_back("x" + std::to_string(v + 1));
    std::string bids = prov + "interval,scenario,strategy,status,surrogate_z,iterations,start,grid_slack," + io::join(xnames, ",") + "\n";
    std::string traces = prov + "interval,scenario,strategy,iteration,z\n";
    OptimizeSummary sum;
    sum.intervals = picks.size();

    for (std::size_t n = 0; n < picks.size(); ++n) {
        const auto& row = ds.rows[picks[n]];
        const auto starts = default_starts(ctx.net, row.bids, sc);
        auto problem = [&](const LevelModel& lm) {
            SurrogateProblem sp;
            sp.network = &ctx.net;
            sp.spec = lm.spec;
            sp.classifier = &lm.classifier;
            sp.models = &lm.parametric;
            sp.bids = row.bids;
            sp.loads = row.loads;
            sp.config = sc;
            return sp;
        };
        for (auto id : cfg.strategies) {
            BidResult res;
            double slack = 0.0;
            std::string status = "ok";
            try {
                switch (id) {
                case StrategyId::oracle: {
                    OracleOptions oo;
                    oo.grid_points = cfg.oracle_grid;
                    auto o = oracle_best_bid(ctx.net, ctx.ptdf, row.bids, row.loads, ctx.loss, sc, oo);
                    res = o.bid;
                    slack = o.grid_slack;
                    break;
                }
                case StrategyId::rdc: {
                    int k = rdc_pattern(train_loads, train_labels, row.loads.L, K, cfg.rdc_neighbors);
                    res = rdc_like_strategy(problem(*ii), k, starts);
                    break;
                }
                case StrategyId::level_II: res = learned_strategy(problem(models.at(InfoLevel::II)), starts); break;
                case StrategyId::level_III: res = learned_strategy(problem(models.at(InfoLevel::III)), starts); break;
                case StrategyId::level_IV: res = learned_strategy(problem(models.at(InfoLevel::IV)), starts); break;
                case StrategyId::level_V: res = level_v_strategy(problem(*ii), p_bar, starts); break;
                }
            } catch (const Error& e) {
                status = detail::csv_safe(std::string("error: ") + e.what());
                ++sum.failures;
                if (run.log) *run.log << "interval " << n << " " << to_string(id) << ": " << e.what() << "\n";
            }
            std::vector<std::string> cells{std::to_string(n), std::to_string(row.id), to_string(id), status,
                                           res.x.empty() ? "nan" : io::fmt(res.z), std::to_string(res.iterations),
                                           std::to_string(res.start_index), io::fmt(slack)};
            for (std::size_t v = 0; v < sc.decision_size(); ++v) cells.push_back(res.x.empty() ? "nan" : io::fmt(res.x[v]));
            bids += io::join(cells, ",") + "\n";
            for (std::size_t it = 0; it < res.trace.size(); ++it)
                traces += std::to_string(n) + "," + std::to_string(row.id) + "," + to_string(id) + "," + std::to_string(it) + "," +
                          io::fmt(res.trace[it]) + "\n";
        }
    }
    io::write_file(out_path(cfg, "bids.csv"), bids);
    if (run.emit_plot_data) io::write_file(out_path(cfg, "traces.csv"), traces);
    nlohmann::json j;
    j["provenance"] = cfg.provenance_json();
    j["intervals"] = sum.intervals;
    j["failures"] = sum.failures;
    j["p_bar"] = std::vector<double>(p_bar.data(), p_bar.data() + p_bar.size());
    write_json(out_path(cfg, "optimize.json"), j);
    if (run.log) *run.log << "optimize: " << sum.intervals << " intervals, " << sum.failures << " failures\n";
    return sum;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluationSummary {
    std::vector<StrategyOutcome> table;
    std::vector<double> grid_slack;  // per interval
    double mean_grid_slack = 0.0;
};

inline std::string format_table(const std::vector<StrategyOutcome>& table, double mean_slack) {
    std::ostringstream os;
    os << std::left << std::setw(12) << "strategy" << std::right << std::setw(16) << "mean revenue" << std::setw(12)
       << "% oracle" << std::setw(12) << "infeasible" << "\n";
    for (const auto& r : table) {
        os << std::left << std::setw(12) << to_string(r.id) << std::right << std::fixed << std::setprecision(2) << std::setw(16)
           << r.mean << std::setw(12) << r.pct_of_oracle << std::setw(12) << r.infeasible_count() << "\n";
    }
    os << "mean oracle grid slack: " << std::fixed << std::setprecision(4) << mean_slack << "\n";
    return os.str();
}

inline EvaluationSummary cmd_evaluate(const ExperimentConfig& cfg, const RunOptions& run = {}) {
    const auto ctx = make_context(cfg);
    const auto ds = load_dataset(cfg, ctx);
    read_manifest(cfg, "optimize.json", "optimize", true);
    const StrategyConfig sc = [&] {
        StrategyConfig s = strategy_config(cfg, ctx, nullptr);
        return s;
    }();
    auto bt = io::parse_csv(read_stage_file(cfg, "bids.csv", "optimize"));
    const int c_int = bt.column("interval"), c_sc = bt.column("scenario"), c_st = bt.column("strategy"), c_status = bt.column("status"),
              c_slack = bt.column("grid_slack");
    std::vector<int> xc;
    for (std::size_t v = 0; v < sc.decision_size(); ++v) xc.push_back(bt.column("x" + std::to_string(v + 1)));
    std::map<int, std::size_t> row_of;
    for (std::size_t t = 0; t < ds.rows.size(); ++t) row_of[ds.rows[t].id] = t;

    const std::string prov = cfg.provenance();
    std::string per = prov + "interval,scenario,strategy,revenue,infeasible,grid_slack,fingerprint\n";
    std::string opf = prov + "strategy," +
                      opf_csv_header(ctx.shape.dispatch_size(), ctx.net.branches.size(), ctx.net.num_buses()) + "\n";
    std::map<StrategyId, StrategyOutcome> rows;
    EvaluationSummary sum;
    for (const auto& r : bt.rows) {
        const auto at = [&](int c) { return r[static_cast<std::size_t>(c)]; };
        const int interval = std::stoi(at(c_int));
        const int scenario = std::stoi(at(c_sc));
        const StrategyId id = parse_strategy(at(c_st));
        auto it = row_of.find(scenario);
        if (it == row_of.end()) throw ConfigError("bids.csv names an unknown scenario");
        const auto& row = ds.rows[it->second];
        double revenue = 0.0;
        bool infeasible = true;
        std::string fp;
        if (at(c_status) == "ok") {
            std::vector<double> x;
            for (int c : xc) x.push_back(io::parse_double(at(c)));
            auto s = settle(ctx.net, ctx.ptdf, row.bids, row.loads, ctx.loss, sc, x);
            revenue = s.revenue;
            infeasible = s.infeasible;
            if (!s.infeasible) {
                fp = extract_pattern(s.solution);
                opf += to_string(id) + "," + opf_csv_row(interval, s.solution) + "\n";
            }
        }
        const double slack = io::parse_double(at(c_slack));
        if (id == StrategyId::oracle) sum.grid_slack.push_back(slack);
        per += std::to_string(interval) + "," + std::to_string(scenario) + "," + to_string(id) + "," + io::fmt(revenue) + "," +
               (infeasible ? "1" : "0") + "," + io::fmt(slack) + "," + fp + "\n";
        rows[id].revenue.push_back(revenue);
        rows[id].infeasible.push_back(infeasible);
    }
    if (rows.empty()) throw ValidationError("bids.csv has no rows");
    sum.table = summarize_outcomes(rows);
    if (!sum.grid_slack.empty())
        sum.mean_grid_slack = std::accumulate(sum.grid_slack.begin(), sum.grid_slack.end(), 0.0) / static_cast<double>(sum.grid_slack.size());
    io::write_file(out_path(cfg, "intervals.csv"), per);
    io::write_file(out_path(cfg, "settlement_opf.csv"), opf);
    io::write_file(out_path(cfg, "results.csv"), prov + results_csv(sum.table, cfg.form, cfg.lossy));
    io::write_file(out_path(cfg, "summary.txt"), prov + format_table(sum.table, sum.mean_grid_slack));
    nlohmann::json j;
    j["provenance"] = cfg.provenance_json();
    j["mean_grid_slack"] = sum.mean_grid_slack;
    nlohmann::json means = nlohmann::json::object();
    for (const auto& r : sum.table) means[to_string(r.id)] = r.mean;
    j["mean_revenue"] = means;
    write_json(out_path(cfg, "evaluate.json"), j);
    if (run.log) *run.log << format_table(sum.table, sum.mean_grid_slack);
    return sum;
}

// ---------------------------------------------------------------------------
// report

inline std::string cmd_report(const ExperimentConfig& cfg, const RunOptions& run = {}) {
    read_manifest(cfg, "evaluate.json", "evaluate", true);
    auto met = io::parse_csv(read_stage_file(cfg, "metrics.csv", "train"));
    auto res = io::parse_csv(read_stage_file(cfg, "results.csv", "evaluate"));
    const auto seeds = cfg.seeds();
    std::ostringstream os;
    os << "experiment " << cfg.digest() << " (" << to_string(cfg.form) << ", " << (cfg.lossy ? "lossy" : "lossless") << ")\n";
    os << "seeds: seed=" << cfg.seed << " scenario=" << seeds.scenario << " split=" << seeds.split << " svm=" << seeds.svm
       << " interval=" << seeds.interval << "\n\n";
    os << "classification accuracy (%)\n";
    os << std::left << std::setw(8) << "level" << std::right << std::setw(10) << "C" << std::setw(10) << "SVM" << std::setw(10)
       << "dummy1" << std::setw(10) << "dummy2" << "\n";
    for (const auto& r : met.rows) {
        auto v = [&](const char* c) { return io::parse_double(r[static_cast<std::size_t>(met.column(c))]); };
        os << std::left << std::setw(8) << r[static_cast<std::size_t>(met.column("level"))] << std::right << std::setw(10)
           << r[static_cast<std::size_t>(met.column("C"))] << std::fixed << std::setprecision(2) << std::setw(10)
           << 100 * v("accuracy") << std::setw(10) << 100 * v("dummy1") << std::setw(10) << 100 * v("dummy2") << "\n";
    }
    os << "\naverage revenue\n";
    os << std::left << std::setw(12) << "strategy" << std::right << std::setw(16) << "mean revenue" << std::setw(12) << "% oracle"
       << std::setw(12) << "infeasible" << "\n";
    for (const auto& r : res.rows) {
        auto at = [&](const char* c) { return r[static_cast<std::size_t>(res.column(c))]; };
        os << std::left << std::setw(12) << at("strategy") << std::right << std::fixed << std::setprecision(2) << std::setw(16)
           << io::parse_double(at("mean_revenue")) << std::setw(12) << io::parse_double(at("pct_of_oracle")) << std::setw(12)
           << at("infeasible") << "\n";
    }
    const std::string text = os.str();
    io::write_file(out_path(cfg, "report.txt"), cfg.provenance() + text);
    if (run.log) *run.log << text;
    return text;
}

} // namespace poolbid
