#pragma once

// Comparison strategies and their settlement under the true market clearing.

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "poolbid/bid_optimizer.hpp"
#include "poolbid/io.hpp"
#include "poolbid/opf.hpp"

namespace poolbid {

enum class StrategyId { oracle, rdc, level_II, level_III, level_IV, level_V };

/// Table column order: perfect-information benchmark, RDC, II, III, IV, V.
inline const std::vector<StrategyId>& all_strategies() {
    static const std::vector<StrategyId> v{StrategyId::oracle,    StrategyId::rdc,      StrategyId::level_II,
                                           StrategyId::level_III, StrategyId::level_IV, StrategyId::level_V};
    return v;
}

inline std::string to_string(StrategyId s) {
    switch (s) {
    case StrategyId::oracle: return "oracle";
    case StrategyId::rdc: return "rdc";
    case StrategyId::level_II: return "level_II";
    case StrategyId::level_III: return "level_III";
    case StrategyId::level_IV: return "level_IV";
    case StrategyId::level_V: return "level_V";
    }
    return "?";
}

inline StrategyId parse_strategy(const std::string& s) {
    for (auto id : all_strategies())
        if (to_string(id) == s) return id;
    throw ConfigError("unknown strategy '" + s + "'");
}

/// Ties left by the isotonic projection are opened by `gap` so the market sees strictly increasing blocks.
inline void separate_block_ties(BidSet& bids, double gap = 1e-6) {
    if (bids.form != BidForm::block) return;
    for (auto& o : bids.block)
        for (std::size_t b = 1; b < o.price.size(); ++b)
            if (o.price[b] < o.price[b - 1] + gap) o.price[b] = o.price[b - 1] + gap;
}

struct Settlement {
    double revenue = 0.0;
    bool infeasible = false;
    OpfSolution solution;
};

/// Genco profit at a cleared market: sum over its generators of pi_bus q_g - h_g(q_g).
inline double genco_profit(const NetworkCase& c, const OpfSolution& s, const StrategyConfig& cfg) {
    double r = 0.0;
    for (std::size_t k = 0; k < cfg.genco.size(); ++k) {
        const auto g = static_cast<std::size_t>(cfg.genco[k]);
        const double q = s.generator_output(g);
        r += s.lmp[static_cast<Eigen::Index>(c.bus_index(c.generators[g].bus))] * q - cfg.cost[k](q);
    }
    return r;
}

inline Settlement settle(const NetworkCase& c, const PtdfMatrix& ptdf, BidSet bids, const LoadVector& loads,
                         const LossModel& loss, const StrategyConfig& cfg, const std::vector<double>& x) {
    apply_decision(bids, cfg.genco, x);
    separate_block_ties(bids);
    Settlement out;
    try {
        out.solution = solve_opf(c, ptdf, bids, loads, loss);
        out.revenue = genco_profit(c, out.solution, cfg);
    } catch (const InfeasibleError&) {
        out.infeasible = true;
        out.revenue = 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Perfect-information benchmark

struct OracleOptions {
    int grid_points = 9;      // per decision variable
    int refine_iterations = 100;
    double min_step = 1e-4;   // fraction of the grid spacing
};

struct OracleResult {
    BidResult bid;
    double grid_slack = 0.0;  // largest revenue change from the best grid point to an axis neighbour
    int evaluations = 0;
};

inline OracleResult oracle_best_bid(const NetworkCase& c, const PtdfMatrix& ptdf, const BidSet& bids, const LoadVector& loads,
                                    const LossModel& loss, const StrategyConfig& cfg, const OracleOptions& opt = {}) {
    cfg.validate();
    if (opt.grid_points < 2) throw ValidationError("oracle grid needs at least 2 points per variable");
    const std::size_t d = cfg.decision_size();
    std::vector<double> spacing(d);
    for (std::size_t v = 0; v < d; ++v) spacing[v] = (cfg.upper[v] - cfg.lower[v]) / (opt.grid_points - 1);

    OracleResult res;
    auto revenue = [&](const std::vector<double>& x, bool& feasible) {
        ++res.evaluations;
        Settlement s = settle(c, ptdf, bids, loads, loss, cfg, x);
        feasible = !s.infeasible;
        return s.revenue;
    };

    // (a) exhaustive grid
    std::map<std::vector<int>, double> grid_value;
    std::vector<int> idx(d, 0), best_idx;
    double best = -HUGE_VAL;
    for (;;) {
        std::vector<double> x(d);
        for (std::size_t v = 0; v < d; ++v) x[v] = cfg.lower[v] + spacing[v] * idx[v];
        if (is_feasible(x, cfg)) {
            bool ok = false;
            double r = revenue(x, ok);
            if (ok) {
                grid_value[idx] = r;
                if (r > best) {
                    best = r;
                    best_idx = idx;
                    res.bid.x = x;
                }
            }
        }
        std::size_t v = 0;
        while (v < d && ++idx[v] == opt.grid_points) idx[v++] = 0;
        if (v == d) break;
    }
    if (best_idx.empty()) throw InfeasibleError("infeasible interval: no grid bid clears the market");
    for (std::size_t v = 0; v < d; ++v)
        for (int s : {-1, 1}) {
            auto n = best_idx;
            n[v] += s;
            auto it = grid_value.find(n);
            if (it != grid_value.end()) res.grid_slack = std::max(res.grid_slack, std::abs(it->second - best));
        }
    res.bid.trace.push_back(best);

    // (b) finite-difference ascent with step halving from the best grid point
    std::vector<double> x = res.bid.x;
    double fx = best;
    double step = 0.5;  // in units of the grid spacing
    for (int it = 0; it < opt.refine_iterations && step >= opt.min_step; ++it) {
        std::vector<double> g(d, 0.0);
        double norm = 0.0;
        for (std::size_t v = 0; v < d; ++v) {
            const double h = 1e-4 * std::max(spacing[v], 1e-9);
            auto xp = x, xm = x;
            xp[v] = std::min(xp[v] + h, cfg.upper[v]);
            xm[v] = std::max(xm[v] - h, cfg.lower[v]);
            if (xp[v] == xm[v]) continue;
            bool okp = false, okm = false;
            const double rp = is_feasible(xp, cfg) ? revenue(xp, okp) : 0.0;
            const double rm = is_feasible(xm, cfg) ? revenue(xm, okm) : 0.0;
            if (!okp || !okm) continue;
            g[v] = (rp - rm) / (xp[v] - xm[v]) * spacing[v];
            norm += g[v] * g[v];
        }
        norm = std::sqrt(norm);
        if (!(norm > 0.0)) break;
        bool improved = false;
        while (step >= opt.min_step) {
            std::vector<double> y(d);
            for (std::size_t v = 0; v < d; ++v) y[v] = x[v] + step * spacing[v] * g[v] / norm;
            y = project_feasible(y, cfg);
            bool ok = false;
            const double fy = revenue(y, ok);
            if (ok && fy > fx) {
                x = y;
                fx = fy;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        res.bid.trace.push_back(fx);
        if (!improved) break;
    }
    res.bid.x = x;
    res.bid.z = fx;
    res.bid.realized_revenue = fx;
    res.bid.iterations = static_cast<int>(res.bid.trace.size());
    return res;
}

// ---------------------------------------------------------------------------
// Learned strategies

/// Empirical frequencies of the retained classes among labelled rows (labels < 0 are ignored).
inline Eigen::VectorXd empirical_probabilities(const std::vector<int>& labels, int K) {
    Eigen::VectorXd p = Eigen::VectorXd::Zero(K);
    double n = 0.0;
    for (int l : labels)
        if (l >= 0 && l < K) {
            p[l] += 1.0;
            n += 1.0;
        }
    if (n == 0.0) throw ValidationError("no labelled rows for empirical probabilities");
    return p / n;
}

/// Level V: the surrogate with p fixed at the empirical frequencies and no probability gradient.
inline BidResult level_v_strategy(SurrogateProblem sp, const Eigen::VectorXd& p_bar,
                                  const std::vector<std::vector<double>>& starts) {
    sp.classifier = nullptr;
    sp.fixed_p = p_bar;
    return optimize_multistart(starts, surrogate_objective(sp), sp.config);
}

/// Classifier-driven strategy (information levels II-IV).
inline BidResult learned_strategy(const SurrogateProblem& sp, const std::vector<std::vector<double>>& starts) {
    if (!sp.classifier) throw ValidationError("learned strategy needs a classifier");
    return optimize_multistart(starts, surrogate_objective(sp), sp.config);
}

/// Modal retained pattern among the `neighbors` training rows whose load vectors are closest to `load`.
inline int rdc_pattern(const std::vector<std::vector<double>>& train_loads, const std::vector<int>& train_labels,
                       const std::vector<double>& load, int K, int neighbors = 50) {
    if (train_loads.size() != train_labels.size()) throw ValidationError("load/label count mismatch");
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t t = 0; t < train_loads.size(); ++t) {
        if (train_labels[t] < 0) continue;
        double d = 0.0;
        for (std::size_t i = 0; i < load.size(); ++i) d += (train_loads[t][i] - load[i]) * (train_loads[t][i] - load[i]);
        dist.emplace_back(d, t);
    }
    if (dist.empty()) throw ValidationError("no neighbors with retained patterns");
    const auto n = std::min<std::size_t>(dist.size(), static_cast<std::size_t>(neighbors));
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(n), dist.end());
    std::vector<int> votes(static_cast<std::size_t>(K), 0);
    for (std::size_t k = 0; k < n; ++k) ++votes[static_cast<std::size_t>(train_labels[dist[k].second])];
    return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

/// Fixed congestion status: p is the indicator of the neighbourhood's modal pattern.
inline BidResult rdc_like_strategy(SurrogateProblem sp, int pattern, const std::vector<std::vector<double>>& starts) {
    const int K = sp.classifier ? sp.classifier->K : static_cast<int>(sp.fixed_p.size());
    if (pattern < 0 || pattern >= K) throw ValidationError("pattern outside the retained set");
    sp.classifier = nullptr;
    sp.fixed_p = Eigen::VectorXd::Zero(K);
    sp.fixed_p[pattern] = 1.0;
    return optimize_multistart(starts, surrogate_objective(sp), sp.config);
}

// ---------------------------------------------------------------------------
// Tables

struct StrategyOutcome {
    StrategyId id = StrategyId::oracle;
    std::vector<double> revenue;     // per interval
    std::vector<bool> infeasible;
    double mean = 0.0;
    double pct_of_oracle = 0.0;

    int infeasible_count() const { return static_cast<int>(std::count(infeasible.begin(), infeasible.end(), true)); }
};

/// Means and percentages relative to the oracle row; rows follow the table column order.
inline std::vector<StrategyOutcome> summarize_outcomes(std::map<StrategyId, StrategyOutcome> rows) {
    auto oracle = rows.find(StrategyId::oracle);
    for (auto& [id, row] : rows) {
        if (row.revenue.empty()) throw ValidationError("strategy without evaluated intervals");
        row.id = id;
        row.mean = std::accumulate(row.revenue.begin(), row.revenue.end(), 0.0) / static_cast<double>(row.revenue.size());
        if (row.infeasible.size() != row.revenue.size()) row.infeasible.assign(row.revenue.size(), false);
    }
    std::vector<StrategyOutcome> out;
    for (auto id : all_strategies()) {
        auto it = rows.find(id);
        if (it == rows.end()) continue;
        it->second.pct_of_oracle = oracle != rows.end() && oracle->second.mean != 0.0
                                       ? 100.0 * it->second.mean / oracle->second.mean
                                       : std::nan("");
        out.push_back(it->second);
    }
    return out;
}

inline std::string results_csv(const std::vector<StrategyOutcome>& rows, BidForm form, bool lossy) {
    std::string s = "strategy,form,loss,intervals,mean_revenue,pct_of_oracle,infeasible\n";
    for (const auto& r : rows)
        s += to_string(r.id) + "," + to_string(form) + "," + (lossy ? "lossy" : "lossless") + "," +
             std::to_string(r.revenue.size()) + "," + io::fmt(r.mean) + "," + io::fmt(r.pct_of_oracle) + "," +
             std::to_string(r.infeasible_count()) + "\n";
    return s;
}

} // namespace poolbid
