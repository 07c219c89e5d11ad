#pragma once

// Expected-revenue surrogate over retained patterns and its normalized projected gradient ascent.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "poolbid/classifier.hpp"
#include "poolbid/pattern_lab.hpp"
#include "poolbid/prob_gradient.hpp"
#include "poolbid/scenario.hpp"

namespace poolbid {

/// Private production cost h(q) = c2 q^2 + c1 q.
struct CostCurve {
    double c2 = 0.05;
    double c1 = 5.0;

    double operator()(double q) const { return c2 * q * q + c1 * q; }
    double marginal(double q) const { return 2.0 * c2 * q + c1; }
};

struct StrategyConfig {
    std::vector<int> genco;          // generator indices owned by the strategist
    std::vector<CostCurve> cost;     // one per genco generator
    std::vector<double> lower;       // per decision variable
    std::vector<double> upper;
    BidForm form = BidForm::quadratic;
    std::size_t blocks = 1;          // blocks per generator (block form)
    std::vector<double> step_scale;  // raw units per scaled unit; empty = 1
    double eta = 0.01;
    int max_iter = 200;
    std::uint64_t seed = 1;

    std::size_t decision_size() const { return genco.size() * (form == BidForm::block ? 2 * blocks : 1); }
    void validate() const {
        if (genco.empty()) throw ValidationError("empty genco");
        if (cost.size() != genco.size()) throw ValidationError("one cost curve per genco generator");
        if (lower.size() != decision_size() || upper.size() != decision_size()) throw ValidationError("bound dimension mismatch");
        for (std::size_t v = 0; v < lower.size(); ++v) {
            if (!std::isfinite(lower[v]) || !std::isfinite(upper[v])) throw ValidationError("bounds must be finite");
            if (lower[v] > upper[v]) throw ValidationError("empty feasible set");
        }
        if (!(eta > 0.0)) throw ValidationError("eta must be positive");
        if (max_iter < 1) throw ValidationError("max_iter must be at least 1");
        if (!step_scale.empty() && step_scale.size() != decision_size()) throw ValidationError("step scale dimension mismatch");
    }
};

/// Prices in [0, factor h'(p_max)] per generator; block caps in [0, p_max / B].
inline void default_bounds(const NetworkCase& c, StrategyConfig& cfg, double price_cap_factor = 10.0) {
    if (!(price_cap_factor > 0.0)) throw ValidationError("price cap factor must be positive");
    cfg.lower.clear();
    cfg.upper.clear();
    for (std::size_t k = 0; k < cfg.genco.size(); ++k) {
        const auto& g = c.generators.at(static_cast<std::size_t>(cfg.genco[k]));
        const double cap = price_cap_factor * cfg.cost.at(k).marginal(g.p_max);
        if (cfg.form == BidForm::quadratic) {
            cfg.lower.push_back(0.0);
            cfg.upper.push_back(cap);
        } else {
            for (std::size_t b = 0; b < cfg.blocks; ++b) {
                cfg.lower.push_back(0.0);
                cfg.upper.push_back(cap);
            }
            for (std::size_t b = 0; b < cfg.blocks; ++b) {
                cfg.lower.push_back(0.0);
                cfg.upper.push_back(g.p_max / static_cast<double>(cfg.blocks));
            }
        }
    }
}

/// Nondecreasing least-squares fit of v (pool-adjacent-violators, unit weights).
inline void pool_adjacent_violators(double* v, std::size_t n) {
    std::vector<double> level;
    std::vector<std::size_t> width;
    for (std::size_t i = 0; i < n; ++i) {
        level.push_back(v[i]);
        width.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const std::size_t w = width[width.size() - 2] + width.back();
            const double m = (level[level.size() - 2] * static_cast<double>(width[width.size() - 2]) +
                              level.back() * static_cast<double>(width.back())) / static_cast<double>(w);
            level.pop_back();
            width.pop_back();
            level.back() = m;
            width.back() = w;
        }
    }
    std::size_t i = 0;
    for (std::size_t b = 0; b < level.size(); ++b)
        for (std::size_t k = 0; k < width[b]; ++k) v[i++] = level[b];
}

/// Clip to the boxes, then make each generator's block prices nondecreasing.
inline std::vector<double> project_feasible(std::vector<double> x, const StrategyConfig& cfg) {
    if (x.size() != cfg.decision_size()) throw ValidationError("decision vector dimension mismatch");
    for (std::size_t v = 0; v < x.size(); ++v) {
        if (cfg.lower[v] > cfg.upper[v]) throw ValidationError("empty feasible set");
        x[v] = std::clamp(x[v], cfg.lower[v], cfg.upper[v]);
    }
    if (cfg.form == BidForm::block) {
        const std::size_t per = 2 * cfg.blocks;
        for (std::size_t k = 0; k < cfg.genco.size(); ++k) pool_adjacent_violators(x.data() + k * per, cfg.blocks);
    }
    return x;
}

inline bool is_feasible(const std::vector<double>& x, const StrategyConfig& cfg) {
    if (x.size() != cfg.decision_size()) return false;
    for (std::size_t v = 0; v < x.size(); ++v)
        if (x[v] < cfg.lower[v] || x[v] > cfg.upper[v]) return false;
    if (cfg.form == BidForm::block)
        for (std::size_t k = 0; k < cfg.genco.size(); ++k)
            for (std::size_t b = 1; b < cfg.blocks; ++b)
                if (x[k * 2 * cfg.blocks + b] < x[k * 2 * cfg.blocks + b - 1]) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Surrogate

/// Everything the surrogate needs for one market interval. Without a classifier the pattern
/// probabilities are the constant `fixed_p` and carry no gradient.
struct SurrogateProblem {
    const NetworkCase* network = nullptr;
    FeatureSpec spec;
    const OvoClassifier* classifier = nullptr;
    Eigen::VectorXd fixed_p;
    const ParametricModel* models = nullptr;
    BidSet bids;          // interval bids; the genco's entries are overwritten by the decision
    LoadVector loads;
    StrategyConfig config;
};

struct SurrogateValue {
    double z = 0.0;
    std::vector<double> gradient;   // d z / d x over the genco's decision variables
    Eigen::VectorXd p;
    Eigen::VectorXd profit;         // per pattern
};

inline int num_patterns(const SurrogateProblem& sp) {
    return sp.classifier ? sp.classifier->K : static_cast<int>(sp.fixed_p.size());
}

inline SurrogateValue evaluate_surrogate(const SurrogateProblem& sp, const std::vector<double>& x, bool with_gradient = true) {
    if (!sp.network || !sp.models) throw ValidationError("surrogate needs a network and fitted models");
    const auto& cfg = sp.config;
    BidSet bids = sp.bids;
    apply_decision(bids, cfg.genco, x);
    const std::vector<double> f = build_feature_vector(sp.spec, bids, sp.loads);
    const Eigen::Map<const Eigen::VectorXd> fv(f.data(), static_cast<Eigen::Index>(f.size()));
    const std::vector<int> pos = decision_positions(sp.spec, bids);
    const int K = num_patterns(sp);
    const std::size_t B = bids.blocks_per_generator();

    SurrogateValue out;
    std::optional<GradientBundle> grad_p;
    if (sp.classifier) {
        ProbOutput prob = predict_proba(*sp.classifier, f);
        out.p = prob.p;
        if (with_gradient) grad_p = grad_probabilities(prob, *sp.classifier, f);
    } else {
        out.p = sp.fixed_p;
    }
    // Renormalize over the retained patterns (guards rounding in the coupled output).
    const double mass = out.p.sum();
    if (!(mass > 0.0)) throw NumericalError("pattern probabilities vanish");
    out.p /= mass;

    out.profit = Eigen::VectorXd::Zero(K);
    out.gradient.assign(x.size(), 0.0);
    for (int k = 0; k < K; ++k) {
        if (!sp.models->has(k)) throw ValidationError("missing model for retained pattern " + std::to_string(k));
        const auto& m = sp.models->at(k);
        if (m.price.coef.cols() != fv.size()) throw ValidationError("model feature dimension mismatch");
        const Eigen::VectorXd price = m.price(fv);
        const Eigen::VectorXd disp = m.dispatch(fv);
        std::vector<double> dprofit(x.size(), 0.0);
        for (std::size_t gi = 0; gi < cfg.genco.size(); ++gi) {
            const auto g = static_cast<std::size_t>(cfg.genco[gi]);
            const auto bus = static_cast<Eigen::Index>(sp.network->bus_index(sp.network->generators.at(g).bus));
            double q = 0.0;
            for (std::size_t b = 0; b < B; ++b) q += disp[static_cast<Eigen::Index>(g * B + b)];
            const double pi = price[bus];
            const auto& h = cfg.cost[gi];
            out.profit[k] += pi * q - h(q);
            if (!with_gradient) continue;
            for (std::size_t v = 0; v < x.size(); ++v) {
                const Eigen::Index col = pos[v];
                double dq = 0.0;
                for (std::size_t b = 0; b < B; ++b) dq += m.dispatch.coef(static_cast<Eigen::Index>(g * B + b), col);
                dprofit[v] += m.price.coef(bus, col) * q + (pi - h.marginal(q)) * dq;
            }
        }
        out.z += out.p[k] * out.profit[k];
        if (!with_gradient) continue;
        for (std::size_t v = 0; v < x.size(); ++v) {
            out.gradient[v] += out.p[k] * dprofit[v];
            if (grad_p) out.gradient[v] += grad_p->grad_p(k, pos[v]) * out.profit[k] / mass;
        }
    }
    if (grad_p && with_gradient) {
        // d(p/mass) = dp/mass - p dmass/mass^2; mass is 1 up to rounding, so the second term is carried explicitly.
        Eigen::VectorXd dmass = grad_p->grad_p.colwise().sum().transpose();
        for (std::size_t v = 0; v < x.size(); ++v) out.gradient[v] -= dmass[pos[v]] / mass * out.z;
    }
    return out;
}

inline double surrogate_revenue(const SurrogateProblem& sp, const std::vector<double>& x) {
    return evaluate_surrogate(sp, x, false).z;
}

inline std::vector<double> surrogate_revenue_gradient(const SurrogateProblem& sp, const std::vector<double>& x) {
    return evaluate_surrogate(sp, x, true).gradient;
}

// ---------------------------------------------------------------------------
// Ascent

struct BidResult {
    std::vector<double> x;              // best iterate
    double z = -std::numeric_limits<double>::infinity();
    std::vector<double> trace;          // objective at each evaluated iterate
    int iterations = 0;
    int start_index = 0;                // which multi-start produced x
    double realized_revenue = std::numeric_limits<double>::quiet_NaN();
    bool infeasible = false;            // realized OPF had no solution
};

/// Returns z and writes the gradient.
using Objective = std::function<double(const std::vector<double>&, std::vector<double>&)>;

/// x <- P(x + eta S g_s / |g_s|) with g_s = S g, S = diag(step_scale); best-so-far is returned.
inline BidResult optimize_bid(std::vector<double> x, const Objective& objective, const StrategyConfig& cfg) {
    cfg.validate();
    x = project_feasible(std::move(x), cfg);
    std::vector<double> scale = cfg.step_scale.empty() ? std::vector<double>(x.size(), 1.0) : cfg.step_scale;
    BidResult res;
    std::vector<double> g;
    for (int it = 0; it < cfg.max_iter; ++it) {
        g.assign(x.size(), 0.0);
        const double z = objective(x, g);
        res.trace.push_back(z);
        res.iterations = it + 1;
        if (z > res.z) {
            res.z = z;
            res.x = x;
        }
        double norm = 0.0;
        for (std::size_t v = 0; v < x.size(); ++v) norm += (scale[v] * g[v]) * (scale[v] * g[v]);
        norm = std::sqrt(norm);
        if (!(norm >= 1e-12)) break;
        for (std::size_t v = 0; v < x.size(); ++v) x[v] += cfg.eta * scale[v] * (scale[v] * g[v]) / norm;
        x = project_feasible(std::move(x), cfg);
    }
    return res;
}

inline BidResult optimize_multistart(const std::vector<std::vector<double>>& starts, const Objective& objective,
                                     const StrategyConfig& cfg) {
    if (starts.empty()) throw ValidationError("no start points");
    BidResult best;
    for (std::size_t s = 0; s < starts.size(); ++s) {
        BidResult r = optimize_bid(starts[s], objective, cfg);
        r.start_index = static_cast<int>(s);
        if (s == 0 || r.z > best.z) best = std::move(r);
    }
    return best;
}

inline Objective surrogate_objective(const SurrogateProblem& sp) {
    return [&sp](const std::vector<double>& x, std::vector<double>& g) {
        SurrogateValue v = evaluate_surrogate(sp, x, true);
        g = std::move(v.gradient);
        return v.z;
    };
}

/// Current bid, cost-reflective bid and box midpoint.
inline std::vector<std::vector<double>> default_starts(const NetworkCase& c, const BidSet& bids, const StrategyConfig& cfg) {
    std::vector<std::vector<double>> starts;
    starts.push_back(extract_decision(bids, cfg.genco));
    std::vector<double> cost;
    for (std::size_t k = 0; k < cfg.genco.size(); ++k) {
        const auto& g = c.generators.at(static_cast<std::size_t>(cfg.genco[k]));
        if (cfg.form == BidForm::quadratic) {
            cost.push_back(cfg.cost[k].c1);
        } else {
            const double width = g.p_max / static_cast<double>(cfg.blocks);
            for (std::size_t b = 0; b < cfg.blocks; ++b) cost.push_back(cfg.cost[k].marginal((static_cast<double>(b) + 0.5) * width));
            for (std::size_t b = 0; b < cfg.blocks; ++b) cost.push_back(width);
        }
    }
    starts.push_back(cost);
    std::vector<double> mid(cfg.lower.size());
    for (std::size_t v = 0; v < mid.size(); ++v) mid[v] = 0.5 * (cfg.lower[v] + cfg.upper[v]);
    starts.push_back(mid);
    for (auto& s : starts) s = project_feasible(s, cfg);
    return starts;
}

} // namespace poolbid
