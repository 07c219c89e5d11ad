#pragma once

// Offer and demand data for one market interval.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "poolbid/case_model.hpp"
#include "poolbid/error.hpp"

namespace poolbid {

enum class BidForm { block, quadratic };

inline std::string to_string(BidForm f) { return f == BidForm::block ? "block" : "quadratic"; }
inline BidForm parse_bid_form(const std::string& s) {
    if (s == "block") return BidForm::block;
    if (s == "quadratic") return BidForm::quadratic;
    throw ConfigError("unknown bid form '" + s + "'");
}

/// Stepwise offer of one generator: block b sells up to q_upper[b] MW at price[b] $/MWh.
struct BlockOffer {
    std::vector<double> price;
    std::vector<double> q_upper;
    std::vector<double> q_lower;
};

/// Quadratic offer: cost 0.5*a*q^2 + b*q over [q_lower, q_upper].
struct QuadraticOffer {
    double a = 0.0;
    double b = 0.0;
    double q_upper = 0.0;
    double q_lower = 0.0;
};

/// One offer per generator of the case, in generator order.
struct BidSet {
    BidForm form = BidForm::quadratic;
    std::vector<BlockOffer> block;
    std::vector<QuadraticOffer> quadratic;

    std::size_t num_generators() const { return form == BidForm::block ? block.size() : quadratic.size(); }
    std::size_t blocks_per_generator() const {
        return form == BidForm::block ? (block.empty() ? 0 : block.front().price.size()) : 1;
    }
    /// Length of the dispatch vector P_G.
    std::size_t dispatch_size() const { return num_generators() * blocks_per_generator(); }
};

/// Nodal demand in MW, indexed by bus position.
struct LoadVector {
    std::vector<double> L;

    double total() const {
        double s = 0.0;
        for (double v : L) s += v;
        return s;
    }
};

/// Fixed-factor linearized losses. Total loss sum_i loss_sensitivity[i] * P_i is withdrawn
/// from the network according to `distribution`.
struct LossModel {
    bool enabled = false;
    std::vector<double> loss_sensitivity;
    std::vector<double> distribution;

    static LossModel lossless() { return {}; }

    /// Same sensitivity at every bus; losses withdrawn at the slack.
    static LossModel uniform(const NetworkCase& c, double sensitivity) {
        LossModel m;
        m.enabled = true;
        m.loss_sensitivity.assign(c.num_buses(), sensitivity);
        m.distribution.assign(c.num_buses(), 0.0);
        m.distribution[static_cast<std::size_t>(c.slack_index())] = 1.0;
        return m;
    }
};

inline void validate_loss(const NetworkCase& c, const LossModel& loss) {
    if (!loss.enabled) return;
    if (loss.loss_sensitivity.size() != c.num_buses() || loss.distribution.size() != c.num_buses())
        throw ValidationError("loss model dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < c.num_buses(); ++i) {
        if (!(loss.loss_sensitivity[i] >= 0.0 && loss.loss_sensitivity[i] < 1.0))
            throw ValidationError("loss sensitivity outside [0, 1)");
        if (loss.distribution[i] < 0.0) throw ValidationError("negative loss distribution factor");
        s += loss.distribution[i];
    }
    if (std::abs(s - 1.0) > 1e-12) throw ValidationError("loss distribution factors must sum to 1");
}

/// Checks dimensions against the case and the offer invariants.
inline void validate_bids(const NetworkCase& c, const BidSet& bids) {
    if (bids.num_generators() != c.num_generators()) throw ValidationError("dimension mismatch: one offer per generator");
    if (bids.form == BidForm::block) {
        const std::size_t nb = bids.blocks_per_generator();
        if (nb == 0) throw ValidationError("block offers need at least one block");
        for (const auto& o : bids.block) {
            if (o.price.size() != nb || o.q_upper.size() != nb || o.q_lower.size() != nb)
                throw ValidationError("dimension mismatch: every generator must offer the same number of blocks");
            for (std::size_t b = 0; b < nb; ++b) {
                if (b > 0 && !(o.price[b - 1] < o.price[b])) throw ValidationError("non-monotone block prices");
                if (o.q_lower[b] > o.q_upper[b]) throw ValidationError("block q_lower exceeds q_upper");
                if (!std::isfinite(o.price[b])) throw ValidationError("non-finite block price");
            }
        }
    } else {
        for (const auto& o : bids.quadratic) {
            if (!(o.a > 0.0)) throw ValidationError("quadratic coefficient a must be positive");
            if (o.q_lower > o.q_upper) throw ValidationError("q_lower exceeds q_upper");
            if (!std::isfinite(o.b)) throw ValidationError("non-finite linear coefficient");
        }
    }
}

inline void validate_loads(const NetworkCase& c, const LoadVector& loads) {
    if (loads.L.size() != c.num_buses()) throw ValidationError("dimension mismatch: one load per bus");
    for (double v : loads.L)
        if (!(v >= 0.0)) throw ValidationError("negative nodal load");
}

inline LoadVector base_loads(const NetworkCase& c) { return LoadVector{c.base_load}; }

/// Offers that reproduce each generator's cost curve from the case file.
/// Polynomial costs give quadratic offers directly, or `blocks` equal-width blocks priced at the
/// marginal cost of each block's midpoint; piecewise-linear costs give one block per segment.
inline BidSet base_bids(const NetworkCase& c, BidForm form, std::size_t blocks = 2) {
    BidSet bids;
    bids.form = form;
    for (const auto& g : c.generators) {
        const auto& p = g.cost.params;
        if (form == BidForm::quadratic) {
            if (g.cost.model != 2 || p.size() < 2)
                throw ValidationError("quadratic offers need polynomial generator costs");
            double c2 = p.size() >= 3 ? p[p.size() - 3] : 0.0;
            double c1 = p[p.size() - 2];
            bids.quadratic.push_back({2.0 * c2, c1, g.p_max, g.p_min});
        } else if (g.cost.model == 2) {
            if (blocks == 0) throw ValidationError("block count must be positive");
            double c2 = p.size() >= 3 ? p[p.size() - 3] : 0.0;
            double c1 = p.size() >= 2 ? p[p.size() - 2] : 0.0;
            BlockOffer o;
            double width = g.p_max / static_cast<double>(blocks);
            for (std::size_t b = 0; b < blocks; ++b) {
                double mid = (static_cast<double>(b) + 0.5) * width;
                o.price.push_back(2.0 * c2 * mid + c1);
                o.q_upper.push_back(width);
                o.q_lower.push_back(b == 0 ? std::min(g.p_min, width) : 0.0);
            }
            bids.block.push_back(std::move(o));
        } else {
            BlockOffer o;
            for (std::size_t k = 2; k + 1 < p.size(); k += 2) {
                double dx = p[k] - p[k - 2];
                if (!(dx > 0)) throw ValidationError("piecewise-linear cost breakpoints must increase");
                o.price.push_back((p[k + 1] - p[k - 1]) / dx);
                o.q_upper.push_back(dx);
                o.q_lower.push_back(0.0);
            }
            bids.block.push_back(std::move(o));
        }
    }
    validate_bids(c, bids);
    return bids;
}

} // namespace poolbid
