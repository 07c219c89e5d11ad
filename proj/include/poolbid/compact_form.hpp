#pragma once

// Stacked constraint form of the market clearing: G * P_G <= W + S * L, row 0 an equality.

#include <cstddef>
#include <string>
#include <vector>

#include "poolbid/case_model.hpp"
#include "poolbid/market.hpp"

namespace poolbid {

enum class RowKind { balance, line_plus, line_minus, gen_upper, gen_lower };

struct RowTag {
    RowKind kind = RowKind::balance;
    int line = -1;       // 0-based branch index for line rows
    int generator = -1;  // 0-based generator index for bound rows
    int block = -1;      // 0-based block index (block form only)
    int bus_id = -1;     // external id of the generator's bus

    /// Canonical text form used in pattern fingerprints, e.g. "EQ", "LINE+2", "GUB(3,1)".
    std::string label() const {
        switch (kind) {
        case RowKind::balance: return "EQ";
        case RowKind::line_plus: return "LINE+" + std::to_string(line + 1);
        case RowKind::line_minus: return "LINE-" + std::to_string(line + 1);
        case RowKind::gen_upper:
        case RowKind::gen_lower: {
            std::string s = kind == RowKind::gen_upper ? "GUB(" : "GLB(";
            s += std::to_string(bus_id);
            if (block >= 0) s += ":" + std::to_string(block + 1);  // no commas: fingerprints go into CSV cells
            return s + ")";
        }
        }
        return "?";
    }
};

/// Loss-adjusted flow sensitivities: beta_ji - (beta d)_j * l_i. Equals beta when lossless
/// or when losses are withdrawn at the slack bus.
inline Mat effective_ptdf(const PtdfMatrix& ptdf, const LossModel& loss) {
    if (!loss.enabled) return ptdf.beta;
    const Eigen::Index n = ptdf.beta.cols();
    Vec d(n), l(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d[i] = loss.distribution[static_cast<std::size_t>(i)];
        l[i] = loss.loss_sensitivity[static_cast<std::size_t>(i)];
    }
    return ptdf.beta - (ptdf.beta * d) * l.transpose();
}

struct CompactForm {
    BidForm form = BidForm::quadratic;
    Mat G;                 // rows x dispatch
    Vec W;                 // rows
    Mat S;                 // rows x buses
    Vec c;                 // linear objective (block form, and the b vector of the quadratic form)
    Vec H;                 // diagonal of the quadratic term (quadratic form only)
    std::vector<RowTag> row_tags;

    Eigen::Index rows() const { return G.rows(); }
    Eigen::Index dispatch_size() const { return G.cols(); }

    /// h = W + S L
    Vec rhs(const LoadVector& loads) const {
        return W + S * Eigen::Map<const Vec>(loads.L.data(), static_cast<Eigen::Index>(loads.L.size()));
    }
};

inline CompactForm build_compact_form(const NetworkCase& c, const PtdfMatrix& ptdf, const BidSet& bids,
                                      const LoadVector& loads, const LossModel& loss = LossModel::lossless()) {
    validate_bids(c, bids);
    validate_loads(c, loads);
    validate_loss(c, loss);
    const auto gen_bus = c.generator_buses();
    const Eigen::Index ng = static_cast<Eigen::Index>(c.num_generators());
    const Eigen::Index nb = static_cast<Eigen::Index>(bids.blocks_per_generator());
    const Eigen::Index n = ng * nb;
    const Eigen::Index J = static_cast<Eigen::Index>(c.num_branches());
    const Eigen::Index N = static_cast<Eigen::Index>(c.num_buses());
    const Eigen::Index rows = 1 + 2 * J + 2 * n;
    const Mat beff = effective_ptdf(ptdf, loss);

    CompactForm f;
    f.form = bids.form;
    f.G = Mat::Zero(rows, n);
    f.W = Vec::Zero(rows);
    f.S = Mat::Zero(rows, N);
    f.c = Vec::Zero(n);
    if (bids.form == BidForm::quadratic) f.H = Vec::Zero(n);
    f.row_tags.resize(static_cast<std::size_t>(rows));

    auto col = [&](Eigen::Index g, Eigen::Index b) { return g * nb + b; };

    // balance: sum (1 - l_i) P = sum L
    for (Eigen::Index g = 0; g < ng; ++g)
        for (Eigen::Index b = 0; b < nb; ++b)
            f.G(0, col(g, b)) = loss.enabled ? 1.0 - loss.loss_sensitivity[static_cast<std::size_t>(gen_bus[g])] : 1.0;
    f.S.row(0).setOnes();
    f.row_tags[0] = RowTag{RowKind::balance};

    for (Eigen::Index j = 0; j < J; ++j) {
        const auto& br = c.branches[static_cast<std::size_t>(j)];
        Eigen::Index rp = 1 + j, rm = 1 + J + j;
        for (Eigen::Index g = 0; g < ng; ++g)
            for (Eigen::Index b = 0; b < nb; ++b) {
                f.G(rp, col(g, b)) = beff(j, gen_bus[g]);
                f.G(rm, col(g, b)) = -beff(j, gen_bus[g]);
            }
        f.W[rp] = br.f_plus;
        f.W[rm] = br.f_minus;
        f.S.row(rp) = ptdf.beta.row(j);
        f.S.row(rm) = -ptdf.beta.row(j);
        f.row_tags[static_cast<std::size_t>(rp)] = RowTag{RowKind::line_plus, static_cast<int>(j)};
        f.row_tags[static_cast<std::size_t>(rm)] = RowTag{RowKind::line_minus, static_cast<int>(j)};
    }

    const Eigen::Index up0 = 1 + 2 * J, lo0 = 1 + 2 * J + n;
    for (Eigen::Index g = 0; g < ng; ++g) {
        const int bus_id = c.generators[static_cast<std::size_t>(g)].bus;
        for (Eigen::Index b = 0; b < nb; ++b) {
            Eigen::Index k = col(g, b);
            double qu, ql;
            if (bids.form == BidForm::block) {
                const auto& o = bids.block[static_cast<std::size_t>(g)];
                qu = o.q_upper[static_cast<std::size_t>(b)];
                ql = o.q_lower[static_cast<std::size_t>(b)];
                f.c[k] = o.price[static_cast<std::size_t>(b)];
            } else {
                const auto& o = bids.quadratic[static_cast<std::size_t>(g)];
                qu = o.q_upper;
                ql = o.q_lower;
                f.c[k] = o.b;
                f.H[k] = o.a;
            }
            const int blk = bids.form == BidForm::block ? static_cast<int>(b) : -1;
            f.G(up0 + k, k) = 1.0;
            f.W[up0 + k] = qu;
            f.row_tags[static_cast<std::size_t>(up0 + k)] = RowTag{RowKind::gen_upper, -1, static_cast<int>(g), blk, bus_id};
            f.G(lo0 + k, k) = -1.0;
            f.W[lo0 + k] = -ql;
            f.row_tags[static_cast<std::size_t>(lo0 + k)] = RowTag{RowKind::gen_lower, -1, static_cast<int>(g), blk, bus_id};
        }
    }
    return f;
}

} // namespace poolbid
