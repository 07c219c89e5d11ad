#pragma once

// DC-OPF market clearing in block (LP) and quadratic (QP) form, lossless or with fixed loss factors.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "poolbid/case_model.hpp"
#include "poolbid/compact_form.hpp"
#include "poolbid/io.hpp"
#include "poolbid/lp_simplex.hpp"
#include "poolbid/market.hpp"
#include "poolbid/qp_active_set.hpp"

namespace poolbid {

/// Relative primal-slack tolerance for calling a row binding.
inline constexpr double kBindingTol = 1e-6;

struct OpfOptions {
    double binding_tol = kBindingTol;
};

struct OpfSolution {
    BidForm form = BidForm::quadratic;
    Vec dispatch;      // P_G, generator-major then block
    double lambda = 0.0;
    Vec mu_plus;       // J
    Vec mu_minus;      // J
    Vec sigma_upper;   // dispatch size
    Vec sigma_lower;   // dispatch size
    Vec lmp;           // N
    double objective = 0.0;
    double dual_objective = 0.0;

    std::vector<RowTag> row_tags;
    Vec row_rhs;       // W + S L
    Vec row_slack;     // rhs - G P (zero for the balance row up to rounding)
    Vec row_dual;      // Lambda per compact-form row
    Mat G;             // binding-row rank checks need the coefficients
    std::vector<int> binding_set;  // row indices, ascending
    bool degenerate = false;
    std::size_t blocks_per_generator = 1;

    std::size_t num_generators() const {
        return static_cast<std::size_t>(dispatch.size()) / blocks_per_generator;
    }
    /// Cleared volume of generator g (sum over its blocks).
    double generator_output(std::size_t g) const {
        double s = 0.0;
        for (std::size_t b = 0; b < blocks_per_generator; ++b)
            s += dispatch[static_cast<Eigen::Index>(g * blocks_per_generator + b)];
        return s;
    }
};

/// pi_i = lambda (1 - l_i) - sum_j beta~_ji (mu+_j - mu-_j); beta~ is the loss-adjusted PTDF.
inline Vec compute_lmps(double lambda, const Vec& mu_plus, const Vec& mu_minus, const PtdfMatrix& ptdf,
                        const LossModel& loss = LossModel::lossless()) {
    const Mat beff = effective_ptdf(ptdf, loss);
    const Eigen::Index n = ptdf.beta.cols();
    Vec pi(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double l = loss.enabled ? loss.loss_sensitivity[static_cast<std::size_t>(i)] : 0.0;
        pi[i] = lambda * (1.0 - l);
    }
    if (beff.rows() > 0) pi -= beff.transpose() * (mu_plus - mu_minus);
    return pi;
}

/// Rows whose slack is within tol * (1 + |rhs|); the balance row is always included.
inline std::vector<int> binding_rows(const Vec& slack, const Vec& rhs, double tol) {
    std::vector<int> out{0};
    for (Eigen::Index r = 1; r < slack.size(); ++r)
        if (slack[r] <= tol * (1.0 + std::abs(rhs[r]))) out.push_back(static_cast<int>(r));
    return out;
}

namespace detail {

struct SplitForm {
    LinearConstraints lc;
    Eigen::Index J = 0;
};

// Balance row -> equality, line rows -> general inequalities, generator rows -> variable bounds.
inline SplitForm split_compact(const CompactForm& f, const Vec& h) {
    const Eigen::Index n = f.dispatch_size();
    const Eigen::Index J = (f.rows() - 1 - 2 * n) / 2;
    SplitForm s;
    s.J = J;
    s.lc.A_eq = f.G.topRows(1);
    s.lc.b_eq = h.head(1);
    s.lc.A_ub = f.G.middleRows(1, 2 * J);
    s.lc.b_ub = h.segment(1, 2 * J);
    s.lc.ub = h.segment(1 + 2 * J, n);
    s.lc.lb = -h.segment(1 + 2 * J + n, n);
    return s;
}

inline OpfSolution assemble(const CompactForm& f, const Vec& h, const PtdfMatrix& ptdf, const LossModel& loss,
                            const Vec& x, double y_eq, const Vec& y_ub, const Vec& z_lb, const Vec& z_ub,
                            std::size_t blocks, const OpfOptions& opt, bool lp_dual_degenerate) {
    const Eigen::Index n = f.dispatch_size();
    const Eigen::Index J = (f.rows() - 1 - 2 * n) / 2;
    OpfSolution s;
    s.form = f.form;
    s.blocks_per_generator = blocks;
    s.dispatch = x;
    s.lambda = -y_eq;
    s.mu_plus = y_ub.head(J);
    s.mu_minus = y_ub.tail(J);
    s.sigma_upper = z_ub;
    s.sigma_lower = z_lb;
    s.lmp = compute_lmps(s.lambda, s.mu_plus, s.mu_minus, ptdf, loss);
    s.row_tags = f.row_tags;
    s.row_rhs = h;
    s.row_slack = h - f.G * x;
    s.row_slack[0] = 0.0;
    s.row_dual.resize(f.rows());
    s.row_dual << y_eq, y_ub, z_ub, z_lb;
    s.G = f.G;
    if (f.form == BidForm::quadratic) {
        s.objective = 0.5 * x.dot(f.H.cwiseProduct(x)) + f.c.dot(x);
        s.dual_objective = -0.5 * x.dot(f.H.cwiseProduct(x)) - s.row_dual.dot(h);
    } else {
        s.objective = f.c.dot(x);
        s.dual_objective = -s.row_dual.dot(h);
    }
    s.binding_set = binding_rows(s.row_slack, h, opt.binding_tol);

    // Degeneracy: LICQ failure, weakly active or nearly-binding rows, or (LP) a non-vertex binding count.
    const double dual_scale = 1.0 + f.c.cwiseAbs().maxCoeff();
    bool degenerate = lp_dual_degenerate;
    for (int r : s.binding_set) {
        if (r == 0) continue;
        if (std::abs(s.row_dual[r]) <= 1e-9 * dual_scale) degenerate = true;
        if (s.row_slack[r] > 1e-9 * (1.0 + std::abs(h[r]))) degenerate = true;
    }
    Mat gb(static_cast<Eigen::Index>(s.binding_set.size()), n);
    for (std::size_t k = 0; k < s.binding_set.size(); ++k) gb.row(static_cast<Eigen::Index>(k)) = f.G.row(s.binding_set[k]);
    Eigen::FullPivLU<Mat> lu(gb);
    lu.setThreshold(1e-9);
    if (lu.rank() < gb.rows()) degenerate = true;
    if (f.form == BidForm::block && gb.rows() != n) degenerate = true;
    s.degenerate = degenerate;
    return s;
}

} // namespace detail

inline OpfSolution solve_block_opf(const NetworkCase& c, const PtdfMatrix& ptdf, const BidSet& bids,
                                   const LoadVector& loads, const LossModel& loss = LossModel::lossless(),
                                   const OpfOptions& opt = {}) {
    if (bids.form != BidForm::block) throw ValidationError("block OPF needs block offers");
    CompactForm f = build_compact_form(c, ptdf, bids, loads, loss);
    Vec h = f.rhs(loads);
    auto split = detail::split_compact(f, h);
    LpResult r = solve_lp(f.c, split.lc);
    return detail::assemble(f, h, ptdf, loss, r.x, r.y_eq[0], r.y_ub, r.z_lb, r.z_ub, bids.blocks_per_generator(), opt,
                            r.dual_degenerate);
}

inline OpfSolution solve_quadratic_opf(const NetworkCase& c, const PtdfMatrix& ptdf, const BidSet& bids,
                                       const LoadVector& loads, const LossModel& loss = LossModel::lossless(),
                                       const OpfOptions& opt = {}) {
    if (bids.form != BidForm::quadratic) throw ValidationError("quadratic OPF needs quadratic offers");
    CompactForm f = build_compact_form(c, ptdf, bids, loads, loss);
    Vec h = f.rhs(loads);
    auto split = detail::split_compact(f, h);
    QpResult r = solve_qp(f.H, f.c, split.lc);
    return detail::assemble(f, h, ptdf, loss, r.x, r.y_eq[0], r.y_ub, r.z_lb, r.z_ub, 1, opt, false);
}

inline OpfSolution solve_opf(const NetworkCase& c, const PtdfMatrix& ptdf, const BidSet& bids, const LoadVector& loads,
                             const LossModel& loss = LossModel::lossless(), const OpfOptions& opt = {}) {
    return bids.form == BidForm::block ? solve_block_opf(c, ptdf, bids, loads, loss, opt)
                                       : solve_quadratic_opf(c, ptdf, bids, loads, loss, opt);
}

/// Canonical fingerprint of a binding set: row labels in row order joined by '|'.
inline std::string fingerprint_of(const std::vector<RowTag>& tags, const std::vector<int>& rows) {
    std::vector<std::string> labels;
    labels.reserve(rows.size());
    for (int r : rows) labels.push_back(tags[static_cast<std::size_t>(r)].label());
    return io::join(labels, "|");
}

/// CSV header matching opf_csv_row for a case/offer shape.
inline std::string opf_csv_header(std::size_t dispatch, std::size_t lines, std::size_t buses) {
    std::vector<std::string> h{"scenario"};
    for (std::size_t k = 0; k < dispatch; ++k) h.push_back("P" + std::to_string(k + 1));
    h.push_back("lambda");
    for (std::size_t j = 0; j < lines; ++j) h.push_back("mu_plus" + std::to_string(j + 1));
    for (std::size_t j = 0; j < lines; ++j) h.push_back("mu_minus" + std::to_string(j + 1));
    for (std::size_t i = 0; i < buses; ++i) h.push_back("pi" + std::to_string(i + 1));
    h.push_back("objective");
    h.push_back("degenerate");
    h.push_back("fingerprint");
    return io::join(h, ",");
}

/// Flat CSV serialization: scenario id, dispatch, lambda, mu+, mu-, LMPs, objective, flag, fingerprint.
inline std::string opf_csv_row(int scenario, const OpfSolution& s) {
    std::vector<std::string> cells{std::to_string(scenario)};
    for (Eigen::Index k = 0; k < s.dispatch.size(); ++k) cells.push_back(io::fmt(s.dispatch[k]));
    cells.push_back(io::fmt(s.lambda));
    for (Eigen::Index j = 0; j < s.mu_plus.size(); ++j) cells.push_back(io::fmt(s.mu_plus[j]));
    for (Eigen::Index j = 0; j < s.mu_minus.size(); ++j) cells.push_back(io::fmt(s.mu_minus[j]));
    for (Eigen::Index i = 0; i < s.lmp.size(); ++i) cells.push_back(io::fmt(s.lmp[i]));
    cells.push_back(io::fmt(s.objective));
    cells.push_back(s.degenerate ? "1" : "0");
    cells.push_back(fingerprint_of(s.row_tags, s.binding_set));
    return io::join(cells, ",");
}

} // namespace poolbid
