#pragma once

// Power-system case ingestion (MATPOWER subset), validation and PTDF computation.

#include <Eigen/Dense>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "poolbid/error.hpp"

namespace poolbid {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Flow cap substituted for MATPOWER's "rating 0 = unlimited" convention (MW).
inline constexpr double kUnlimitedFlowMw = 1e6;

struct Branch {
    int from_bus = 0;   // external bus id
    int to_bus = 0;
    double reactance = 0.0;  // p.u.
    double f_plus = 0.0;     // MW, limit in from->to direction
    double f_minus = 0.0;    // MW, limit in to->from direction
};

/// Generator cost as given in the case file (gencost rows).
struct GenCost {
    int model = 2;                 // 1 = piecewise linear, 2 = polynomial
    std::vector<double> params;    // model 2: highest order first; model 1: x1 y1 x2 y2 ...
};

struct Generator {
    int bus = 0;    // external bus id
    double p_max = 0.0;
    double p_min = 0.0;
    GenCost cost;
};

/// The physical market arena. Buses are addressed internally by position 0..N-1.
struct NetworkCase {
    std::string name;
    double base_mva = 100.0;
    std::vector<int> bus_ids;
    int slack_bus = 0;                 // external id
    std::vector<Branch> branches;
    std::map<int, int> zone_of;        // external bus id -> zone id
    std::vector<double> base_load;     // MW per bus position
    std::vector<Generator> generators; // at most one per bus, ordered by bus position

    std::size_t num_buses() const { return bus_ids.size(); }
    std::size_t num_branches() const { return branches.size(); }
    std::size_t num_generators() const { return generators.size(); }

    int bus_index(int id) const {
        auto it = std::find(bus_ids.begin(), bus_ids.end(), id);
        if (it == bus_ids.end()) throw ValidationError("unknown bus id " + std::to_string(id));
        return static_cast<int>(it - bus_ids.begin());
    }
    int slack_index() const { return bus_index(slack_bus); }

    /// Bus position of each generator.
    std::vector<int> generator_buses() const {
        std::vector<int> out;
        out.reserve(generators.size());
        for (const auto& g : generators) out.push_back(bus_index(g.bus));
        return out;
    }

    /// Sorted distinct zone ids.
    std::vector<int> zones() const {
        std::vector<int> z;
        for (int id : bus_ids) {
            auto it = zone_of.find(id);
            z.push_back(it == zone_of.end() ? 1 : it->second);
        }
        std::sort(z.begin(), z.end());
        z.erase(std::unique(z.begin(), z.end()), z.end());
        return z;
    }
};

/// J x N matrix of flow sensitivities: MW on line j per MW injected at bus i and withdrawn at the slack.
struct PtdfMatrix {
    Mat beta;
};

namespace detail {

struct Cursor {
    std::string_view text;
    std::size_t pos = 0;
    int line = 1;
    int col = 1;

    bool eof() const { return pos >= text.size(); }
    char peek() const { return eof() ? '\0' : text[pos]; }
    char get() {
        char c = text[pos++];
        if (c == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
        return c;
    }
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, line, col); }

    void skip_comment() {
        while (!eof() && peek() != '\n') get();
    }
    // Skips blanks and comments; newlines are skipped too unless stop_at_newline.
    void skip_ws(bool stop_at_newline = false) {
        while (!eof()) {
            char c = peek();
            if (c == '%') {
                skip_comment();
            } else if (c == '\n') {
                if (stop_at_newline) return;
                get();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == ',' ) {
                get();
            } else if (c == '.' && text.substr(pos, 3) == "...") {
                // MATLAB continuation
                get(); get(); get();
                skip_comment();
            } else {
                return;
            }
        }
    }
    std::string identifier() {
        std::string out;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '.'))
            out.push_back(get());
        return out;
    }
    double number() {
        std::size_t start = pos;
        int c0 = col;
        std::string tok;
        while (!eof()) {
            char c = peek();
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '+' || c == 'e' || c == 'E' ||
                c == 'I' || c == 'n' || c == 'f' || c == 'N' || c == 'a') {
                tok.push_back(get());
            } else {
                break;
            }
        }
        if (tok.empty()) fail("expected a number");
        if (tok == "Inf" || tok == "+Inf") return HUGE_VAL;
        if (tok == "-Inf") return -HUGE_VAL;
        char* end = nullptr;
        double v = std::strtod(tok.c_str(), &end);
        if (end != tok.c_str() + tok.size()) throw ParseError("malformed number '" + tok + "'", line, c0);
        (void)start;
        return v;
    }
    void expect(char c) {
        skip_ws();
        if (peek() != c) fail(std::string("expected '") + c + "'");
        get();
    }
};

using Table = std::vector<std::vector<double>>;

inline Table read_matrix(Cursor& cur) {
    Table rows;
    std::vector<double> row;
    cur.expect('[');
    for (;;) {
        cur.skip_ws(true);
        if (cur.eof()) cur.fail("unterminated matrix");
        char c = cur.peek();
        if (c == ']') {
            cur.get();
            break;
        }
        if (c == ';' || c == '\n') {
            cur.get();
            if (!row.empty()) rows.push_back(std::move(row));
            row.clear();
            continue;
        }
        row.push_back(cur.number());
    }
    if (!row.empty()) rows.push_back(std::move(row));
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].size() != rows[0].size()) cur.fail("ragged matrix rows");
    return rows;
}

} // namespace detail

/// Validates structure: connectivity, positive reactances and limits, slack present.
inline void validate_case(const NetworkCase& c) {
    if (c.bus_ids.empty()) throw ValidationError("case has no buses");
    if (std::find(c.bus_ids.begin(), c.bus_ids.end(), c.slack_bus) == c.bus_ids.end())
        throw ValidationError("missing slack bus");
    const int n = static_cast<int>(c.num_buses());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& br : c.branches) {
        if (!(br.reactance > 0.0)) throw ValidationError("nonpositive reactance");
        if (!(br.f_plus > 0.0) || !(br.f_minus > 0.0)) throw ValidationError("nonpositive line limit");
        int a = c.bus_index(br.from_bus), b = c.bus_index(br.to_bus);
        if (a == b) throw ValidationError("branch connects a bus to itself");
        parent[find(a)] = find(b);
    }
    for (int i = 1; i < n; ++i)
        if (find(i) != find(0)) throw ValidationError("disconnected graph");
    std::vector<int> seen;
    for (const auto& g : c.generators) {
        int b = c.bus_index(g.bus);
        if (std::find(seen.begin(), seen.end(), b) != seen.end())
            throw ValidationError("more than one generator at bus " + std::to_string(g.bus));
        seen.push_back(b);
        if (g.p_max < g.p_min) throw ValidationError("generator Pmax < Pmin at bus " + std::to_string(g.bus));
    }
}

/// Parses the MATPOWER subset: `function` header, `mpc.version`, `mpc.baseMVA`, and the
/// `mpc.bus`, `mpc.gen`, `mpc.branch`, `mpc.gencost` tables. Anything else is a ParseError.
inline NetworkCase parse_case(std::string_view text) {
    detail::Cursor cur{text};
    NetworkCase out;
    std::optional<detail::Table> bus, gen, branch, gencost;
    std::map<std::string, std::pair<int, int>> where;

    for (;;) {
        cur.skip_ws();
        if (cur.eof()) break;
        int line = cur.line, col = cur.col;
        std::string word = cur.identifier();
        if (word.empty()) cur.fail(std::string("unexpected character '") + cur.peek() + "'");
        if (word == "function") {
            // function mpc = name
            cur.skip_ws(true);
            std::string lhs = cur.identifier();
            cur.expect('=');
            cur.skip_ws(true);
            out.name = cur.identifier();
            if (lhs != "mpc" || out.name.empty()) throw ParseError("malformed function header", line, col);
            continue;
        }
        if (word.rfind("mpc.", 0) != 0) throw ParseError("unsupported statement '" + word + "'", line, col);
        std::string field = word.substr(4);
        where[field] = {line, col};
        cur.expect('=');
        cur.skip_ws();
        if (field == "version") {
            if (cur.peek() != '\'') cur.fail("expected quoted version string");
            cur.get();
            std::string v;
            while (!cur.eof() && cur.peek() != '\'' && cur.peek() != '\n') v.push_back(cur.get());
            if (cur.peek() != '\'') cur.fail("unterminated string");
            cur.get();
            if (v != "2") throw ParseError("only case format version 2 is supported", line, col);
        } else if (field == "baseMVA") {
            out.base_mva = cur.number();
            if (!(out.base_mva > 0)) throw ParseError("baseMVA must be positive", line, col);
        } else if (field == "bus") {
            bus = detail::read_matrix(cur);
        } else if (field == "gen") {
            gen = detail::read_matrix(cur);
        } else if (field == "branch") {
            branch = detail::read_matrix(cur);
        } else if (field == "gencost") {
            gencost = detail::read_matrix(cur);
        } else {
            throw ParseError("unsupported field 'mpc." + field + "'", line, col);
        }
        cur.skip_ws(true);
        if (cur.peek() == ';') cur.get();
    }

    auto need = [&](const std::optional<detail::Table>& t, const char* name, std::size_t min_cols) {
        if (!t) throw ParseError(std::string("missing mpc.") + name, cur.line, cur.col);
        auto [l, c] = where[name];
        if (!t->empty() && (*t)[0].size() < min_cols)
            throw ParseError(std::string("mpc.") + name + " needs at least " + std::to_string(min_cols) + " columns", l, c);
        return where[name];
    };
    auto bus_at = need(bus, "bus", 13);
    need(branch, "branch", 11);
    need(gen, "gen", 10);

    bool have_slack = false;
    for (const auto& r : *bus) {
        int id = static_cast<int>(r[0]);
        if (r[0] != id) throw ParseError("bus id must be an integer", bus_at.first, bus_at.second);
        out.bus_ids.push_back(id);
        out.base_load.push_back(r[2]);
        out.zone_of[id] = static_cast<int>(r[6]);
        if (static_cast<int>(r[1]) == 3) {
            if (have_slack) throw ParseError("more than one slack (type 3) bus", bus_at.first, bus_at.second);
            out.slack_bus = id;
            have_slack = true;
        }
    }
    if (!have_slack) throw ValidationError("missing slack bus");

    auto br_at = where["branch"];
    for (const auto& r : *branch) {
        if (r[10] == 0) continue;  // out of service
        double ratio = r[8], angle = r[9];
        if ((ratio != 0.0 && ratio != 1.0) || angle != 0.0)
            throw ParseError("off-nominal taps and phase shifters are not supported", br_at.first, br_at.second);
        Branch b;
        b.from_bus = static_cast<int>(r[0]);
        b.to_bus = static_cast<int>(r[1]);
        b.reactance = r[3];
        double rate = r[5] == 0.0 ? kUnlimitedFlowMw : r[5];
        b.f_plus = rate;
        b.f_minus = rate;
        out.branches.push_back(b);
    }

    auto gen_at = where["gen"];
    std::vector<Generator> gens;
    std::vector<std::size_t> gen_rows;
    for (std::size_t k = 0; k < gen->size(); ++k) {
        const auto& r = (*gen)[k];
        if (r[7] <= 0) continue;  // out of service
        Generator g;
        g.bus = static_cast<int>(r[0]);
        g.p_max = r[8];
        g.p_min = r[9];
        if (std::find(out.bus_ids.begin(), out.bus_ids.end(), g.bus) == out.bus_ids.end())
            throw ParseError("generator at unknown bus " + std::to_string(g.bus), gen_at.first, gen_at.second);
        for (const auto& other : gens)
            if (other.bus == g.bus)
                throw ParseError("more than one generator at bus " + std::to_string(g.bus), gen_at.first, gen_at.second);
        gens.push_back(g);
        gen_rows.push_back(k);
    }
    if (gencost) {
        auto gc_at = where["gencost"];
        if (gencost->size() != gen->size()) throw ParseError("gencost must have one row per gen row", gc_at.first, gc_at.second);
        for (std::size_t k = 0; k < gens.size(); ++k) {
            const auto& r = (*gencost)[gen_rows[k]];
            int model = static_cast<int>(r[0]);
            int n = static_cast<int>(r[3]);
            std::size_t want = model == 1 ? 4 + 2 * static_cast<std::size_t>(n) : 4 + static_cast<std::size_t>(n);
            if ((model != 1 && model != 2) || n < 1 || r.size() < want)
                throw ParseError("malformed gencost row", gc_at.first, gc_at.second);
            gens[k].cost.model = model;
            gens[k].cost.params.assign(r.begin() + 4, r.begin() + static_cast<std::ptrdiff_t>(want));
        }
    }
    std::stable_sort(gens.begin(), gens.end(), [&](const Generator& a, const Generator& b) {
        return out.bus_index(a.bus) < out.bus_index(b.bus);
    });
    out.generators = std::move(gens);
    validate_case(out);
    return out;
}

inline NetworkCase load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open case file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    auto c = parse_case(ss.str());
    if (c.name.empty()) c.name = path;
    return c;
}

/// Factorizes the reduced nodal susceptance matrix once and solves for every injection bus.
inline PtdfMatrix compute_ptdf(const NetworkCase& c) {
    const Eigen::Index n = static_cast<Eigen::Index>(c.num_buses());
    const Eigen::Index j = static_cast<Eigen::Index>(c.num_branches());
    const int slack = c.slack_index();
    PtdfMatrix out;
    out.beta = Mat::Zero(j, n);
    if (n == 1) return out;

    Mat bbus = Mat::Zero(n, n);
    for (const auto& br : c.branches) {
        int a = c.bus_index(br.from_bus), b = c.bus_index(br.to_bus);
        double y = 1.0 / br.reactance;
        bbus(a, a) += y;
        bbus(b, b) += y;
        bbus(a, b) -= y;
        bbus(b, a) -= y;
    }
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != slack) keep.push_back(i);
    const Eigen::Index m = n - 1;
    Mat red(m, m);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index s = 0; s < m; ++s) red(r, s) = bbus(keep[r], keep[s]);

    Eigen::LDLT<Mat> ldlt(red);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 1e-12 * ldlt.vectorD().maxCoeff())
        throw NumericalError("singular reduced susceptance matrix");
    Mat theta_red = ldlt.solve(Mat::Identity(m, m));  // column s: angles for injection at keep[s]
    Mat theta = Mat::Zero(n, n);
    for (Eigen::Index r = 0; r < m; ++r)
        for (Eigen::Index s = 0; s < m; ++s) theta(keep[r], keep[s]) = theta_red(r, s);

    for (Eigen::Index l = 0; l < j; ++l) {
        const auto& br = c.branches[static_cast<std::size_t>(l)];
        int a = c.bus_index(br.from_bus), b = c.bus_index(br.to_bus);
        out.beta.row(l) = (theta.row(a) - theta.row(b)) / br.reactance;
    }
    return out;
}

} // namespace poolbid
