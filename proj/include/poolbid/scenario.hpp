#pragma once

// Scenario generation, feature construction per information level, min-max scaling and splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "poolbid/case_model.hpp"
#include "poolbid/error.hpp"
#include "poolbid/market.hpp"

namespace poolbid {

struct Scenario {
    int id = 0;
    BidSet bids;
    LoadVector loads;
    std::uint64_t seed = 0;  // stream seed the scenario was drawn from
    int hour = 0;            // profile slot used for the loads
};

struct ScenarioDiagnostics {
    int resampled_nonpositive = 0;
    int resampled_ties = 0;
};

/// Normalized 24-hour demand shape (peak 1.0).
inline std::vector<double> default_load_profile() {
    return {0.62, 0.58, 0.56, 0.55, 0.57, 0.63, 0.72, 0.82, 0.89, 0.93, 0.95, 0.96,
            0.95, 0.94, 0.93, 0.93, 0.95, 0.99, 1.00, 0.98, 0.93, 0.85, 0.76, 0.68};
}

struct ScenarioOptions {
    std::size_t n = 2000;
    double sigma_rel = 0.1;       // relative deviation on strategic offer parameters
    double load_sigma_rel = 0.1;  // independent nodal deviation on top of the profile
    std::uint64_t seed = 1;
    std::vector<double> profile = default_load_profile();
    double profile_scale = 1.0;   // base loads are multiplied by profile[h] * profile_scale
};

/// Multiplies every strategic offer parameter by (1 + sigma g), g ~ N(0, 1). Nonpositive draws are
/// redrawn; block prices are sorted to restore monotonicity (exact ties are redrawn).
inline BidSet perturb_bids(const BidSet& base, double sigma, std::mt19937_64& rng, ScenarioDiagnostics& diag) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto draw = [&](double v) {
        if (sigma == 0.0) return v;
        for (;;) {
            double out = v * (1.0 + sigma * gauss(rng));
            if (out > 0.0 || v <= 0.0) return out;
            ++diag.resampled_nonpositive;
        }
    };
    BidSet out = base;
    if (out.form == BidForm::quadratic) {
        for (auto& o : out.quadratic) o.b = draw(o.b);
        return out;
    }
    for (auto& o : out.block) {
        const auto base_price = o.price;
        for (;;) {
            for (std::size_t b = 0; b < o.price.size(); ++b) o.price[b] = draw(base_price[b]);
            std::sort(o.price.begin(), o.price.end());
            if (std::adjacent_find(o.price.begin(), o.price.end()) == o.price.end()) break;
            ++diag.resampled_ties;
        }
        for (auto& q : o.q_upper) q = draw(q);
        for (std::size_t b = 0; b < o.q_upper.size(); ++b) o.q_lower[b] = std::min(o.q_lower[b], o.q_upper[b]);
    }
    return out;
}

inline std::vector<Scenario> generate_scenarios(const BidSet& base_bids, const LoadVector& base_loads,
                                                const ScenarioOptions& opt, ScenarioDiagnostics* diag_out = nullptr) {
    if (opt.n < 1) throw ValidationError("scenario count must be at least 1");
    if (opt.sigma_rel < 0 || opt.load_sigma_rel < 0) throw ValidationError("deviation must be nonnegative");
    if (opt.profile.empty()) throw ValidationError("empty load profile");
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    ScenarioDiagnostics diag;
    std::vector<Scenario> out;
    out.reserve(opt.n);
    for (std::size_t t = 0; t < opt.n; ++t) {
        Scenario s;
        s.id = static_cast<int>(t);
        s.seed = opt.seed;
        s.hour = static_cast<int>(t % opt.profile.size());
        s.bids = perturb_bids(base_bids, opt.sigma_rel, rng, diag);
        s.loads = base_loads;
        const double level = opt.profile[static_cast<std::size_t>(s.hour)] * opt.profile_scale;
        for (auto& l : s.loads.L) {
            if (l == 0.0) continue;
            double v;
            do {
                v = l * level * (1.0 + opt.load_sigma_rel * gauss(rng));
            } while (v < 0.0 && (++diag.resampled_nonpositive, true));
            l = v;
        }
        out.push_back(std::move(s));
    }
    if (diag_out) *diag_out = diag;
    return out;
}

// ---------------------------------------------------------------------------
// Decision variables

/// Number of decision variables per generator: 2B (prices and caps) or 1 (linear coefficient b).
inline std::size_t decision_size(const BidSet& bids) {
    return bids.form == BidForm::block ? 2 * bids.blocks_per_generator() : 1;
}

/// Decision variables of the listed generators, generator by generator.
inline std::vector<double> extract_decision(const BidSet& bids, const std::vector<int>& gens) {
    std::vector<double> x;
    for (int g : gens) {
        if (bids.form == BidForm::block) {
            const auto& o = bids.block.at(static_cast<std::size_t>(g));
            x.insert(x.end(), o.price.begin(), o.price.end());
            x.insert(x.end(), o.q_upper.begin(), o.q_upper.end());
        } else {
            x.push_back(bids.quadratic.at(static_cast<std::size_t>(g)).b);
        }
    }
    return x;
}

inline void apply_decision(BidSet& bids, const std::vector<int>& gens, const std::vector<double>& x) {
    if (x.size() != gens.size() * decision_size(bids)) throw ValidationError("decision vector dimension mismatch");
    std::size_t k = 0;
    for (int g : gens) {
        if (bids.form == BidForm::block) {
            auto& o = bids.block.at(static_cast<std::size_t>(g));
            for (auto& v : o.price) v = x[k++];
            for (auto& v : o.q_upper) v = x[k++];
            for (std::size_t b = 0; b < o.q_upper.size(); ++b) o.q_lower[b] = std::min(o.q_lower[b], o.q_upper[b]);
        } else {
            bids.quadratic.at(static_cast<std::size_t>(g)).b = x[k++];
        }
    }
}

// ---------------------------------------------------------------------------
// Features

enum class InfoLevel { II = 2, III = 3, IV = 4 };

inline std::string to_string(InfoLevel l) {
    switch (l) {
    case InfoLevel::II: return "II";
    case InfoLevel::III: return "III";
    case InfoLevel::IV: return "IV";
    }
    return "?";
}
inline InfoLevel parse_info_level(const std::string& s) {
    if (s == "II") return InfoLevel::II;
    if (s == "III") return InfoLevel::III;
    if (s == "IV") return InfoLevel::IV;
    throw ConfigError("unknown information level '" + s + "'");
}

/// What the strategist observes. `genco` lists generator indices; zones are used at level IV.
struct FeatureSpec {
    InfoLevel level = InfoLevel::II;
    std::vector<int> genco;
    std::vector<int> zones;   // sorted zone ids (level IV)
    std::map<int, int> zone_of_bus_position;

    static FeatureSpec make(const NetworkCase& c, InfoLevel level, std::vector<int> genco) {
        FeatureSpec s;
        s.level = level;
        s.genco = std::move(genco);
        s.zones = c.zones();
        for (std::size_t i = 0; i < c.num_buses(); ++i) {
            auto it = c.zone_of.find(c.bus_ids[i]);
            s.zone_of_bus_position[static_cast<int>(i)] = it == c.zone_of.end() ? 1 : it->second;
        }
        return s;
    }

    /// Generators whose decision variables appear in the feature vector.
    std::vector<int> observed_generators(std::size_t num_generators) const {
        if (level == InfoLevel::II) {
            std::vector<int> all(num_generators);
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        return genco;
    }
};

/// Level II: [x of every generator; nodal L]. Level III: [x of the genco; nodal L].
/// Level IV: [x of the genco; zonal L]. x is grouped by generator: block prices then caps, or b.
inline std::vector<double> build_feature_vector(const FeatureSpec& spec, const BidSet& bids, const LoadVector& loads) {
    std::vector<double> f = extract_decision(bids, spec.observed_generators(bids.num_generators()));
    if (spec.level == InfoLevel::IV) {
        if (spec.zones.empty() || spec.zone_of_bus_position.size() != loads.L.size())
            throw ValidationError("zone map missing for level IV features");
        for (int z : spec.zones) {
            double s = 0.0;
            for (std::size_t i = 0; i < loads.L.size(); ++i)
                if (spec.zone_of_bus_position.at(static_cast<int>(i)) == z) s += loads.L[i];
            f.push_back(s);
        }
    } else {
        f.insert(f.end(), loads.L.begin(), loads.L.end());
    }
    return f;
}

inline std::vector<std::string> feature_names(const FeatureSpec& spec, const NetworkCase& c, const BidSet& shape) {
    std::vector<std::string> names;
    for (int g : spec.observed_generators(shape.num_generators())) {
        const std::string bus = std::to_string(c.generators.at(static_cast<std::size_t>(g)).bus);
        if (shape.form == BidForm::block) {
            for (std::size_t b = 0; b < shape.blocks_per_generator(); ++b) names.push_back("c[" + bus + ":" + std::to_string(b + 1) + "]");
            for (std::size_t b = 0; b < shape.blocks_per_generator(); ++b) names.push_back("qu[" + bus + ":" + std::to_string(b + 1) + "]");
        } else {
            names.push_back("b[" + bus + "]");
        }
    }
    if (spec.level == InfoLevel::IV) {
        for (int z : spec.zones) names.push_back("Lzone[" + std::to_string(z) + "]");
    } else {
        for (int id : c.bus_ids) names.push_back("L[" + std::to_string(id) + "]");
    }
    return names;
}

/// Positions of the genco's own decision variables inside the feature vector.
inline std::vector<int> decision_positions(const FeatureSpec& spec, const BidSet& shape) {
    const std::size_t per = decision_size(shape);
    auto observed = spec.observed_generators(shape.num_generators());
    std::vector<int> pos;
    for (int g : spec.genco) {
        auto it = std::find(observed.begin(), observed.end(), g);
        if (it == observed.end()) throw ValidationError("genco generator not observed at this level");
        std::size_t base = static_cast<std::size_t>(it - observed.begin()) * per;
        for (std::size_t k = 0; k < per; ++k) pos.push_back(static_cast<int>(base + k));
    }
    return pos;
}

// ---------------------------------------------------------------------------
// Scaling and splits

/// Column-wise map to [0, 1] on the fitted data; constant columns map to 0.5. No clamping.
struct MinMaxScaler {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dim() const { return lo.size(); }

    double scale_of(std::size_t j) const { return hi[j] > lo[j] ? hi[j] - lo[j] : 0.0; }

    std::vector<double> apply(const std::vector<double>& x) const {
        if (x.size() != lo.size()) throw ValidationError("dimension mismatch in scaler");
        std::vector<double> out(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) out[j] = hi[j] > lo[j] ? (x[j] - lo[j]) / (hi[j] - lo[j]) : 0.5;
        return out;
    }
    std::vector<double> invert(const std::vector<double>& s) const {
        std::vector<double> out(s.size());
        for (std::size_t j = 0; j < s.size(); ++j) out[j] = hi[j] > lo[j] ? lo[j] + s[j] * (hi[j] - lo[j]) : lo[j];
        return out;
    }
    /// d(scaled_j)/d(raw_j); zero for constant columns.
    double jacobian(std::size_t j) const { return hi[j] > lo[j] ? 1.0 / (hi[j] - lo[j]) : 0.0; }
};

inline MinMaxScaler fit_minmax(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw ValidationError("empty training set");
    MinMaxScaler s;
    s.lo = rows.front();
    s.hi = rows.front();
    for (const auto& r : rows) {
        if (r.size() != s.lo.size()) throw ValidationError("ragged feature rows");
        for (std::size_t j = 0; j < r.size(); ++j) {
            s.lo[j] = std::min(s.lo[j], r[j]);
            s.hi[j] = std::max(s.hi[j], r[j]);
        }
    }
    return s;
}

/// fold[i] in [0, k_folds) for training rows, -1 for test rows.
struct SplitAssignment {
    std::vector<int> fold;
    int k_folds = 0;

    bool is_train(std::size_t i) const { return fold[i] >= 0; }
};

inline SplitAssignment split_dataset(std::size_t rows, double train_frac, int k_folds, std::uint64_t seed) {
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw ValidationError("train fraction must lie in (0, 1)");
    if (k_folds < 2) throw ValidationError("need at least 2 folds");
    if (rows < static_cast<std::size_t>(k_folds)) throw ValidationError("dataset smaller than the fold count");
    std::vector<std::size_t> perm(rows);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(rows)));
    if (n_train < static_cast<std::size_t>(k_folds)) throw ValidationError("training partition smaller than the fold count");
    SplitAssignment s;
    s.k_folds = k_folds;
    s.fold.assign(rows, -1);
    for (std::size_t k = 0; k < n_train; ++k) s.fold[perm[k]] = static_cast<int>(k % static_cast<std::size_t>(k_folds));
    return s;
}

} // namespace poolbid
