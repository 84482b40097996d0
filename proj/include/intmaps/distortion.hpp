#pragma once

// Excursion parsing of itineraries and empirical distortion envelopes.
//
// An itinerary j_0..j_n is cut at k_0 = 0 and at every later index with a
// positive symbol (a visit to J). Frame i covers k_i .. k_{i+1}-1 with
// k_{l+1} = n+1. Frame 0 starting inside the neutral cell is Type 1; the last
// frame is Type 4; in between, single J visits are Type 3 and excursions into
// the neutral cell are Type 2.

#include "intmaps/partition.hpp"

#include <array>
#include <random>

namespace intmaps {

enum class FrameType : std::uint8_t { Type1 = 1, Type2 = 2, Type3 = 3, Type4 = 4 };

struct Frame {
    int start = 0; // k_i
    int end = 0;   // k_{i+1} - 1, inclusive
    FrameType type = FrameType::Type4;
    int length() const noexcept { return end - start + 1; }
};

struct ParsedOrbit {
    Word itinerary;
    std::vector<Frame> frames;

    std::array<std::size_t, 4> type_counts() const noexcept {
        std::array<std::size_t, 4> c{};
        for (const Frame& f : frames) ++c[static_cast<std::size_t>(f.type) - 1];
        return c;
    }
};

inline ParsedOrbit parse_excursions(const Word& itinerary) {
    INTMAPS_REQUIRE(itinerary.size() >= 2, ErrorCode::InvalidArgument, "itinerary must have length >= 2");
    INTMAPS_REQUIRE(!has_underflow(itinerary), ErrorCode::InvalidArgument, "itinerary contains the underflow symbol");
    INTMAPS_REQUIRE(has_positive(itinerary), ErrorCode::TrivialParsing,
                    "trivial parsing: itinerary never visits J");
    ParsedOrbit out;
    out.itinerary = itinerary;
    const int len = static_cast<int>(itinerary.size());
    std::vector<int> starts{0};
    for (int k = 1; k < len; ++k)
        if (itinerary[static_cast<std::size_t>(k)] > 0) starts.push_back(k);
    starts.push_back(len);
    const std::size_t last = starts.size() - 2;
    for (std::size_t i = 0; i + 1 < starts.size(); ++i) {
        Frame f{starts[i], starts[i + 1] - 1, FrameType::Type4};
        if (i == last) {
            f.type = FrameType::Type4;
        } else if (i == 0 && itinerary[0] < 0) {
            f.type = FrameType::Type1;
        } else {
            f.type = f.length() == 1 ? FrameType::Type3 : FrameType::Type2;
        }
        out.frames.push_back(f);
    }
    return out;
}

namespace detail {

// log(|u| / |v|) without losing the relative accuracy of a small result.
inline double log_ratio(double u, double v) {
    const double au = std::abs(u);
    const double av = std::abs(v);
    return std::log1p((au - av) / av);
}

struct PairOrbit {
    std::vector<double> x, y; // x_0..x_{n+1}
    std::vector<double> sep;  // |x_k - y_k|, before rounding x_k and y_k
    std::vector<double> logs; // log |T'(x_k)| / |T'(y_k)|, k = 0..n
};

// Orbits of nearby points separate like 1/|cylinder|, so double orbits lose
// the ratio's leading digits on thin cylinders; use 113 bits when offered.
inline PairOrbit pair_orbit_wide(const MapSpec& map, double x0, double y0, int n) {
    PairOrbit o;
    o.x.reserve(static_cast<std::size_t>(n) + 2);
    o.y.reserve(static_cast<std::size_t>(n) + 2);
    o.logs.reserve(static_cast<std::size_t>(n) + 1);
    WideReal x = x0, y = y0;
    for (int k = 0; k <= n; ++k) {
        o.x.push_back(static_cast<double>(x));
        o.y.push_back(static_cast<double>(y));
        o.sep.push_back(static_cast<double>(abs(x - y)));
        const WideReal u = abs(map.deriv(x)), v = abs(map.deriv(y));
        o.logs.push_back(std::log1p(static_cast<double>((u - v) / v)));
        x = map.eval(x);
        y = map.eval(y);
    }
    o.x.push_back(static_cast<double>(x));
    o.y.push_back(static_cast<double>(y));
    o.sep.push_back(static_cast<double>(abs(x - y)));
    return o;
}

inline PairOrbit pair_orbit(const MapSpec& map, double x, double y, int n) {
    if (map.has_wide()) return pair_orbit_wide(map, x, y, n);
    PairOrbit o;
    o.x.reserve(static_cast<std::size_t>(n) + 2);
    o.y.reserve(static_cast<std::size_t>(n) + 2);
    o.logs.reserve(static_cast<std::size_t>(n) + 1);
    for (int k = 0; k <= n; ++k) {
        o.x.push_back(x);
        o.y.push_back(y);
        o.sep.push_back(std::abs(x - y));
        o.logs.push_back(log_ratio(map.deriv(x), map.deriv(y)));
        x = map.eval(x);
        y = map.eval(y);
    }
    o.x.push_back(x);
    o.y.push_back(y);
    o.sep.push_back(std::abs(x - y));
    return o;
}

inline void require_same_itinerary(const RefinedPartition& part, const PairOrbit& o, int n) {
    for (int k = 0; k <= n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        const Symbol sx = part.symbol_of(o.x[i]);
        const Symbol sy = part.symbol_of(o.y[i]);
        INTMAPS_REQUIRE(sx == sy && sx != kUnderflow, ErrorCode::ItineraryMismatch,
                        "points leave their common cylinder at step " + std::to_string(k));
    }
}

} // namespace detail

/// sum_{k=0}^{n} log(|T'(x_k)| / |T'(y_k)|) for x, y sharing j_0..j_n.
inline double log_distortion(const MapSpec& map, const RefinedPartition& part, double x, double y, int n) {
    INTMAPS_REQUIRE(n >= 0, ErrorCode::InvalidArgument, "n must be >= 0");
    const detail::PairOrbit o = detail::pair_orbit(map, x, y, n);
    detail::require_same_itinerary(part, o, n);
    double s = 0.0;
    for (double l : o.logs) s += l;
    return s;
}

// ---------------------------------------------------------------------------
// Per-frame estimates

struct OrbitPair {
    double x = 0.0;
    double y = 0.0;
    int n = 0; // shared itinerary j_0..j_n
};

struct FrameRecord {
    std::size_t pair = 0;
    std::size_t frame = 0;
    FrameType type = FrameType::Type4;
    int start = 0;
    int end = 0;
    double sep_start = 0.0; // |x_{k_i} - y_{k_i}|
    double sep_next = 0.0;  // |x_{k_{i+1}} - y_{k_{i+1}}|
    double log_sum = 0.0;   // sum of log ratios over the frame
};

struct SegmentReport {
    // Indexed by type - 1. eta: sep_start / sep_next; kappa: |log_sum| / sep_next
    // for types 1-3 and |log_sum| for type 4.
    std::array<double, 4> eta_by_type{};
    std::array<double, 4> kappa_by_type{};
    std::array<std::size_t, 4> frame_counts{};
    double eta_hat = 0.0;
    double kappa_hat = 0.0;
    std::size_t pairs_used = 0;
    std::size_t pairs_skipped = 0; // itinerary mismatch or coincident points
    std::vector<double> total_abs_log; // per used pair
    std::vector<FrameRecord> frames;

    /// kappa / (1 - eta); infinite when eta >= 1.
    double c_hat() const noexcept {
        return eta_hat < 1.0 ? kappa_hat / (1.0 - eta_hat) : std::numeric_limits<double>::infinity();
    }
};

/// Smallest (eta, kappa) consistent with every frame of every pair. Type 4
/// frames also contribute their sep ratio to eta: they start in J, so the
/// chaining bound over the whole orbit needs it.
inline SegmentReport verify_segment_estimates(const MapSpec& map, const RefinedPartition& part,
                                              std::span<const OrbitPair> pairs) {
    SegmentReport rep;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        const OrbitPair& op = pairs[p];
        INTMAPS_REQUIRE(op.n >= 1, ErrorCode::InvalidArgument, "pairs need itineraries of length >= 2");
        if (op.x == op.y) {
            ++rep.pairs_skipped;
            continue;
        }
        const detail::PairOrbit o = detail::pair_orbit(map, op.x, op.y, op.n);
        try {
            detail::require_same_itinerary(part, o, op.n);
        } catch (const Error&) {
            ++rep.pairs_skipped;
            continue;
        }
        Word it(static_cast<std::size_t>(op.n) + 1);
        for (int k = 0; k <= op.n; ++k) it[static_cast<std::size_t>(k)] = part.symbol_of(o.x[static_cast<std::size_t>(k)]);
        const ParsedOrbit parsed = parse_excursions(it);
        ++rep.pairs_used;
        double total = 0.0;
        for (std::size_t i = 0; i < parsed.frames.size(); ++i) {
            const Frame& f = parsed.frames[i];
            FrameRecord r;
            r.pair = p;
            r.frame = i;
            r.type = f.type;
            r.start = f.start;
            r.end = f.end;
            const auto s0 = static_cast<std::size_t>(f.start);
            const auto s1 = static_cast<std::size_t>(f.end) + 1;
            r.sep_start = o.sep[s0];
            r.sep_next = o.sep[s1];
            for (std::size_t k = s0; k < s1; ++k) r.log_sum += o.logs[k];
            total += r.log_sum;
            const auto t = static_cast<std::size_t>(f.type) - 1;
            ++rep.frame_counts[t];
            if (r.sep_next > 0.0) rep.eta_by_type[t] = std::max(rep.eta_by_type[t], r.sep_start / r.sep_next);
            const double kappa =
                f.type == FrameType::Type4 ? std::abs(r.log_sum) : (r.sep_next > 0.0 ? std::abs(r.log_sum) / r.sep_next : 0.0);
            rep.kappa_by_type[t] = std::max(rep.kappa_by_type[t], kappa);
            rep.frames.push_back(r);
        }
        rep.total_abs_log.push_back(std::abs(total));
    }
    for (std::size_t t = 0; t < 4; ++t) {
        rep.eta_hat = std::max(rep.eta_hat, rep.eta_by_type[t]);
        rep.kappa_hat = std::max(rep.kappa_hat, rep.kappa_by_type[t]);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Bounded distortion on cylinders

struct CylinderPair {
    Word word;
    Interval cylinder;
    OrbitPair pair;
};

/// Random non-empty cylinders of depth 2..max_depth that contain a positive
/// symbol, each contributing pairs at its (nudged) endpoints, midpoint and
/// two uniform points.
inline std::vector<CylinderPair> sample_cylinder_pairs(const MapSpec& map, const RefinedPartition& part, int max_depth,
                                                       std::size_t cylinders, std::uint64_t seed) {
    INTMAPS_REQUIRE(max_depth >= 2, ErrorCode::InvalidArgument, "depth must be >= 2");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> depth_dist(2, max_depth);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double floor = part.b(part.k_max());
    constexpr double kNudge = 1e-6;
    std::vector<CylinderPair> out;
    std::size_t attempts = 0;
    std::size_t accepted = 0;
    while (accepted < cylinders) {
        INTMAPS_REQUIRE(++attempts <= 1000 * cylinders + 1000, ErrorCode::NotConverged,
                        "could not sample enough admissible cylinders");
        const int m = depth_dist(rng);
        const double x = floor + (1.0 - floor) * unif(rng);
        if (!(x > 0.0)) continue;
        const Word w = itinerary(map, part, x, m);
        if (has_underflow(w) || !has_positive(w)) continue;
        const Cylinder c = cylinder_of(map, part, w);
        if (c.empty()) continue;
        ++accepted;
        const Interval iv = c.interval;
        auto at = [&](double t) { return iv.lo + t * iv.width(); };
        const double u1 = unif(rng), u2 = unif(rng);
        const std::array<std::pair<double, double>, 4> fr{{{kNudge, 1.0 - kNudge}, {kNudge, 0.5}, {0.5, 1.0 - kNudge}, {u1, u2}}};
        for (const auto& [s, t] : fr) out.push_back({w, iv, {at(s), at(t), m - 1}});
    }
    return out;
}

struct ConditionalMeasureCheck {
    double image_conditional = 0.0; // Leb(T^n B | I_{j_n})
    double image_full = 0.0;        // Leb(T^{n+1} B)
    double source_conditional = 0.0; // Leb(B | I_{j^{n+1}})
};

/// Conditional measures for B inside the cylinder of `word` (length n+1).
inline ConditionalMeasureCheck conditional_measures(const MapSpec& map, const RefinedPartition& part, const Word& word,
                                                    const Interval& b) {
    INTMAPS_REQUIRE(has_positive(word), ErrorCode::TrivialParsing, "cylinder word must contain a positive symbol");
    const Cylinder c = cylinder_of(map, part, word);
    INTMAPS_REQUIRE(!c.empty(), ErrorCode::InvalidArgument, "cylinder is empty");
    INTMAPS_REQUIRE(b.lo >= c.interval.lo && b.hi <= c.interval.hi && b.width() > 0.0, ErrorCode::InvalidArgument,
                    "B must be a non-degenerate subinterval of the cylinder");
    const int n = static_cast<int>(word.size()) - 1;
    // T^n is monotone on the cylinder, so B maps to the interval between its endpoint images.
    double u = b.lo, v = b.hi;
    for (int k = 0; k < n; ++k) {
        const Branch& br = map.branch(word[static_cast<std::size_t>(k)] > 0 ? word[static_cast<std::size_t>(k)] : 0);
        u = br.value(u);
        v = br.value(v);
    }
    ConditionalMeasureCheck out;
    out.image_conditional = std::abs(v - u) / part.element(word.back()).width();
    const Branch& last = map.branch(word.back() > 0 ? word.back() : 0);
    out.image_full = std::abs(last.value(v) - last.value(u));
    out.source_conditional = b.width() / c.interval.width();
    return out;
}

struct DistortionReport {
    int depth = 0;
    std::size_t cylinders = 0;
    std::size_t pairs = 0;
    double max_abs_log = 0.0; // over sum_{k=0}^{n} and sum_{k<n}
    double d_observed = 1.0;  // exp(max_abs_log)
    double eta_hat = 0.0;
    double kappa_hat = 0.0;
    double c_hat = 0.0; // kappa / (1 - eta)
    double d_hat = 1.0; // exp(c_hat)
    std::array<std::size_t, 4> frame_counts{};
    std::size_t pairs_skipped = 0;
    std::size_t conditional_checks = 0;
    std::size_t violations_ii = 0;
    std::size_t violations_iii = 0;
    double worst_ratio_ii = 0.0;  // Leb(T^n B | I_{j_n}) / Leb(B | cylinder)
    double worst_ratio_iii = 0.0; // Leb(T^{n+1} B) / Leb(B | cylinder)
    bool c_hat_sound = false;     // c_hat >= every observed |sum|
    std::vector<FrameRecord> frames;
};

inline DistortionReport verify_lem_dist(const MapSpec& map, const RefinedPartition& part, int depth,
                                        std::size_t trials, std::uint64_t seed = 1) {
    INTMAPS_REQUIRE(depth >= 2, ErrorCode::InvalidArgument, "depth must be >= 2");
    INTMAPS_REQUIRE(trials >= 100, ErrorCode::InvalidArgument, "trials must be >= 100");
    DistortionReport rep;
    rep.depth = depth;
    rep.cylinders = trials;
    const std::vector<CylinderPair> sample = sample_cylinder_pairs(map, part, depth, trials, seed);
    rep.pairs = sample.size();

    std::vector<OrbitPair> pairs;
    pairs.reserve(sample.size());
    for (const CylinderPair& cp : sample) {
        const OrbitPair& op = cp.pair;
        const detail::PairOrbit o = detail::pair_orbit(map, op.x, op.y, op.n);
        try {
            detail::require_same_itinerary(part, o, op.n);
        } catch (const Error&) {
            continue;
        }
        pairs.push_back(op);
        double full = 0.0;
        for (double l : o.logs) full += l;
        const double head = full - o.logs.back();
        rep.max_abs_log = std::max({rep.max_abs_log, std::abs(full), std::abs(head)});
    }
    rep.d_observed = std::exp(rep.max_abs_log);

    const SegmentReport seg = verify_segment_estimates(map, part, pairs);
    rep.pairs_skipped = seg.pairs_skipped + (sample.size() - pairs.size());
    rep.eta_hat = seg.eta_hat;
    rep.kappa_hat = seg.kappa_hat;
    rep.c_hat = seg.c_hat();
    rep.d_hat = std::exp(rep.c_hat);
    rep.frame_counts = seg.frame_counts;
    rep.frames = seg.frames;
    rep.c_hat_sound = std::all_of(seg.total_abs_log.begin(), seg.total_abs_log.end(),
                                  [&](double v) { return v <= rep.c_hat; });

    // (ii)/(iii) on a random subinterval per cylinder.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t i = 0; i < sample.size(); i += 4) {
        const CylinderPair& cp = sample[i];
        double s = unif(rng), t = unif(rng);
        if (s > t) std::swap(s, t);
        const double w = cp.cylinder.width();
        const Interval b{cp.cylinder.lo + s * w, cp.cylinder.lo + t * w};
        if (!(b.width() > 0.0)) continue;
        const ConditionalMeasureCheck m = conditional_measures(map, part, cp.word, b);
        ++rep.conditional_checks;
        const double r2 = m.image_conditional / m.source_conditional;
        const double r3 = m.image_full / m.source_conditional;
        rep.worst_ratio_ii = std::max(rep.worst_ratio_ii, r2);
        rep.worst_ratio_iii = std::max(rep.worst_ratio_iii, r3);
        if (r2 > rep.d_observed * (1.0 + 1e-9)) ++rep.violations_ii;
        if (r3 > rep.d_observed * (1.0 + 1e-9)) ++rep.violations_iii;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Distortion along neutral excursions

struct YoungStratum {
    int j = 0;
    int p = 0;
    double max_quotient = 0.0; // |log ratio| * L_{p-j} / |T^p x - T^p y|
    double max_abs_log = 0.0;
};

struct YoungCheckRecord {
    std::vector<std::int64_t> n_k;       // index k-1 holds n_k, k = 1..j_max
    std::vector<double> gap_ratio;       // (b_{k-1} - b_k) / (n_k^-a - (n_k+1)^-a)
    std::vector<YoungStratum> strata;
    std::vector<double> envelope_by_j;   // index j-1: max quotient over p and pairs
    double c_prime = 0.0;                // max quotient overall
    double max_abs_log = 0.0;
    bool second_inequality = true;       // |log ratio| <= c_prime everywhere
    bool separations_within_cells = true; // |T^p x - T^p y| <= L_{p-j}
    double comparability_spread = 1.0;   // max over pairs of max_i s_i / min_i s_i, s_i = |d_i| / L_{i-j}
    std::size_t pairs_per_stratum = 0;
};

inline YoungCheckRecord verify_young(const MapSpec& map, const RefinedPartition& part, int j_max,
                                     std::size_t pairs_per_stratum = 1000, std::uint64_t seed = 1) {
    INTMAPS_REQUIRE(j_max >= 1 && j_max <= part.k_max(), ErrorCode::InvalidArgument, "j_max must lie in [1, K_max]");
    INTMAPS_REQUIRE(pairs_per_stratum >= 3, ErrorCode::InvalidArgument, "need at least 3 pairs per stratum");
    YoungCheckRecord rec;
    rec.pairs_per_stratum = pairs_per_stratum;
    const double alpha = map.alpha();
    const Branch& neutral = map.branch(0);

    for (int k = 1; k <= j_max; ++k) {
        const std::int64_t n = bracket_index(part.b(k), alpha);
        rec.n_k.push_back(n);
        const double dn = std::pow(static_cast<double>(n), -alpha) - std::pow(static_cast<double>(n + 1), -alpha);
        rec.gap_ratio.push_back((part.b(k - 1) - part.b(k)) / dn);
    }

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    constexpr double kNudge = 1e-6;
    std::vector<double> sx, sy, lg;
    for (int j = 1; j <= j_max; ++j) {
        const Interval cell = part.element(-j);
        std::vector<YoungStratum> strata(static_cast<std::size_t>(j) + 1);
        for (int p = 0; p <= j; ++p) strata[static_cast<std::size_t>(p)] = {j, p, 0.0, 0.0};
        for (std::size_t q = 0; q < pairs_per_stratum; ++q) {
            double s, t;
            switch (q) {
            case 0: s = kNudge; t = 1.0 - kNudge; break;
            case 1: s = kNudge; t = 0.5; break;
            case 2: s = 0.5; t = 1.0 - kNudge; break;
            default: s = unif(rng); t = unif(rng);
            }
            double x = cell.lo + s * cell.width();
            double y = cell.lo + t * cell.width();
            if (x == y) continue;
            double log_sum = 0.0;
            double s_min = std::numeric_limits<double>::infinity(), s_max = 0.0;
            for (int p = 0; p <= j; ++p) {
                const double sep = std::abs(x - y);
                const double len = part.neutral_length(p - j);
                YoungStratum& st = strata[static_cast<std::size_t>(p)];
                if (sep > len * (1.0 + 1e-9)) rec.separations_within_cells = false;
                const double quotient = std::abs(log_sum) * len / sep;
                st.max_quotient = std::max(st.max_quotient, quotient);
                st.max_abs_log = std::max(st.max_abs_log, std::abs(log_sum));
                s_min = std::min(s_min, sep / len);
                s_max = std::max(s_max, sep / len);
                if (p == j) break;
                log_sum += detail::log_ratio(neutral.d1(x), neutral.d1(y));
                x = neutral.value(x);
                y = neutral.value(y);
            }
            if (s_min > 0.0) rec.comparability_spread = std::max(rec.comparability_spread, s_max / s_min);
        }
        double env = 0.0;
        for (const YoungStratum& st : strata) {
            env = std::max(env, st.max_quotient);
            rec.max_abs_log = std::max(rec.max_abs_log, st.max_abs_log);
        }
        rec.envelope_by_j.push_back(env);
        rec.c_prime = std::max(rec.c_prime, env);
        rec.strata.insert(rec.strata.end(), strata.begin(), strata.end());
    }
    rec.second_inequality = rec.max_abs_log <= rec.c_prime;
    return rec;
}

} // namespace intmaps
