#pragma once

// Refined Markov partition P_o: the neutral cell [0, a_1] is cut at the
// backward orbit b_0 = a_1 > b_1 > b_2 > ... of a_1 under the neutral branch,
// giving cells I_{-k} = [b_k, b_{k-1}]; cells of the expanding branches keep
// their positive index. Symbols are signed integers.

#include "intmaps/map_core.hpp"

#include <map>
#include <random>
#include <set>

namespace intmaps {

using Symbol = int;
using Word = std::vector<Symbol>;

/// Emitted for points below b_{K_max}: the truncated partition cannot label them.
inline constexpr Symbol kUnderflow = std::numeric_limits<Symbol>::min();

class RefinedPartition {
public:
    RefinedPartition(std::vector<double> b, std::vector<double> endpoints)
        : b_(std::move(b)), a_(std::move(endpoints)) {}

    int k_max() const noexcept { return static_cast<int>(b_.size()) - 1; }
    double b(int k) const { return b_.at(static_cast<std::size_t>(k)); }
    const std::vector<double>& b_sequence() const noexcept { return b_; }
    /// Number of positive symbols 1..N-1.
    int positive_count() const noexcept { return static_cast<int>(a_.size()) - 2; }
    double a(int j) const { return a_.at(static_cast<std::size_t>(j)); }

    bool is_symbol(Symbol s) const noexcept {
        return (s < 0 && s >= -k_max()) || (s >= 1 && s <= positive_count());
    }

    Interval element(Symbol s) const {
        INTMAPS_REQUIRE(is_symbol(s), ErrorCode::InvalidArgument, "not a symbol of the partition: " + std::to_string(s));
        if (s > 0) return {a_[static_cast<std::size_t>(s)], a_[static_cast<std::size_t>(s) + 1]};
        const auto k = static_cast<std::size_t>(-s);
        return {b_[k], b_[k - 1]};
    }

    /// L_{-k} = b_{k-1} - b_k for k >= 1, and L_0 = |J| = 1 - a_1.
    double neutral_length(int m) const {
        INTMAPS_REQUIRE(m <= 0 && m >= -k_max(), ErrorCode::InvalidArgument, "L index out of range");
        if (m == 0) return 1.0 - a_[1];
        return element(m).width();
    }

    /// Image T(I_s): I_{-k+1} for s = -k <= -2, J for s = -1, [0,1] for s >= 1.
    Interval image_of(Symbol s) const {
        if (s >= 1) return {0.0, 1.0};
        if (s == -1) return {a_[1], 1.0};
        return element(s + 1);
    }

    /// Left-closed cells [lo, hi); x = 1 belongs to the last cell.
    Symbol symbol_of(double x) const noexcept {
        if (x >= a_[1]) {
            auto it = std::upper_bound(a_.begin(), a_.end() - 1, x);
            return static_cast<Symbol>(it - a_.begin()) - 1;
        }
        auto it = std::partition_point(b_.begin(), b_.end(), [x](double v) { return v > x; });
        if (it == b_.end()) return kUnderflow;
        return -static_cast<Symbol>(it - b_.begin());
    }

    /// Markov compatibility: may symbol t follow s?
    static bool compatible(Symbol s, Symbol t) noexcept {
        if (s >= 1) return true;
        if (s == -1) return t >= 1;
        return t == s + 1;
    }

private:
    std::vector<double> b_;
    std::vector<double> a_;
};

/// b_0 = a_1, b_{k+1} = tau_0^{-1}(b_k), k < k_max.
inline RefinedPartition compute_b_sequence(const MapSpec& map, int k_max) {
    INTMAPS_REQUIRE(k_max >= 1, ErrorCode::InvalidArgument, "K_max must be >= 1");
    std::vector<double> b(static_cast<std::size_t>(k_max) + 1);
    b[0] = map.a(1);
    for (std::size_t k = 1; k < b.size(); ++k) {
        b[k] = map.inverse_branch(0, b[k - 1]);
        INTMAPS_REQUIRE(b[k] < b[k - 1] && b[k] > 0.0, ErrorCode::RootFinding,
                        "b-sequence lost monotonicity at k=" + std::to_string(k));
    }
    return RefinedPartition(std::move(b), map.endpoints());
}

inline Word itinerary(const MapSpec& map, const RefinedPartition& part, double x, int n) {
    INTMAPS_REQUIRE(n >= 1, ErrorCode::InvalidArgument, "itinerary length must be >= 1");
    INTMAPS_REQUIRE(x > 0.0 && x <= 1.0, ErrorCode::InvalidArgument, "itinerary start must lie in (0,1]");
    Word w(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        w[static_cast<std::size_t>(k)] = part.symbol_of(x);
        x = map.eval(x);
    }
    return w;
}

inline bool has_underflow(const Word& w) noexcept {
    return std::find(w.begin(), w.end(), kUnderflow) != w.end();
}

inline bool has_positive(const Word& w) noexcept {
    return std::any_of(w.begin(), w.end(), [](Symbol s) { return s > 0; });
}

struct Cylinder {
    Word word;
    Interval interval;
    bool empty() const noexcept { return interval.width() < kEmptyWidth; }
    double length() const noexcept { return empty() ? 0.0 : interval.width(); }

    static constexpr double kEmptyWidth = 1e-14;
};

/// Preimage of `target` inside I_s.
inline Interval pull_back(const MapSpec& map, const RefinedPartition& part, Symbol s, const Interval& target) {
    const Interval range = intersect(target, part.image_of(s));
    if (range.width() <= 0.0) {
        const Interval cell = part.element(s);
        return {cell.lo, cell.lo};
    }
    const int branch = s >= 1 ? s : 0;
    const double u = map.inverse_branch(branch, range.lo);
    const double v = map.inverse_branch(branch, range.hi);
    return {std::min(u, v), std::max(u, v)};
}

/// I_{j^n} = I_{j_0} ∩ T^{-1} I_{j_1} ∩ ... by backward induction from the last symbol.
inline Cylinder cylinder_of(const MapSpec& map, const RefinedPartition& part, const Word& word) {
    if (word.empty()) return {word, {0.0, 1.0}};
    for (Symbol s : word)
        INTMAPS_REQUIRE(part.is_symbol(s), ErrorCode::InvalidArgument, "word contains a non-symbol: " + std::to_string(s));
    Interval c = part.element(word.back());
    for (std::size_t i = word.size() - 1; i-- > 0;) {
        c = pull_back(map, part, word[i], c);
        if (c.width() < Cylinder::kEmptyWidth) return {word, {c.lo, c.lo}};
    }
    return {word, c};
}

// ---------------------------------------------------------------------------
// Cylinder decay

struct CylinderScan {
    int depth = 0;
    double max_length = 0.0;
    Word argmax;
    std::size_t words = 0;             // distinct words examined
    std::size_t skipped_underflow = 0; // seeds whose itinerary left the truncated partition
    bool exhaustive = false;
};

struct CylinderScanOptions {
    std::size_t frontier_cap = 100000;
    std::uint64_t seed = 1;
};

/// Number of Markov-compatible words of length n, saturating at cap + 1.
inline std::size_t count_words(const RefinedPartition& part, int n, std::size_t cap) {
    const std::size_t sat = cap + 1;
    auto add = [sat](std::size_t x, std::size_t y) { return std::min(sat, x + y); };
    auto mul = [sat](std::size_t x, std::size_t y) {
        return (y != 0 && x > sat / y) ? sat : std::min(sat, x * y);
    };
    const auto m = static_cast<std::size_t>(part.positive_count());
    const auto K = static_cast<std::size_t>(part.k_max());
    // q: words ending at one given positive symbol; neg[k]: words ending at -k.
    std::size_t q = 1;
    std::vector<std::size_t> neg(K + 2, 1);
    neg[0] = 0;
    neg[K + 1] = 0;
    for (int len = 2; len <= n; ++len) {
        std::size_t total_pos = mul(m, q);
        std::vector<std::size_t> next(K + 2, 0);
        for (std::size_t k = 1; k <= K; ++k) next[k] = add(total_pos, neg[k + 1]);
        q = add(total_pos, neg[1]);
        neg = std::move(next);
    }
    std::size_t total = mul(m, q);
    for (std::size_t k = 1; k <= K; ++k) total = add(total, neg[k]);
    return total;
}

namespace detail {

inline void enumerate_words(const RefinedPartition& part, int n, Word& prefix, std::vector<Word>& out) {
    if (static_cast<int>(prefix.size()) == n) {
        out.push_back(prefix);
        return;
    }
    auto visit = [&](Symbol t) {
        if (!prefix.empty() && !RefinedPartition::compatible(prefix.back(), t)) return;
        prefix.push_back(t);
        enumerate_words(part, n, prefix, out);
        prefix.pop_back();
    };
    for (Symbol t = -part.k_max(); t <= -1; ++t) visit(t);
    for (Symbol t = 1; t <= part.positive_count(); ++t) visit(t);
}

} // namespace detail

/// All Markov-compatible words of length n over the truncated alphabet.
inline std::vector<Word> enumerate_words(const RefinedPartition& part, int n) {
    std::vector<Word> out;
    Word prefix;
    detail::enumerate_words(part, n, prefix, out);
    return out;
}

/// Largest realized depth-n cylinders for every n in 1..n_max, from the same
/// stratified seeds (one per 1/sample_budget slab), so the sequence is
/// non-increasing by construction of refinement. Exhaustive enumeration is
/// used for a depth whenever the reachable-word count fits the frontier cap.
inline std::vector<CylinderScan> max_cylinder_lengths(const MapSpec& map, const RefinedPartition& part, int n_max,
                                                      std::size_t sample_budget, const CylinderScanOptions& opt = {}) {
    INTMAPS_REQUIRE(n_max >= 1, ErrorCode::InvalidArgument, "depth must be >= 1");
    INTMAPS_REQUIRE(sample_budget >= 1, ErrorCode::InvalidArgument, "sample budget must be >= 1");
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> seeds(sample_budget);
    for (std::size_t i = 0; i < sample_budget; ++i)
        seeds[i] = (static_cast<double>(i) + unif(rng)) / static_cast<double>(sample_budget);

    std::vector<Word> paths(sample_budget);
    std::vector<double> orbit(seeds);
    std::vector<CylinderScan> scans;
    for (int n = 1; n <= n_max; ++n) {
        CylinderScan scan;
        scan.depth = n;
        std::set<Word> words;
        for (std::size_t i = 0; i < sample_budget; ++i) {
            if (!paths[i].empty() && paths[i].back() == kUnderflow) {
                ++scan.skipped_underflow;
                continue;
            }
            if (seeds[i] <= 0.0) {
                paths[i].push_back(kUnderflow);
                ++scan.skipped_underflow;
                continue;
            }
            paths[i].push_back(part.symbol_of(orbit[i]));
            orbit[i] = map.eval(orbit[i]);
            if (paths[i].back() == kUnderflow) {
                ++scan.skipped_underflow;
                continue;
            }
            words.insert(paths[i]);
        }
        std::vector<Word> candidates(words.begin(), words.end());
        if (count_words(part, n, opt.frontier_cap) <= opt.frontier_cap) {
            candidates = enumerate_words(part, n);
            scan.exhaustive = true;
        }
        scan.words = candidates.size();
        for (const Word& w : candidates) {
            const Cylinder c = cylinder_of(map, part, w);
            if (c.length() > scan.max_length) {
                scan.max_length = c.length();
                scan.argmax = w;
            }
        }
        scans.push_back(std::move(scan));
    }
    return scans;
}

inline CylinderScan max_cylinder_length(const MapSpec& map, const RefinedPartition& part, int n,
                                        std::size_t sample_budget, const CylinderScanOptions& opt = {}) {
    return max_cylinder_lengths(map, part, n, sample_budget, opt).back();
}

// ---------------------------------------------------------------------------
// Asymptotics of the b-sequence

/// n_k: the unique n >= 1 with b in [(n+1)^-alpha, n^-alpha).
inline std::int64_t bracket_index(double b, double alpha) {
    INTMAPS_REQUIRE(b > 0.0 && b < 1.0, ErrorCode::InvalidArgument, "bracket_index needs b in (0,1)");
    auto n = static_cast<std::int64_t>(std::ceil(std::pow(b, -1.0 / alpha))) - 1;
    n = std::max<std::int64_t>(n, 1);
    // Repair floating rounding at the bracket boundaries.
    while (n > 1 && b >= std::pow(static_cast<double>(n), -alpha)) --n;
    while (b < std::pow(static_cast<double>(n + 1), -alpha)) ++n;
    return n;
}

struct BSequenceAsymptotics {
    double loglog_slope = 0.0;     // slope of log b_k against log k
    double expected_slope = 0.0;   // -1/(beta+1)
    double gap_ratio_min = 0.0;    // (b_{k-1} - b_k) / b_k^(beta+2)
    double gap_ratio_max = 0.0;
    int max_grid_cells_per_element = 0; // grid intervals [(n+1)^-a, n^-a) hit by one I_{-k}
    int max_elements_per_grid_cell = 0; // cells I_{-k} hit by one grid interval
    double summability_max = 0.0;       // max_q sum_{k<=q} b_k^(2 beta + 2)
    double summability_tail = 0.0;      // the same sum over k in (K/2, K]
};

/// Checks over k in [k_lo, k_hi] (k_hi <= K_max).
inline BSequenceAsymptotics analyze_b_sequence(const RefinedPartition& part, double beta, int k_lo, int k_hi) {
    INTMAPS_REQUIRE(k_lo >= 1 && k_lo < k_hi && k_hi <= part.k_max(), ErrorCode::InvalidArgument,
                    "analysis window must satisfy 1 <= k_lo < k_hi <= K_max");
    BSequenceAsymptotics out;
    const double alpha = 1.0 / (beta + 1.0);
    out.expected_slope = -alpha;

    std::vector<double> ks, bs;
    for (auto k : log_spaced(k_lo, k_hi, 50)) {
        ks.push_back(static_cast<double>(k));
        bs.push_back(part.b(static_cast<int>(k)));
    }
    out.loglog_slope = loglog_fit(ks, bs).slope;

    out.gap_ratio_min = std::numeric_limits<double>::infinity();
    std::map<std::int64_t, int> cell_hits;
    for (int k = k_lo; k <= k_hi; ++k) {
        const double bk = part.b(k);
        const double ratio = (part.b(k - 1) - bk) / std::pow(bk, beta + 2.0);
        out.gap_ratio_min = std::min(out.gap_ratio_min, ratio);
        out.gap_ratio_max = std::max(out.gap_ratio_max, ratio);
        // I_{-k} = [b_k, b_{k-1}] spans grid indices n_{k-1} .. n_k.
        const std::int64_t n_hi = bracket_index(bk, alpha);
        const std::int64_t n_lo = bracket_index(part.b(k - 1), alpha);
        out.max_grid_cells_per_element =
            std::max(out.max_grid_cells_per_element, static_cast<int>(n_hi - n_lo + 1));
        for (std::int64_t n = n_lo; n <= n_hi; ++n) ++cell_hits[n];
    }
    // Grid cells at the window edges are only partially covered.
    for (const auto& [n, hits] : cell_hits) {
        if (n == cell_hits.begin()->first || n == cell_hits.rbegin()->first) continue;
        out.max_elements_per_grid_cell = std::max(out.max_elements_per_grid_cell, hits);
    }

    double sum = 0.0;
    const int K = part.k_max();
    for (int k = 1; k <= K; ++k) {
        const double term = std::pow(part.b(k), 2.0 * beta + 2.0);
        sum += term;
        if (k > K / 2) out.summability_tail += term;
    }
    out.summability_max = sum;
    return out;
}

} // namespace intmaps
