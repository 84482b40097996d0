#pragma once

// Forward images of interval sets and the finite-horizon form of the
// asymptotic-intersection test: Leb(T^{n+1} A ∩ T^n A) > 0 for some n, and
// then for every later n.

#include "intmaps/interval_set.hpp"
#include "intmaps/map_core.hpp"
#include "intmaps/partition.hpp"

#include <optional>

namespace intmaps {

inline constexpr std::size_t kDefaultComponentCap = 4096;

struct ImageResult {
    IntervalSet image;
    IntervalSet added; // region filled in by coarsening (over-approximation)
};

/// T(S) = ∪_j tau_j(S ∩ I_j), each piece imaged through its monotone endpoints.
inline ImageResult forward_image(const MapSpec& map, const IntervalSet& set,
                                 std::size_t component_cap = kDefaultComponentCap) {
    const auto& ends = map.endpoints();
    std::vector<Interval> pieces;
    for (const Interval& c : set.parts()) {
        // first branch whose domain reaches past c.lo
        auto first = std::upper_bound(ends.begin(), ends.end() - 1, c.lo);
        auto j = static_cast<std::size_t>(std::max<std::ptrdiff_t>(first - ends.begin() - 1, 0));
        for (; j + 1 < ends.size() && ends[j] < c.hi; ++j) {
            const double lo = std::max(c.lo, ends[j]);
            const double hi = std::min(c.hi, ends[j + 1]);
            if (!(hi > lo)) continue;
            const Branch& b = map.branch(static_cast<int>(j));
            const double u = b.value(lo);
            const double v = b.value(hi);
            pieces.push_back({std::min(u, v), std::max(u, v)});
        }
    }
    ImageResult out;
    out.image = IntervalSet(std::move(pieces)).coarsened(component_cap, &out.added);
    return out;
}

struct IntersectionProfile {
    std::vector<double> value;       // Leb(T^{n+1}A ∩ T^n A), n = 0..n_max
    std::vector<double> slack;       // over-approximation bound on value[n]
    std::vector<std::size_t> components; // components of T^n A
    std::optional<int> first_positive;   // n*
    double tol = 0.0;

    bool positive_at(std::size_t n) const { return value[n] > tol + slack[n]; }

    /// Every recorded n >= n* certified positive.
    bool persistent() const {
        if (!first_positive) return false;
        for (std::size_t n = static_cast<std::size_t>(*first_positive); n < value.size(); ++n)
            if (!positive_at(n)) return false;
        return true;
    }
};

namespace detail {

// Iterates S_{n+1} = T(S_n) alongside an error set E_n containing S_n \ T^n A.
class ImageSequence {
public:
    ImageSequence(const MapSpec& map, IntervalSet start, std::size_t cap)
        : map_(map), cap_(cap), current_(std::move(start)) {}

    const IntervalSet& current() const noexcept { return current_; }
    double slack() const noexcept { return error_.measure(); }

    void advance() {
        ImageResult img = forward_image(map_, current_, cap_);
        IntervalSet err = unite(forward_image(map_, error_, cap_).image, img.added);
        current_ = std::move(img.image);
        error_ = err.coarsened(cap_);
    }

private:
    const MapSpec& map_;
    std::size_t cap_;
    IntervalSet current_;
    IntervalSet error_;
};

} // namespace detail

/// A value counts as positive when it exceeds tol plus the measure of both
/// error sets, which bounds what coarsening could have added to it.
inline IntersectionProfile mn_test(const MapSpec& map, const IntervalSet& a, int n_max, double tol = 1e-12,
                                   std::size_t component_cap = kDefaultComponentCap) {
    INTMAPS_REQUIRE(a.measure() > 0.0, ErrorCode::InvalidArgument, "mn_test needs a set of positive measure");
    INTMAPS_REQUIRE(n_max >= 1, ErrorCode::InvalidArgument, "n_max must be >= 1");
    INTMAPS_REQUIRE(tol >= 0.0, ErrorCode::InvalidArgument, "tolerance must be >= 0");
    IntersectionProfile prof;
    prof.tol = tol;
    detail::ImageSequence seq(map, a, component_cap);
    for (int n = 0; n <= n_max; ++n) {
        const IntervalSet now = seq.current();
        const double slack_now = seq.slack();
        prof.components.push_back(now.size());
        seq.advance();
        prof.value.push_back(intersect(now, seq.current()).measure());
        prof.slack.push_back(slack_now + seq.slack());
        if (!prof.first_positive && prof.positive_at(static_cast<std::size_t>(n))) prof.first_positive = n;
    }
    return prof;
}

/// Smallest delta such that Leb(C | I_jbar) > delta forces Leb(C ∩ TC) > 0:
/// D / (D + Leb(I_jbar)).
inline double delta_threshold(double d_hat, double element_length) {
    INTMAPS_REQUIRE(d_hat >= 1.0, ErrorCode::InvalidArgument, "distortion constant must be >= 1");
    INTMAPS_REQUIRE(element_length > 0.0, ErrorCode::InvalidArgument, "element length must be positive");
    return d_hat / (d_hat + element_length);
}

inline double delta_threshold(double d_hat, Symbol j_bar, const RefinedPartition& part) {
    INTMAPS_REQUIRE(j_bar >= 1 && part.is_symbol(j_bar), ErrorCode::InvalidArgument, "j_bar must be a positive symbol");
    return delta_threshold(d_hat, part.element(j_bar).width());
}

struct CoverageSample {
    int n = 0;
    double conditional = 0.0; // Leb(T^n A ∩ I_jbar) / Leb(I_jbar)
    double slack = 0.0;       // coarsening bound, in the same units
};

/// Conditional measure of T^n A inside I_jbar at each requested time.
inline std::vector<CoverageSample> density_coverage_test(const MapSpec& map, const IntervalSet& a,
                                                         const Interval& element, std::vector<int> n_list,
                                                         std::size_t component_cap = kDefaultComponentCap) {
    INTMAPS_REQUIRE(a.measure() > 0.0, ErrorCode::InvalidArgument, "coverage test needs a set of positive measure");
    INTMAPS_REQUIRE(element.width() > 0.0, ErrorCode::InvalidArgument, "target element must have positive length");
    std::sort(n_list.begin(), n_list.end());
    INTMAPS_REQUIRE(n_list.empty() || n_list.front() >= 0, ErrorCode::InvalidArgument, "times must be >= 0");
    const IntervalSet target{element};
    std::vector<CoverageSample> out;
    detail::ImageSequence seq(map, a, component_cap);
    int n = 0;
    for (int t : n_list) {
        for (; n < t; ++n) seq.advance();
        out.push_back({t, intersect(seq.current(), target).measure() / element.width(),
                       seq.slack() / element.width()});
    }
    return out;
}

inline std::vector<CoverageSample> density_coverage_test(const MapSpec& map, const RefinedPartition& part,
                                                         const IntervalSet& a, Symbol j_bar,
                                                         std::vector<int> n_list) {
    INTMAPS_REQUIRE(j_bar >= 1 && part.is_symbol(j_bar), ErrorCode::InvalidArgument, "j_bar must be a positive symbol");
    return density_coverage_test(map, a, part.element(j_bar), std::move(n_list));
}

} // namespace intmaps
