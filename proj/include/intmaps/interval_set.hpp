#pragma once

#include "intmaps/common.hpp"

#include <initializer_list>

namespace intmaps {

/// Finite union of closed subintervals of [0,1], kept sorted, disjoint and
/// separated by gaps of at least kMergeTolerance. Zero-width pieces are
/// dropped: they carry no Lebesgue measure.
class IntervalSet {
public:
    static constexpr double kMergeTolerance = 1e-12;

    IntervalSet() = default;
    IntervalSet(std::initializer_list<Interval> parts) : IntervalSet(std::vector<Interval>(parts)) {}
    explicit IntervalSet(std::vector<Interval> parts) : parts_(std::move(parts)) { canonicalize(); }

    static IntervalSet unit() { return IntervalSet{{0.0, 1.0}}; }

    const std::vector<Interval>& parts() const noexcept { return parts_; }
    std::size_t size() const noexcept { return parts_.size(); }
    bool empty() const noexcept { return parts_.empty(); }
    double measure() const noexcept { return measure_; }

    /// Measure recomputed from scratch; differs from measure() only by drift.
    double recomputed_measure() const noexcept {
        double m = 0.0;
        for (const Interval& p : parts_) m += p.width();
        return m;
    }

    bool contains(double x) const noexcept {
        auto it = std::upper_bound(parts_.begin(), parts_.end(), x,
                                   [](double v, const Interval& p) { return v < p.lo; });
        return it != parts_.begin() && std::prev(it)->contains(x);
    }

    friend IntervalSet intersect(const IntervalSet& a, const IntervalSet& b) {
        std::vector<Interval> out;
        std::size_t i = 0, j = 0;
        while (i < a.parts_.size() && j < b.parts_.size()) {
            const Interval c = intersect(a.parts_[i], b.parts_[j]);
            if (c.width() > 0.0) out.push_back(c);
            if (a.parts_[i].hi < b.parts_[j].hi) ++i; else ++j;
        }
        return IntervalSet(std::move(out));
    }

    friend IntervalSet unite(const IntervalSet& a, const IntervalSet& b) {
        std::vector<Interval> all(a.parts_);
        all.insert(all.end(), b.parts_.begin(), b.parts_.end());
        return IntervalSet(std::move(all));
    }

    /// Merge across the smallest gaps until at most `cap` components remain.
    /// The filled gaps are returned through `added`.
    IntervalSet coarsened(std::size_t cap, IntervalSet* added = nullptr) const {
        if (cap == 0) cap = 1;
        if (parts_.size() <= cap) {
            if (added) *added = IntervalSet();
            return *this;
        }
        std::vector<std::pair<double, std::size_t>> gaps;
        gaps.reserve(parts_.size() - 1);
        for (std::size_t i = 1; i < parts_.size(); ++i) gaps.emplace_back(parts_[i].lo - parts_[i - 1].hi, i);
        const std::size_t fill = parts_.size() - cap;
        std::nth_element(gaps.begin(), gaps.begin() + static_cast<std::ptrdiff_t>(fill - 1), gaps.end());
        std::vector<Interval> merged(parts_);
        std::vector<Interval> filled;
        for (std::size_t g = 0; g < fill; ++g) {
            const std::size_t i = gaps[g].second;
            filled.push_back({parts_[i - 1].hi, parts_[i].lo});
        }
        merged.insert(merged.end(), filled.begin(), filled.end());
        if (added) *added = IntervalSet(std::move(filled));
        return IntervalSet(std::move(merged));
    }

    friend bool operator==(const IntervalSet& a, const IntervalSet& b) { return a.parts_ == b.parts_; }

private:
    void canonicalize() {
        for (Interval& p : parts_) {
            if (p.lo > p.hi) std::swap(p.lo, p.hi);
            p.lo = std::clamp(p.lo, 0.0, 1.0);
            p.hi = std::clamp(p.hi, 0.0, 1.0);
        }
        std::sort(parts_.begin(), parts_.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
        std::vector<Interval> out;
        out.reserve(parts_.size());
        for (const Interval& p : parts_) {
            if (!out.empty() && p.lo - out.back().hi < kMergeTolerance) {
                out.back().hi = std::max(out.back().hi, p.hi);
            } else {
                out.push_back(p);
            }
        }
        std::erase_if(out, [](const Interval& p) { return !(p.hi > p.lo); });
        parts_ = std::move(out);
        measure_ = recomputed_measure();
    }

    std::vector<Interval> parts_;
    double measure_ = 0.0;
};

} // namespace intmaps
