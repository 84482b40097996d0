#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace intmaps {

enum class ErrorCode : std::uint8_t {
    InvalidArgument = 1,   // parameter or precondition out of range
    RootFinding = 2,       // inverse branch did not converge
    ItineraryMismatch = 3, // two points do not share the required itinerary
    TrivialParsing = 4,    // itinerary has no symbol in J
    NotConverged = 5,      // iterative solver exhausted its budget
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

#define INTMAPS_REQUIRE(cond, code, msg)                                  \
    do {                                                                  \
        if (!(cond)) throw ::intmaps::Error((code), std::string(msg));    \
    } while (0)

/// Closed interval [lo, hi] of the unit interval.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const noexcept { return hi > lo ? hi - lo : 0.0; }
    bool contains(double x) const noexcept { return lo <= x && x <= hi; }
    double midpoint() const noexcept { return 0.5 * (lo + hi); }
    friend bool operator==(const Interval&, const Interval&) = default;
};

inline Interval intersect(const Interval& a, const Interval& b) noexcept {
    Interval r{std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
    if (r.hi < r.lo) r.hi = r.lo;
    return r;
}

/// Ordinary least squares y = intercept + slope * x.
struct LinearFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    double slope_stderr = std::numeric_limits<double>::quiet_NaN();
    std::size_t points = 0;
};

inline LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    LinearFit fit;
    const std::size_t n = std::min(x.size(), y.size());
    fit.points = n;
    if (n < 2) return fit;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            ss += r * r;
        }
        fit.slope_stderr = std::sqrt(ss / static_cast<double>(n - 2) / sxx);
    } else {
        fit.slope_stderr = 0.0;
    }
    return fit;
}

/// Least squares on (log x, log y), skipping non-positive entries.
inline LinearFit loglog_fit(std::span<const double> x, std::span<const double> y) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < std::min(x.size(), y.size()); ++i) {
        if (x[i] > 0.0 && y[i] > 0.0) {
            lx.push_back(std::log(x[i]));
            ly.push_back(std::log(y[i]));
        }
    }
    return least_squares(lx, ly);
}

/// Roughly log-spaced distinct integers in [lo, hi].
inline std::vector<std::int64_t> log_spaced(std::int64_t lo, std::int64_t hi, int per_decade) {
    std::vector<std::int64_t> out;
    if (lo < 1 || hi < lo) return out;
    const double step = std::pow(10.0, 1.0 / per_decade);
    for (double v = static_cast<double>(lo); v <= static_cast<double>(hi) * (1.0 + 1e-12); v *= step) {
        const auto k = static_cast<std::int64_t>(std::llround(v));
        if (k > hi) break;
        if (out.empty() || k > out.back()) out.push_back(k);
    }
    if (out.back() != hi) out.push_back(hi);
    return out;
}

} // namespace intmaps
