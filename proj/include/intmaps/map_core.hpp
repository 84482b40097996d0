#pragma once

// Piecewise monotone interval maps T : [0,1] -> [0,1] with full (surjective)
// C^2 branches, uniform expansion away from an indifferent fixed point at 0.

#include "intmaps/common.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <sstream>

namespace intmaps {

using RealFn = std::function<double(double)>;
using WideReal = boost::multiprecision::cpp_bin_float_quad;
using WideFn = std::function<WideReal(const WideReal&)>;

/// One surjective branch tau_j : [lo, hi] -> [0, 1].
struct Branch {
    int index = 0;
    double lo = 0.0;
    double hi = 1.0;
    RealFn value;
    RealFn d1;
    RealFn d2;
    bool increasing = true;
    RealFn inverse; // optional closed form; root finding is used when empty
    WideFn wide_value; // optional, 113-bit
    WideFn wide_d1;
};

enum class FamilyTag : std::uint8_t { PomeauManneville, CountableGeometric, Custom };

/// Parameters of the built-in families.
///   pm:  tau_0(x) = x (1 + 2^s x^s) on [0, 1/2], tau_1(x) = 2x - 1.
///   geo: tau_0(x) = x + (1 - a1) (x / a1)^(s+1) on [0, a1], then affine
///        branches on intervals of length (1 - a1) r^(j-1) (1 - r), the last
///        one absorbing the remainder up to 1.
struct FamilyParams {
    FamilyTag tag = FamilyTag::PomeauManneville;
    double s = 1.0;
    double r = 0.5;
    int jmax = 0; // geometric family: 0 picks the deepest truncation with branch widths >= 1e-9
    double a1 = 0.5;

    friend bool operator==(const FamilyParams&, const FamilyParams&) = default;
};

class MapSpec {
public:
    MapSpec(std::vector<Branch> branches, double beta, double expansion, double distortion_bound,
            FamilyParams family = {FamilyTag::Custom}, double truncation_residual = 0.0)
        : branches_(std::move(branches)), beta_(beta), lambda_(expansion), k_(distortion_bound),
          family_(family), truncation_residual_(truncation_residual) {
        INTMAPS_REQUIRE(branches_.size() >= 2, ErrorCode::InvalidArgument,
                        "a map needs the neutral branch and at least one expanding branch");
        INTMAPS_REQUIRE(beta_ >= 0.0, ErrorCode::InvalidArgument, "beta must be >= 0");
        INTMAPS_REQUIRE(lambda_ > 1.0, ErrorCode::InvalidArgument, "expansion constant must exceed 1");
        INTMAPS_REQUIRE(k_ > 0.0, ErrorCode::InvalidArgument, "distortion constant must be positive");
        INTMAPS_REQUIRE(branches_.front().lo == 0.0, ErrorCode::InvalidArgument, "a_0 must be 0");
        INTMAPS_REQUIRE(branches_.back().hi == 1.0, ErrorCode::InvalidArgument, "last branch must end at 1");
        endpoints_.reserve(branches_.size() + 1);
        for (std::size_t j = 0; j < branches_.size(); ++j) {
            const Branch& b = branches_[j];
            INTMAPS_REQUIRE(b.value && b.d1 && b.d2, ErrorCode::InvalidArgument, "branch evaluators missing");
            INTMAPS_REQUIRE(b.lo < b.hi, ErrorCode::InvalidArgument, "empty branch domain");
            INTMAPS_REQUIRE(j == 0 || b.lo == branches_[j - 1].hi, ErrorCode::InvalidArgument,
                            "branch domains must tile [0,1]");
            INTMAPS_REQUIRE(b.index == static_cast<int>(j), ErrorCode::InvalidArgument,
                            "branch indices must be 0, 1, 2, ...");
            endpoints_.push_back(b.lo);
        }
        endpoints_.push_back(1.0);
    }

    const std::vector<Branch>& branches() const noexcept { return branches_; }
    const Branch& branch(int j) const { return branches_.at(static_cast<std::size_t>(j)); }
    int branch_count() const noexcept { return static_cast<int>(branches_.size()); }
    /// a_0 = 0 < a_1 < ... < a_N = 1.
    const std::vector<double>& endpoints() const noexcept { return endpoints_; }
    double a(int j) const { return endpoints_.at(static_cast<std::size_t>(j)); }

    double beta() const noexcept { return beta_; }
    double alpha() const noexcept { return 1.0 / (beta_ + 1.0); }
    double expansion() const noexcept { return lambda_; }
    double distortion_bound() const noexcept { return k_; }
    const FamilyParams& family() const noexcept { return family_; }
    double truncation_residual() const noexcept { return truncation_residual_; }

    /// Branch whose closed domain contains x; a shared endpoint a_j goes to
    /// the left branch j-1, and 0 goes to branch 0.
    int branch_of(double x) const noexcept {
        auto it = std::lower_bound(endpoints_.begin() + 1, endpoints_.end() - 1, x);
        return static_cast<int>(it - (endpoints_.begin() + 1));
    }

    int branch_of(const WideReal& x) const {
        auto it = std::lower_bound(endpoints_.begin() + 1, endpoints_.end() - 1, x,
                                   [](double e, const WideReal& v) { return e < v; });
        return static_cast<int>(it - (endpoints_.begin() + 1));
    }

    bool has_wide() const noexcept {
        return std::all_of(branches_.begin(), branches_.end(),
                           [](const Branch& b) { return b.wide_value && b.wide_d1; });
    }

    double eval(double x) const { return branches_[static_cast<std::size_t>(branch_of(x))].value(x); }
    double deriv(double x) const { return branches_[static_cast<std::size_t>(branch_of(x))].d1(x); }
    double deriv2(double x) const { return branches_[static_cast<std::size_t>(branch_of(x))].d2(x); }
    WideReal eval(const WideReal& x) const {
        return branches_[static_cast<std::size_t>(branch_of(x))].wide_value(x);
    }
    WideReal deriv(const WideReal& x) const {
        return branches_[static_cast<std::size_t>(branch_of(x))].wide_d1(x);
    }

    /// Unique x in [a_j, a_{j+1}] with tau_j(x) = y.
    double inverse_branch(int j, double y) const;

private:
    std::vector<Branch> branches_;
    std::vector<double> endpoints_;
    double beta_;
    double lambda_;
    double k_;
    FamilyParams family_;
    double truncation_residual_;
};

namespace detail {

// Bisection down to width 1e-8, then Newton inside the bracket; 200 steps max.
inline double monotone_root(const Branch& b, double y) {
    const double v_lo = b.value(b.lo);
    const double v_hi = b.value(b.hi);
    if (y == v_lo) return b.lo;
    if (y == v_hi) return b.hi;
    double lo = b.lo;
    double hi = b.hi;
    const double sign = b.increasing ? 1.0 : -1.0;
    auto g = [&](double x) { return sign * (b.value(x) - y); };
    constexpr int kMaxIter = 200;
    int iter = 0;
    while (hi - lo > 1e-8 && iter < kMaxIter) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) < 0.0) lo = mid; else hi = mid;
        ++iter;
    }
    double x = 0.5 * (lo + hi);
    for (; iter < kMaxIter; ++iter) {
        const double gx = g(x);
        if (gx == 0.0) return x;
        if (gx < 0.0) lo = x; else hi = x;
        const double slope = sign * b.d1(x);
        double next = slope > 0.0 ? x - gx / slope : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - x) <= 2.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(x), 1e-300) ||
            next == x) {
            return next;
        }
        x = next;
        if (hi - lo <= 1e-300) return x;
    }
    if (hi - lo <= 1e-13) return 0.5 * (lo + hi);
    throw Error(ErrorCode::RootFinding, "inverse branch " + std::to_string(b.index) + " did not converge for y=" +
                                            std::to_string(y));
}

} // namespace detail

inline double MapSpec::inverse_branch(int j, double y) const {
    INTMAPS_REQUIRE(j >= 0 && j < branch_count(), ErrorCode::InvalidArgument, "branch index out of range");
    INTMAPS_REQUIRE(y >= 0.0 && y <= 1.0, ErrorCode::InvalidArgument, "inverse_branch: y outside [0,1]");
    const Branch& b = branches_[static_cast<std::size_t>(j)];
    if (b.inverse) return std::clamp(b.inverse(y), b.lo, b.hi);
    return detail::monotone_root(b, y);
}

/// tau(x) = x + c (x / a1)^(s+1), c = 1 - a1, on [0, a1].
inline Branch neutral_branch(double s, double a1) {
    const double c = 1.0 - a1;
    // Integer exponents are the common case and pow() dominates orbit loops.
    const bool integral = s == std::floor(s) && s <= 8.0;
    const int si = static_cast<int>(s);
    auto power = [integral](double t, double e, int ei) {
        if (!integral) return std::pow(t, e);
        double r = 1.0;
        for (int i = 0; i < ei; ++i) r *= t;
        return r;
    };
    Branch b;
    b.index = 0;
    b.lo = 0.0;
    b.hi = a1;
    b.increasing = true;
    b.value = [=](double x) { return x + c * power(x / a1, s + 1.0, si + 1); };
    b.d1 = [=](double x) { return 1.0 + c * (s + 1.0) / a1 * power(x / a1, s, si); };
    b.d2 = [=](double x) { return c * s * (s + 1.0) / (a1 * a1) * power(x / a1, s - 1.0, si - 1); };
    auto wpower = [integral](const WideReal& t, double e, int ei) {
        if (!integral) return WideReal(boost::multiprecision::pow(t, WideReal(e)));
        WideReal r = 1;
        for (int i = 0; i < ei; ++i) r *= t;
        return r;
    };
    b.wide_value = [=](const WideReal& x) { return WideReal(x + c * wpower(x / a1, s + 1.0, si + 1)); };
    b.wide_d1 = [=](const WideReal& x) { return WideReal(1 + c * (s + 1.0) / a1 * wpower(x / a1, s, si)); };
    return b;
}

/// Increasing affine bijection [lo, hi] -> [0, 1].
inline Branch affine_branch(int index, double lo, double hi) {
    const double w = hi - lo;
    Branch b;
    b.index = index;
    b.lo = lo;
    b.hi = hi;
    b.increasing = true;
    b.value = [=](double x) { return (x - lo) / w; };
    b.d1 = [=](double) { return 1.0 / w; };
    b.d2 = [](double) { return 0.0; };
    b.inverse = [=](double y) { return y == 1.0 ? hi : lo + w * y; };
    const WideReal wlo = lo, ww = WideReal(hi) - wlo;
    b.wide_value = [=](const WideReal& x) { return WideReal((x - wlo) / ww); };
    b.wide_d1 = [=](const WideReal&) { return WideReal(1 / ww); };
    return b;
}

namespace detail {

// sup of tau''/tau'^2 over the neutral branch, sampled densely with 1% margin.
inline double neutral_distortion_bound(const Branch& b) {
    double k = 0.0;
    constexpr int kSamples = 20000;
    for (int i = 0; i <= kSamples; ++i) {
        const double x = b.lo + (b.hi - b.lo) * i / kSamples;
        const double d1 = b.d1(x);
        k = std::max(k, std::abs(b.d2(x)) / (d1 * d1));
    }
    return 1.01 * k;
}

} // namespace detail

inline constexpr int kMaxGeometricBranches = 128;

/// Construct a built-in family member; throws on out-of-range parameters.
inline MapSpec build_family(const FamilyParams& p) {
    INTMAPS_REQUIRE(std::isfinite(p.s) && p.s >= 1.0, ErrorCode::InvalidArgument,
                    "neutral exponent parameter s must be >= 1");
    switch (p.tag) {
    case FamilyTag::PomeauManneville: {
        std::vector<Branch> br;
        br.push_back(neutral_branch(p.s, 0.5));
        br.push_back(affine_branch(1, 0.5, 1.0));
        const double k = detail::neutral_distortion_bound(br[0]);
        FamilyParams stored = p;
        stored.a1 = 0.5;
        stored.jmax = 2;
        return MapSpec(std::move(br), p.s - 1.0, 2.0, k, stored, 0.0);
    }
    case FamilyTag::CountableGeometric: {
        INTMAPS_REQUIRE(p.r > 0.0 && p.r < 1.0, ErrorCode::InvalidArgument, "ratio r must lie in (0,1)");
        INTMAPS_REQUIRE(p.a1 > 0.0 && p.a1 < 1.0, ErrorCode::InvalidArgument, "a1 must lie in (0,1)");
        if (p.jmax == 0) {
            FamilyParams q = p;
            q.jmax = 2;
            while (q.jmax < kMaxGeometricBranches && (1.0 - p.a1) * std::pow(p.r, q.jmax - 1) >= 1e-9) ++q.jmax;
            return build_family(q);
        }
        INTMAPS_REQUIRE(p.jmax >= 2, ErrorCode::InvalidArgument,
                        "truncation jmax must be >= 2 to cover [0,1]");
        const double tail = (1.0 - p.a1) * std::pow(p.r, p.jmax - 2);
        INTMAPS_REQUIRE(tail >= 1e-9, ErrorCode::InvalidArgument,
                        "truncation jmax too large: branch widths fall below 1e-9");
        std::vector<Branch> br;
        br.push_back(neutral_branch(p.s, p.a1));
        double lo = p.a1;
        double min_slope = std::numeric_limits<double>::infinity();
        for (int j = 1; j < p.jmax; ++j) {
            const double hi = (j == p.jmax - 1) ? 1.0 : lo + (1.0 - p.a1) * std::pow(p.r, j - 1) * (1.0 - p.r);
            br.push_back(affine_branch(j, lo, hi));
            min_slope = std::min(min_slope, 1.0 / (hi - lo));
            lo = hi;
        }
        const double k = detail::neutral_distortion_bound(br[0]);
        const double residual = (1.0 - p.a1) * std::pow(p.r, p.jmax - 1);
        return MapSpec(std::move(br), p.s - 1.0, min_slope, k, p, residual);
    }
    case FamilyTag::Custom:
        break;
    }
    throw Error(ErrorCode::InvalidArgument, "custom maps are built from explicit branches");
}

inline MapSpec pomeau_manneville(double s) {
    FamilyParams p;
    p.tag = FamilyTag::PomeauManneville;
    p.s = s;
    return build_family(p);
}

inline MapSpec countable_geometric(double s, double r, int jmax = 0, double a1 = 0.5) {
    return build_family(FamilyParams{FamilyTag::CountableGeometric, s, r, jmax, a1});
}

// ---------------------------------------------------------------------------
// Axiom validation

struct ValidationReport {
    // A1
    double max_endpoint_residual = 0.0;
    bool monotone = true;
    bool tiling = true;
    bool a1_pass = false;
    // A2
    double lambda_hat = std::numeric_limits<double>::infinity();
    bool a2_pass = false;
    // A3
    double k_hat = 0.0;
    bool a3_pass = false;
    // A4
    double neutral_value_at_0 = 0.0;
    double neutral_slope_at_0 = 0.0;
    double min_neutral_slope = std::numeric_limits<double>::infinity(); // over sampled x > 0
    double min_neutral_curvature = std::numeric_limits<double>::infinity();
    double beta_hat = std::numeric_limits<double>::quiet_NaN();
    double curvature_ratio_min = 0.0; // tau_0''(x) / x^beta over a geometric grid
    double curvature_ratio_max = 0.0;
    bool a4_pass = false;

    double truncation_residual = 0.0;

    bool all_pass() const noexcept { return a1_pass && a2_pass && a3_pass && a4_pass; }
};

inline constexpr double kBetaTolerance = 0.05;

inline ValidationReport validate_axioms(const MapSpec& map, int grid_size = 1000) {
    INTMAPS_REQUIRE(grid_size >= 1000, ErrorCode::InvalidArgument, "grid_size must be >= 1000");
    ValidationReport rep;
    rep.truncation_residual = map.truncation_residual();
    constexpr double kEndpointTol = 1e-12;

    for (const Branch& b : map.branches()) {
        const double v0 = b.value(b.lo);
        const double v1 = b.value(b.hi);
        const double lo_target = b.increasing ? 0.0 : 1.0;
        const double hi_target = b.increasing ? 1.0 : 0.0;
        rep.max_endpoint_residual =
            std::max({rep.max_endpoint_residual, std::abs(v0 - lo_target), std::abs(v1 - hi_target)});
        for (int i = 0; i <= grid_size; ++i) {
            const double x = b.lo + (b.hi - b.lo) * i / grid_size;
            const double d1 = b.d1(x);
            const double d2 = b.d2(x);
            const bool interior = i > 0 && i < grid_size;
            if (interior && (b.increasing ? d1 <= 0.0 : d1 >= 0.0)) rep.monotone = false;
            if (b.index >= 1) rep.lambda_hat = std::min(rep.lambda_hat, std::abs(d1));
            if (d1 != 0.0) rep.k_hat = std::max(rep.k_hat, std::abs(d2) / (d1 * d1));
        }
    }
    const auto& ends = map.endpoints();
    for (std::size_t j = 1; j < ends.size(); ++j)
        if (!(ends[j] > ends[j - 1])) rep.tiling = false;
    rep.tiling = rep.tiling && ends.front() == 0.0 && ends.back() == 1.0;
    rep.a1_pass = rep.tiling && rep.monotone && rep.max_endpoint_residual <= kEndpointTol;

    rep.a2_pass = rep.lambda_hat > 1.0 && rep.lambda_hat >= map.expansion() * (1.0 - 1e-12);
    rep.a3_pass = rep.k_hat <= map.distortion_bound();

    const Branch& b0 = map.branch(0);
    rep.neutral_value_at_0 = b0.value(0.0);
    rep.neutral_slope_at_0 = b0.d1(0.0);
    bool convex = true;
    for (int i = 1; i <= grid_size; ++i) {
        const double x = b0.hi * i / grid_size;
        rep.min_neutral_slope = std::min(rep.min_neutral_slope, b0.d1(x));
        const double c = b0.d2(x);
        rep.min_neutral_curvature = std::min(rep.min_neutral_curvature, c);
        if (c < 0.0) convex = false;
    }

    // tau_0'' ~ x^beta: slope of log tau_0'' against log x on x in a1 * [1e-6, 1e-1].
    constexpr int kFitPoints = 200;
    std::vector<double> lx, lc;
    bool curvature_positive = true;
    for (int i = 0; i < kFitPoints; ++i) {
        const double x = b0.hi * std::pow(10.0, -6.0 + 5.0 * i / (kFitPoints - 1));
        const double c = b0.d2(x);
        if (!(c > 0.0)) {
            curvature_positive = false;
            continue;
        }
        lx.push_back(std::log(x));
        lc.push_back(std::log(c));
    }
    if (curvature_positive) {
        rep.beta_hat = least_squares(lx, lc).slope;
        rep.curvature_ratio_min = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < lx.size(); ++i) {
            const double ratio = std::exp(lc[i] - map.beta() * lx[i]);
            rep.curvature_ratio_min = std::min(rep.curvature_ratio_min, ratio);
            rep.curvature_ratio_max = std::max(rep.curvature_ratio_max, ratio);
        }
    }
    const bool ratio_bounded = curvature_positive && rep.curvature_ratio_min > 0.0 &&
                               std::isfinite(rep.curvature_ratio_max) &&
                               rep.curvature_ratio_max <= 10.0 * rep.curvature_ratio_min;
    rep.a4_pass = std::abs(rep.neutral_value_at_0) <= kEndpointTol &&
                  std::abs(rep.neutral_slope_at_0 - 1.0) <= kEndpointTol && rep.min_neutral_slope > 1.0 &&
                  convex && ratio_bounded && std::abs(rep.beta_hat - map.beta()) <= kBetaTolerance;
    return rep;
}

// ---------------------------------------------------------------------------
// Plain-text map descriptors: "pm:s=1" or "geo:s=1,r=0.5,jmax=30,a1=0.5".

namespace detail {

inline std::string format_decimal(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline double parse_decimal(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    INTMAPS_REQUIRE(used == text.size() && !text.empty() && std::isfinite(v), ErrorCode::InvalidArgument,
                    "malformed decimal for '" + key + "': '" + text + "'");
    return v;
}

} // namespace detail

inline std::string format_map_descriptor(const FamilyParams& p) {
    using detail::format_decimal;
    switch (p.tag) {
    case FamilyTag::PomeauManneville:
        return "pm:s=" + format_decimal(p.s);
    case FamilyTag::CountableGeometric:
        return "geo:s=" + format_decimal(p.s) + ",r=" + format_decimal(p.r) + ",jmax=" + std::to_string(p.jmax) +
               ",a1=" + format_decimal(p.a1);
    case FamilyTag::Custom:
        break;
    }
    throw Error(ErrorCode::InvalidArgument, "custom maps have no descriptor");
}

/// Parse a descriptor. Syntax errors throw InvalidArgument; range checks are
/// left to build_family.
inline FamilyParams parse_map_descriptor(const std::string& text) {
    const auto colon = text.find(':');
    INTMAPS_REQUIRE(colon != std::string::npos, ErrorCode::InvalidArgument,
                    "map descriptor needs 'family:key=value,...': '" + text + "'");
    const std::string tag = text.substr(0, colon);
    FamilyParams p;
    if (tag == "pm") {
        p.tag = FamilyTag::PomeauManneville;
        p.jmax = 2;
    } else if (tag == "geo") {
        p.tag = FamilyTag::CountableGeometric;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown map family '" + tag + "'");
    }
    bool have_s = false;
    std::stringstream rest(text.substr(colon + 1));
    std::string item;
    while (std::getline(rest, item, ',')) {
        const auto eq = item.find('=');
        INTMAPS_REQUIRE(eq != std::string::npos, ErrorCode::InvalidArgument, "expected key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string val = item.substr(eq + 1);
        if (key == "s") {
            p.s = detail::parse_decimal(key, val);
            have_s = true;
        } else if (key == "r" && p.tag == FamilyTag::CountableGeometric) {
            p.r = detail::parse_decimal(key, val);
        } else if (key == "a1" && p.tag == FamilyTag::CountableGeometric) {
            p.a1 = detail::parse_decimal(key, val);
        } else if (key == "jmax" && p.tag == FamilyTag::CountableGeometric) {
            const double v = detail::parse_decimal(key, val);
            INTMAPS_REQUIRE(v == std::floor(v) && std::abs(v) < 1e6, ErrorCode::InvalidArgument, "jmax must be an integer");
            p.jmax = static_cast<int>(v);
        } else {
            throw Error(ErrorCode::InvalidArgument, "unknown parameter '" + key + "' for family '" + tag + "'");
        }
    }
    INTMAPS_REQUIRE(have_s, ErrorCode::InvalidArgument, "map descriptor is missing s");
    return p;
}

} // namespace intmaps
