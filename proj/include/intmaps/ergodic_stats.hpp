#pragma once

// Quasi-lift of T to the real line, Birkhoff sums, first returns to J and an
// Ulam approximation of the invariant density.
//
// The lift is tau = T + m_c on each displacement cell c (cells refine the
// branch domains), so the discrete displacement f = floor(tau) equals m_c and
//   lift^n(x) = sum_{j<n} f(T^j x) + T^n x.

#include "intmaps/map_core.hpp"
#include "intmaps/parallel.hpp"
#include "intmaps/partition.hpp"

#include <map>
#include <optional>
#include <random>

namespace intmaps {

using Observable = std::function<double(double)>;

struct DisplacementCell {
    double lo = 0.0;
    double hi = 1.0;
    std::int64_t offset = 0;
};

class LiftSpec {
public:
    /// Cells must tile [0,1] and each must sit inside one branch domain.
    LiftSpec(MapSpec map, std::vector<DisplacementCell> cells) : map_(std::move(map)), cells_(std::move(cells)) {
        INTMAPS_REQUIRE(!cells_.empty(), ErrorCode::InvalidArgument, "lift needs at least one cell");
        INTMAPS_REQUIRE(cells_.front().lo == 0.0 && cells_.back().hi == 1.0, ErrorCode::InvalidArgument,
                        "displacement cells must cover [0,1]");
        for (std::size_t i = 0; i < cells_.size(); ++i) {
            const DisplacementCell& c = cells_[i];
            INTMAPS_REQUIRE(c.lo < c.hi, ErrorCode::InvalidArgument, "empty displacement cell");
            INTMAPS_REQUIRE(i == 0 || c.lo == cells_[i - 1].hi, ErrorCode::InvalidArgument,
                            "displacement cells must tile [0,1]");
            const int b = map_.branch_of(std::nextafter(c.lo, 1.0));
            INTMAPS_REQUIRE(c.hi <= map_.a(b + 1), ErrorCode::InvalidArgument,
                            "a displacement cell straddles a branch endpoint");
        }
        for (const DisplacementCell& c : cells_) uppers_.push_back(c.hi);
    }

    /// Offset 0 on the neutral branch, +1, -1, +1, ... on branches 1, 2, ...
    static LiftSpec alternating(const MapSpec& map) {
        std::vector<DisplacementCell> cells;
        for (const Branch& b : map.branches())
            cells.push_back({b.lo, b.hi, b.index == 0 ? 0 : (b.index % 2 == 1 ? 1 : -1)});
        return LiftSpec(map, std::move(cells));
    }

    /// Same offset on every branch.
    static LiftSpec constant(const MapSpec& map, std::int64_t offset) {
        std::vector<DisplacementCell> cells;
        for (const Branch& b : map.branches()) cells.push_back({b.lo, b.hi, offset});
        return LiftSpec(map, std::move(cells));
    }

    /// Offset 0 on the neutral branch; each expanding branch split at its
    /// midpoint into +1 (left half) and -1 (right half).
    static LiftSpec symmetric_halves(const MapSpec& map) {
        std::vector<DisplacementCell> cells;
        for (const Branch& b : map.branches()) {
            if (b.index == 0) {
                cells.push_back({b.lo, b.hi, 0});
                continue;
            }
            const double mid = 0.5 * (b.lo + b.hi);
            cells.push_back({b.lo, mid, 1});
            cells.push_back({mid, b.hi, -1});
        }
        return LiftSpec(map, std::move(cells));
    }

    const MapSpec& map() const noexcept { return map_; }
    const std::vector<DisplacementCell>& cells() const noexcept { return cells_; }

    /// f(x) = floor(tau(x)); cell endpoints go to the left cell, as in eval.
    std::int64_t displacement(double x) const noexcept {
        auto it = std::lower_bound(uppers_.begin(), uppers_.end() - 1, x);
        return cells_[static_cast<std::size_t>(it - uppers_.begin())].offset;
    }

    /// tau(x) on [0,1].
    double lift_value(double x) const { return map_.eval(x) + static_cast<double>(displacement(x)); }

    Observable displacement_observable() const {
        return [this](double x) { return static_cast<double>(displacement(x)); };
    }

private:
    MapSpec map_;
    std::vector<DisplacementCell> cells_;
    std::vector<double> uppers_;
};

/// Point of the real line stored as integer cell plus position in [0,1].
struct LiftedPoint {
    std::int64_t cell = 0;
    double frac = 0.0;
    double position() const noexcept { return static_cast<double>(cell) + frac; }
};

inline LiftedPoint lift_step(const LiftSpec& lift, const LiftedPoint& p) {
    return {p.cell + lift.displacement(p.frac), lift.map().eval(p.frac)};
}

/// States lift^k(x0), k = 0..n.
inline std::vector<LiftedPoint> lift_orbit(const LiftSpec& lift, double x0, int n) {
    INTMAPS_REQUIRE(x0 >= 0.0 && x0 < 1.0, ErrorCode::InvalidArgument, "lift start must lie in [0,1)");
    INTMAPS_REQUIRE(n >= 0, ErrorCode::InvalidArgument, "orbit length must be >= 0");
    std::vector<LiftedPoint> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    out.push_back({0, x0});
    for (int k = 0; k < n; ++k) out.push_back(lift_step(lift, out.back()));
    return out;
}

/// S_0..S_n with S_n = sum_{j<n} f(T^j x0).
inline std::vector<double> birkhoff_sum(const MapSpec& map, const Observable& f, double x0, int n) {
    INTMAPS_REQUIRE(x0 >= 0.0 && x0 <= 1.0, ErrorCode::InvalidArgument, "start must lie in [0,1]");
    INTMAPS_REQUIRE(n >= 0, ErrorCode::InvalidArgument, "n must be >= 0");
    std::vector<double> s(static_cast<std::size_t>(n) + 1, 0.0);
    double x = x0;
    for (int k = 0; k < n; ++k) {
        s[static_cast<std::size_t>(k) + 1] = s[static_cast<std::size_t>(k)] + f(x);
        x = map.eval(x);
    }
    return s;
}

// ---------------------------------------------------------------------------
// First returns to J

struct ReturnTime {
    std::int64_t steps = 0; // R, or cap when censored
    bool censored = false;  // no return within cap steps
};

inline ReturnTime first_return(const MapSpec& map, double x0, std::int64_t cap) {
    INTMAPS_REQUIRE(cap >= 1, ErrorCode::InvalidArgument, "cap must be >= 1");
    const double a1 = map.a(1);
    INTMAPS_REQUIRE(x0 >= a1 && x0 <= 1.0, ErrorCode::InvalidArgument, "first_return needs x0 in J");
    double x = x0;
    for (std::int64_t r = 1; r <= cap; ++r) {
        x = map.eval(x);
        if (x >= a1) return {r, false};
    }
    return {cap, true};
}

inline ReturnTime first_return(const MapSpec& map, const RefinedPartition& part, double x0, std::int64_t cap) {
    INTMAPS_REQUIRE(part.symbol_of(x0) >= 1, ErrorCode::InvalidArgument, "first_return needs x0 in J");
    return first_return(map, x0, cap);
}

struct ReturnTimeHistogram {
    std::size_t ensemble = 0;
    std::int64_t cap = 0;
    std::uint64_t seed = 0;
    std::map<std::int64_t, std::int64_t> counts; // R -> count, uncensored
    std::int64_t censored = 0;
    std::vector<std::int64_t> tail_n;  // n
    std::vector<double> tail_prob;     // P(R > n)
    LinearFit fit;                     // log P(R > n) against log n
    std::int64_t fit_lo = 0;
    std::int64_t fit_hi = 0;

    std::int64_t total() const {
        std::int64_t t = censored;
        for (const auto& [r, c] : counts) t += c;
        return t;
    }
};

struct TailFitOptions {
    std::int64_t head = 10;          // exclude n below this
    std::int64_t min_survivors = 10; // exclude n where fewer starts survive
    int per_decade = 10;
};

inline ReturnTimeHistogram return_time_tail(const MapSpec& map, std::size_t ensemble, std::int64_t cap,
                                            std::uint64_t seed, const TailFitOptions& opt = {}) {
    INTMAPS_REQUIRE(ensemble >= 1, ErrorCode::InvalidArgument, "ensemble must be non-empty");
    INTMAPS_REQUIRE(cap >= 100, ErrorCode::InvalidArgument, "cap must be >= 100");
    const double a1 = map.a(1);
    std::vector<ReturnTime> r(ensemble);
    parallel_for(ensemble, [&](std::size_t i) {
        const double x0 = a1 + (1.0 - a1) * stream_uniform(seed, i);
        r[i] = first_return(map, x0, cap);
    });

    ReturnTimeHistogram h;
    h.ensemble = ensemble;
    h.cap = cap;
    h.seed = seed;
    for (const ReturnTime& t : r) {
        if (t.censored) ++h.censored;
        else ++h.counts[t.steps];
    }
    // survivors(n) = #{R > n}, censored starts count as survivors up to cap
    const auto total = static_cast<double>(ensemble);
    std::int64_t survivors = static_cast<std::int64_t>(ensemble);
    auto it = h.counts.begin();
    std::vector<double> fx, fy;
    h.fit_lo = opt.head;
    h.fit_hi = cap / 10;
    for (std::int64_t n : log_spaced(1, cap, opt.per_decade)) {
        while (it != h.counts.end() && it->first <= n) {
            survivors -= it->second;
            ++it;
        }
        h.tail_n.push_back(n);
        h.tail_prob.push_back(static_cast<double>(survivors) / total);
        if (n >= h.fit_lo && n <= h.fit_hi && survivors >= opt.min_survivors) {
            fx.push_back(static_cast<double>(n));
            fy.push_back(static_cast<double>(survivors) / total);
        }
    }
    h.fit = loglog_fit(fx, fy);
    return h;
}

// ---------------------------------------------------------------------------
// Ulam approximation of the invariant density

struct UlamDensity {
    int m = 0;
    double epsilon = 0.0;
    std::vector<double> stationary; // probability vector over cells [i/m, (i+1)/m)
    std::vector<double> density;    // renormalized on [epsilon, 1]; zero below
    double sup = 0.0;               // sup of density on [epsilon, 1]
    int iterations = 0;
    double residual = 0.0;          // l1 norm of p P - p at exit
    double max_row_error = 0.0;     // max |row sum - 1|

    int first_cell_at_or_above(double x) const {
        return std::clamp(static_cast<int>(std::ceil(x * m - 1e-9)), 0, m);
    }

    /// Stationary mass of [lo, hi], both snapped to the grid.
    double mass(double lo, double hi) const {
        double s = 0.0;
        for (int i = first_cell_at_or_above(lo); i < first_cell_at_or_above(hi); ++i)
            s += stationary[static_cast<std::size_t>(i)];
        return s;
    }
};

struct UlamMatrix {
    int m = 0;
    std::vector<std::size_t> row_start; // CSR
    std::vector<int> col;
    std::vector<double> weight;
};

/// P_ij = Leb(B_i ∩ T^{-1} B_j) / Leb(B_i) from exact branch preimages of grid points.
inline UlamMatrix ulam_matrix(const MapSpec& map, int m) {
    INTMAPS_REQUIRE(m >= 2, ErrorCode::InvalidArgument, "grid too small");
    const double h = 1.0 / m;
    std::vector<std::map<int, double>> rows(static_cast<std::size_t>(m));
    std::vector<double> pre(static_cast<std::size_t>(m) + 1);
    for (const Branch& b : map.branches()) {
        parallel_for(pre.size(), [&](std::size_t k) {
            pre[k] = map.inverse_branch(b.index, static_cast<double>(k) / m);
        });
        for (int t = 0; t < m; ++t) {
            double lo = pre[static_cast<std::size_t>(t)];
            double hi = pre[static_cast<std::size_t>(t) + 1];
            if (lo > hi) std::swap(lo, hi);
            if (!(hi > lo)) continue;
            int i = std::clamp(static_cast<int>(lo * m), 0, m - 1);
            for (; i < m && i * h < hi; ++i) {
                const double overlap = std::min(hi, (i + 1) * h) - std::max(lo, i * h);
                if (overlap > 0.0) rows[static_cast<std::size_t>(i)][t] += overlap * m;
            }
        }
    }
    UlamMatrix u;
    u.m = m;
    u.row_start.push_back(0);
    for (const auto& row : rows) {
        for (const auto& [t, w] : row) {
            u.col.push_back(t);
            u.weight.push_back(w);
        }
        u.row_start.push_back(u.col.size());
    }
    return u;
}

inline UlamDensity ulam_density(const MapSpec& map, int m, double epsilon, int power_iters) {
    INTMAPS_REQUIRE(m >= 1024, ErrorCode::InvalidArgument, "Ulam grid must have at least 2^10 cells");
    INTMAPS_REQUIRE(epsilon > 0.0 && epsilon < map.a(1), ErrorCode::InvalidArgument, "epsilon must lie in (0, a_1)");
    INTMAPS_REQUIRE(power_iters >= 1, ErrorCode::InvalidArgument, "power_iters must be >= 1");
    const UlamMatrix u = ulam_matrix(map, m);
    UlamDensity d;
    d.m = m;
    d.epsilon = epsilon;
    for (int i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t e = u.row_start[static_cast<std::size_t>(i)]; e < u.row_start[static_cast<std::size_t>(i) + 1]; ++e)
            s += u.weight[e];
        d.max_row_error = std::max(d.max_row_error, std::abs(s - 1.0));
    }

    constexpr double kTolerance = 1e-10;
    std::vector<double> p(static_cast<std::size_t>(m), 1.0 / m), next(static_cast<std::size_t>(m));
    bool converged = false;
    for (d.iterations = 1; d.iterations <= power_iters; ++d.iterations) {
        std::fill(next.begin(), next.end(), 0.0);
        for (int i = 0; i < m; ++i) {
            const double pi = p[static_cast<std::size_t>(i)];
            for (std::size_t e = u.row_start[static_cast<std::size_t>(i)]; e < u.row_start[static_cast<std::size_t>(i) + 1]; ++e)
                next[static_cast<std::size_t>(u.col[e])] += pi * u.weight[e];
        }
        double total = 0.0;
        for (double v : next) total += v;
        double diff = 0.0;
        for (std::size_t i = 0; i < next.size(); ++i) {
            next[i] /= total;
            diff += std::abs(next[i] - p[i]);
        }
        p.swap(next);
        d.residual = diff;
        if (diff < kTolerance) {
            converged = true;
            break;
        }
    }
    INTMAPS_REQUIRE(converged, ErrorCode::NotConverged,
                    "Ulam power iteration did not reach l1 change < 1e-10 within " + std::to_string(power_iters) +
                        " iterations (last change " + std::to_string(d.residual) + ")");
    d.stationary = std::move(p);

    const int first = d.first_cell_at_or_above(epsilon);
    const double z = d.mass(epsilon, 1.0);
    d.density.assign(static_cast<std::size_t>(m), 0.0);
    for (int i = first; i < m; ++i) {
        const double v = d.stationary[static_cast<std::size_t>(i)] * m / z;
        d.density[static_cast<std::size_t>(i)] = v;
        d.sup = std::max(d.sup, v);
    }
    return d;
}

/// mu([eps, 1]) / mu(J) for each eps: unbounded growth as eps -> 0 is the
/// numerical footprint of an infinite invariant measure.
inline std::vector<double> neutral_mass_profile(const UlamDensity& d, double a1, std::span<const double> eps) {
    const double reference = d.mass(a1, 1.0);
    std::vector<double> out;
    for (double e : eps) out.push_back(d.mass(e, 1.0) / reference);
    return out;
}

// ---------------------------------------------------------------------------
// Mean square displacement of the lift

struct DiffusionRecord {
    std::size_t ensemble = 0;
    int n_max = 0;
    std::uint64_t seed = 0;
    std::vector<int> n;       // checkpoints
    std::vector<double> msd;  // mean of S_n^2
    std::vector<double> mean; // mean of S_n
    double gamma_hat = std::numeric_limits<double>::quiet_NaN();
    double gamma_lo = std::numeric_limits<double>::quiet_NaN(); // 95% bootstrap band
    double gamma_hi = std::numeric_limits<double>::quiet_NaN();
    int fit_from = 1;
    bool degenerate = false; // MSD vanishes on the fit window
};

inline std::vector<int> msd_checkpoints(int n_max) {
    std::vector<int> cps;
    for (auto v : log_spaced(1, n_max, 10)) cps.push_back(static_cast<int>(v));
    return cps;
}

inline DiffusionRecord msd_estimate(const LiftSpec& lift, std::size_t ensemble, int n_max, std::uint64_t seed,
                                    int bootstrap = 200) {
    INTMAPS_REQUIRE(ensemble >= 1000, ErrorCode::InvalidArgument, "ensemble must hold at least 1000 starts");
    INTMAPS_REQUIRE(n_max >= 10, ErrorCode::InvalidArgument, "n_max must be >= 10");
    DiffusionRecord rec;
    rec.ensemble = ensemble;
    rec.n_max = n_max;
    rec.seed = seed;
    rec.n = msd_checkpoints(n_max);
    const std::size_t cps = rec.n.size();
    std::vector<double> s(ensemble * cps);
    parallel_for(ensemble, [&](std::size_t i) {
        LiftedPoint p{0, stream_uniform(seed, i)};
        std::size_t c = 0;
        for (int k = 1; k <= n_max; ++k) {
            p = lift_step(lift, p);
            if (k == rec.n[c]) s[i * cps + c++] = static_cast<double>(p.cell);
        }
    });
    auto moments = [&](const std::vector<std::size_t>* sample, std::vector<double>& m1, std::vector<double>& m2) {
        m1.assign(cps, 0.0);
        m2.assign(cps, 0.0);
        for (std::size_t t = 0; t < ensemble; ++t) {
            const std::size_t i = sample ? (*sample)[t] : t;
            for (std::size_t c = 0; c < cps; ++c) {
                const double v = s[i * cps + c];
                m1[c] += v;
                m2[c] += v * v;
            }
        }
        for (std::size_t c = 0; c < cps; ++c) {
            m1[c] /= static_cast<double>(ensemble);
            m2[c] /= static_cast<double>(ensemble);
        }
    };
    moments(nullptr, rec.mean, rec.msd);

    rec.fit_from = std::max(1, n_max / 100);
    auto fit_gamma = [&](const std::vector<double>& msd) {
        std::vector<double> x, y;
        for (std::size_t c = 0; c < cps; ++c) {
            if (rec.n[c] < rec.fit_from) continue;
            x.push_back(rec.n[c]);
            y.push_back(msd[c]);
        }
        return loglog_fit(x, y).slope;
    };
    bool positive = true;
    for (std::size_t c = 0; c < cps; ++c)
        if (rec.n[c] >= rec.fit_from && !(rec.msd[c] > 0.0)) positive = false;
    if (!positive) {
        rec.degenerate = true;
        return rec;
    }
    rec.gamma_hat = fit_gamma(rec.msd);

    std::mt19937_64 rng(splitmix64(seed ^ 0xb007ULL));
    std::uniform_int_distribution<std::size_t> pick(0, ensemble - 1);
    std::vector<double> gammas;
    std::vector<std::size_t> sample(ensemble);
    std::vector<double> m1, m2;
    for (int b = 0; b < bootstrap; ++b) {
        for (auto& v : sample) v = pick(rng);
        moments(&sample, m1, m2);
        const double g = fit_gamma(m2);
        if (std::isfinite(g)) gammas.push_back(g);
    }
    if (!gammas.empty()) {
        std::sort(gammas.begin(), gammas.end());
        auto q = [&](double f) { return gammas[static_cast<std::size_t>(f * static_cast<double>(gammas.size() - 1))]; };
        rec.gamma_lo = q(0.025);
        rec.gamma_hi = q(0.975);
    }
    return rec;
}

} // namespace intmaps
