#include "intmaps/ergodic_stats.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace intmaps;

namespace {

const MapSpec& pm1() {
    static const MapSpec m = pomeau_manneville(1.0);
    return m;
}

} // namespace

TEST(Lift, ZeroStepsIsIdentity) {
    const LiftSpec lift = LiftSpec::alternating(pm1());
    const auto orbit = lift_orbit(lift, 0.37, 0);
    ASSERT_EQ(orbit.size(), 1u);
    EXPECT_EQ(orbit[0].position(), 0.37);
}

TEST(Lift, DisplacementIsConstantPerCellAndMatchesFloor) {
    for (const LiftSpec& lift : {LiftSpec::alternating(pm1()), LiftSpec::symmetric_halves(pm1()),
                                 LiftSpec::alternating(countable_geometric(1.0, 0.5, 10, 0.5))}) {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 5000; ++i) {
            const double x = u(rng);
            const double tau = lift.lift_value(x);
            const auto f = lift.displacement(x);
            EXPECT_EQ(static_cast<double>(f) + lift.map().eval(x), tau);
            if (lift.map().eval(x) < 1.0) {
                EXPECT_EQ(static_cast<std::int64_t>(std::floor(tau)), f);
            }
        }
    }
}

TEST(Lift, CellsMustRespectBranches) {
    EXPECT_THROW(LiftSpec(pm1(), {{0.0, 0.6, 0}, {0.6, 1.0, 1}}), Error);
    EXPECT_THROW(LiftSpec(pm1(), {{0.0, 0.5, 0}}), Error);
}

TEST(Lift, ZeroDisplacementInNeutralCell) {
    const LiftSpec lift = LiftSpec::alternating(pm1());
    const double x = 0.001;
    const auto orbit = lift_orbit(lift, x, 50);
    double t = x;
    for (int k = 0; k <= 50 && t < 0.5; ++k) {
        EXPECT_EQ(orbit[static_cast<std::size_t>(k)].position(), t);
        t = pm1().eval(t);
    }
}

TEST(Lift, IdentityWithBirkhoffSum) {
    const LiftSpec lift = LiftSpec::symmetric_halves(pm1());
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const double x = u(rng);
        const auto orbit = lift_orbit(lift, x, 1000);
        const auto s = birkhoff_sum(pm1(), lift.displacement_observable(), x, 1000);
        double tx = x;
        for (int n = 0; n <= 1000; ++n) {
            const auto i = static_cast<std::size_t>(n);
            EXPECT_EQ(static_cast<double>(orbit[i].cell), s[i]);
            EXPECT_LE(std::abs(orbit[i].position() - (s[i] + tx)), 1e-9);
            tx = pm1().eval(tx);
        }
    }
}

TEST(Birkhoff, ConstantObservables) {
    const auto zero = birkhoff_sum(pm1(), [](double) { return 0.0; }, 0.3, 100);
    const auto one = birkhoff_sum(pm1(), [](double) { return 1.0; }, 0.3, 100);
    for (int n = 0; n <= 100; ++n) {
        EXPECT_EQ(zero[static_cast<std::size_t>(n)], 0.0);
        EXPECT_EQ(one[static_cast<std::size_t>(n)], n);
    }
}

TEST(FirstReturn, Examples) {
    const RefinedPartition part = compute_b_sequence(pm1(), 1000);
    const ReturnTime r = first_return(pm1(), part, 0.75, 100);
    EXPECT_EQ(r.steps, 1);
    EXPECT_FALSE(r.censored);
    // x0 in J with T(x0) in I_{-k} returns after k + 1 steps
    for (int k = 1; k <= 30; ++k) {
        const Interval target = part.element(-k);
        const double x0 = pm1().inverse_branch(1, target.midpoint());
        EXPECT_EQ(first_return(pm1(), part, x0, 1000).steps, k + 1) << k;
    }
    EXPECT_THROW(first_return(pm1(), part, 0.3, 10), Error);
    EXPECT_TRUE(first_return(pm1(), part, pm1().inverse_branch(1, part.b(200)), 50).censored);
}

TEST(FirstReturn, MatchesItinerary) {
    const RefinedPartition part = compute_b_sequence(pm1(), 10000);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.5, 1.0);
    for (int t = 0; t < 2000; ++t) {
        const double x0 = u(rng);
        const double x1 = pm1().eval(x0);
        if (x1 < part.b(200)) continue;
        const Word w = itinerary(pm1(), part, x1, 200);
        int neg = 0;
        while (w[static_cast<std::size_t>(neg)] < 0) ++neg;
        EXPECT_EQ(first_return(pm1(), part, x0, 10000).steps, 1 + neg);
    }
}

TEST(ReturnTail, CountsAndMonotoneTail) {
    const ReturnTimeHistogram h = return_time_tail(pm1(), 20000, 100000, 5);
    EXPECT_EQ(h.total(), 20000);
    for (const auto& [r, c] : h.counts) {
        EXPECT_GE(r, 1);
        EXPECT_GT(c, 0);
    }
    for (std::size_t i = 1; i < h.tail_prob.size(); ++i) EXPECT_LE(h.tail_prob[i], h.tail_prob[i - 1]);
    EXPECT_NEAR(h.fit.slope, -1.0, 0.15);
}

TEST(ReturnTail, ConservativityWitness) {
    double previous = 0.0;
    for (std::int64_t cap : {100, 1000, 10000, 100000}) {
        const ReturnTimeHistogram h = return_time_tail(pomeau_manneville(2.0), 5000, cap, 6);
        const double returned = 1.0 - static_cast<double>(h.censored) / 5000.0;
        EXPECT_GE(returned, previous);
        previous = returned;
    }
    EXPECT_GT(previous, 0.99);
}

TEST(Ulam, RowsAreStochasticAndDensityNormalized) {
    const UlamMatrix u = ulam_matrix(pm1(), 1024);
    for (int i = 0; i < u.m; ++i) {
        double s = 0.0;
        for (std::size_t e = u.row_start[static_cast<std::size_t>(i)]; e < u.row_start[static_cast<std::size_t>(i) + 1]; ++e) {
            EXPECT_GE(u.weight[e], 0.0);
            s += u.weight[e];
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    const UlamDensity d = ulam_density(pm1(), 1024, 0.1, 200000);
    EXPECT_LT(d.residual, 1e-10);
    double integral = 0.0;
    for (int i = 0; i < d.m; ++i) {
        EXPECT_GE(d.density[static_cast<std::size_t>(i)], 0.0);
        integral += d.density[static_cast<std::size_t>(i)] / d.m;
    }
    EXPECT_NEAR(integral, 1.0, 1e-12);
}

TEST(Ulam, StationaryIsAFixedPoint) {
    const UlamMatrix u = ulam_matrix(pm1(), 1024);
    const UlamDensity d = ulam_density(pm1(), 1024, 0.1, 200000);
    std::vector<double> next(1024, 0.0);
    for (int i = 0; i < 1024; ++i)
        for (std::size_t e = u.row_start[static_cast<std::size_t>(i)]; e < u.row_start[static_cast<std::size_t>(i) + 1]; ++e)
            next[static_cast<std::size_t>(u.col[e])] += d.stationary[static_cast<std::size_t>(i)] * u.weight[e];
    double l1 = 0.0;
    for (int i = 0; i < 1024; ++i) l1 += std::abs(next[static_cast<std::size_t>(i)] - d.stationary[static_cast<std::size_t>(i)]);
    EXPECT_LT(l1, 1e-9);
}

TEST(Ulam, Preconditions) {
    EXPECT_THROW(ulam_density(pm1(), 512, 0.1, 100), Error);
    EXPECT_THROW(ulam_density(pm1(), 1024, 0.6, 100), Error);
    try {
        ulam_density(pm1(), 1024, 0.1, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NotConverged);
    }
}

TEST(Ulam, MassAboveEpsilonGrowsAsEpsilonShrinks) {
    const UlamDensity d = ulam_density(pm1(), 4096, 0.1, 200000);
    std::vector<double> eps;
    for (double e = 0.1; e * 4096 >= 4; e /= 2) eps.push_back(e);
    const auto ratio = neutral_mass_profile(d, 0.5, eps);
    for (std::size_t i = 1; i < ratio.size(); ++i) EXPECT_GT(ratio[i], ratio[i - 1]);
}

TEST(Msd, DegenerateDisplacements) {
    const DiffusionRecord zero = msd_estimate(LiftSpec::constant(pm1(), 0), 1000, 200, 1, 20);
    for (double v : zero.msd) EXPECT_EQ(v, 0.0);
    EXPECT_TRUE(zero.degenerate);
    const DiffusionRecord one = msd_estimate(LiftSpec::constant(pm1(), 1), 1000, 200, 1, 20);
    for (std::size_t i = 0; i < one.n.size(); ++i)
        EXPECT_EQ(one.msd[i], static_cast<double>(one.n[i]) * one.n[i]);
    EXPECT_NEAR(one.gamma_hat, 2.0, 1e-12);
    EXPECT_NEAR(one.gamma_lo, 2.0, 1e-12);
    EXPECT_NEAR(one.gamma_hi, 2.0, 1e-12);
}

TEST(Msd, SymmetricHalvesReportsExponentWithBand) {
    const DiffusionRecord r = msd_estimate(LiftSpec::symmetric_halves(pm1()), 4000, 5000, 9, 100);
    EXPECT_FALSE(r.degenerate);
    EXPECT_GT(r.gamma_hat, 0.0);
    EXPECT_LT(r.gamma_hat, 2.0);
    EXPECT_LE(r.gamma_lo, r.gamma_hat);
    EXPECT_GE(r.gamma_hi, r.gamma_hat);
    EXPECT_THROW(msd_estimate(LiftSpec::symmetric_halves(pm1()), 999, 100, 1), Error);
}

TEST(Msd, SameSeedSameRecord) {
    const LiftSpec lift = LiftSpec::symmetric_halves(pm1());
    const DiffusionRecord a = msd_estimate(lift, 2000, 500, 42, 50);
    const DiffusionRecord b = msd_estimate(lift, 2000, 500, 42, 50);
    EXPECT_EQ(a.msd, b.msd);
    EXPECT_EQ(a.gamma_lo, b.gamma_lo);
}
