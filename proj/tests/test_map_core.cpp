#include "intmaps/map_core.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace intmaps;

TEST(MapCore, PmOneBranchesAndFormula) {
    const MapSpec m = pomeau_manneville(1.0);
    ASSERT_EQ(m.branch_count(), 2);
    EXPECT_EQ(m.a(0), 0.0);
    EXPECT_EQ(m.a(1), 0.5);
    EXPECT_EQ(m.a(2), 1.0);
    for (double x : {0.0, 0.1, 0.25, 0.4, 0.5}) EXPECT_NEAR(m.eval(x), x + 2 * x * x, 1e-15);
    EXPECT_EQ(m.beta(), 0.0);
    EXPECT_EQ(m.alpha(), 1.0);
    EXPECT_DOUBLE_EQ(pomeau_manneville(2.0).alpha(), 0.5);
}

TEST(MapCore, EvalAndDerivatives) {
    const MapSpec m = pomeau_manneville(1.0);
    EXPECT_EQ(m.eval(0.0), 0.0);
    EXPECT_NEAR(m.eval(0.5), 1.0, 1e-15); // left branch wins at the shared endpoint
    EXPECT_NEAR(m.eval(0.75), 0.5, 1e-15);
    EXPECT_NEAR(m.deriv(0.0), 1.0, 1e-15);
    EXPECT_NEAR(m.deriv(0.75), 2.0, 1e-15);
    EXPECT_NEAR(m.deriv2(0.25), 4.0, 1e-13);
}

TEST(MapCore, EvalMatchesOracleFormula) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double s : {1.0, 1.5, 2.0, 3.0}) {
        const MapSpec m = pomeau_manneville(s);
        for (int i = 0; i < 2000; ++i) {
            const double x = u(rng);
            EXPECT_NEAR(m.eval(x), oracle::pm_tau(s, x), 1e-14) << "s=" << s << " x=" << x;
            EXPECT_NEAR(m.deriv(x), oracle::pm_dtau(s, x), 1e-12) << "s=" << s << " x=" << x;
        }
    }
}

TEST(MapCore, InverseBranch) {
    const MapSpec m = pomeau_manneville(1.0);
    EXPECT_NEAR(m.inverse_branch(0, 0.5), (std::sqrt(5.0) - 1.0) / 4.0, 1e-15);
    EXPECT_NEAR(m.inverse_branch(1, 0.0), 0.5, 1e-15);
    for (double s : {1.0, 2.0, 2.5}) {
        const MapSpec p = pomeau_manneville(s);
        for (const Branch& b : p.branches()) {
            EXPECT_NEAR(p.inverse_branch(b.index, b.value(b.lo)), b.lo, 1e-12);
            EXPECT_NEAR(p.inverse_branch(b.index, b.value(b.hi)), b.hi, 1e-12);
        }
        for (int i = 1; i < 100; ++i) {
            const double y = i / 100.0;
            EXPECT_NEAR(p.inverse_branch(0, y), oracle::pm_neutral_inverse(s, y), 1e-14) << "s=" << s << " y=" << y;
        }
    }
    const MapSpec g = countable_geometric(1.5, 0.5, 12, 0.4);
    for (const Branch& b : g.branches()) {
        EXPECT_NEAR(g.inverse_branch(b.index, 0.0), b.lo, 1e-12);
        EXPECT_NEAR(g.inverse_branch(b.index, 1.0), b.hi, 1e-12);
        EXPECT_NEAR(b.value(g.inverse_branch(b.index, 0.3)), 0.3, 1e-12);
    }
}

TEST(MapCore, ValidateAxiomsPomeauManneville) {
    const ValidationReport r1 = validate_axioms(pomeau_manneville(1.0));
    EXPECT_TRUE(r1.all_pass());
    EXPECT_NEAR(r1.lambda_hat, 2.0, 1e-12);
    EXPECT_NEAR(r1.beta_hat, 0.0, 0.05);
    const ValidationReport r2 = validate_axioms(pomeau_manneville(2.0));
    EXPECT_TRUE(r2.all_pass());
    EXPECT_NEAR(r2.beta_hat, 1.0, 0.05);
    EXPECT_LE(r2.curvature_ratio_max, 10.0 * r2.curvature_ratio_min);
}

TEST(MapCore, ValidateAxiomsGeometric) {
    const MapSpec g = countable_geometric(1.0, 0.5);
    const ValidationReport r = validate_axioms(g);
    EXPECT_TRUE(r.all_pass());
    EXPECT_GT(r.lambda_hat, 1.0);
    EXPECT_NEAR(r.beta_hat, 0.0, 0.05);
    EXPECT_EQ(g.family().jmax, 30);
    EXPECT_NEAR(r.truncation_residual, 0.5 * std::pow(0.5, 29), 1e-20);
    EXPECT_NO_THROW(countable_geometric(1.0, 0.5, 30));
}

TEST(MapCore, RejectsOutOfRangeFamilies) {
    EXPECT_THROW(pomeau_manneville(0.5), Error);
    EXPECT_THROW(countable_geometric(1.0, 1.0), Error);
    EXPECT_THROW(countable_geometric(1.0, 0.5, 1), Error);
    EXPECT_THROW(countable_geometric(1.0, 0.5, 32), Error);
    try {
        pomeau_manneville(0.5);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
    }
}

TEST(MapCore, CustomMapWithoutClosedInverse) {
    // tent-like map with a neutral branch given only through its forward formula
    Branch b0{0, 0.0, 0.5, [](double x) { return x + 2 * x * x; }, [](double x) { return 1 + 4 * x; },
              [](double) { return 4.0; }, true, {}};
    Branch b1{1, 0.5, 1.0, [](double x) { return 2 - 2 * x; }, [](double) { return -2.0; }, [](double) { return 0.0; },
              false, {}};
    const MapSpec m({b0, b1}, 0.0, 2.0, 4.0);
    EXPECT_NEAR(m.inverse_branch(0, 0.5), (std::sqrt(5.0) - 1.0) / 4.0, 1e-14);
    EXPECT_NEAR(m.inverse_branch(1, 0.5), 0.75, 1e-14);
    EXPECT_TRUE(validate_axioms(m).a1_pass);
}

TEST(MapCore, DescriptorRoundTrip) {
    const FamilyParams p = parse_map_descriptor("geo:s=1.5,r=0.25,jmax=20,a1=0.4");
    EXPECT_EQ(p.tag, FamilyTag::CountableGeometric);
    EXPECT_EQ(p.s, 1.5);
    EXPECT_EQ(p.r, 0.25);
    EXPECT_EQ(p.jmax, 20);
    EXPECT_EQ(p.a1, 0.4);
    EXPECT_EQ(parse_map_descriptor(format_map_descriptor(p)), p);
    EXPECT_EQ(parse_map_descriptor("pm:s=2").s, 2.0);
    EXPECT_THROW(parse_map_descriptor("pm:s=abc"), Error);
    EXPECT_THROW(parse_map_descriptor("pm:r=0.5,s=1"), Error);
    EXPECT_THROW(parse_map_descriptor("tent:s=1"), Error);
    EXPECT_THROW(parse_map_descriptor("pm"), Error);
}
