#include "intmaps/distortion.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace intmaps;

namespace {

std::vector<FrameType> types(const ParsedOrbit& p) {
    std::vector<FrameType> t;
    for (const Frame& f : p.frames) t.push_back(f.type);
    return t;
}

const MapSpec& pm1() {
    static const MapSpec m = pomeau_manneville(1.0);
    return m;
}

const RefinedPartition& pm1_part() {
    static const RefinedPartition p = compute_b_sequence(pm1(), 10000);
    return p;
}

} // namespace

TEST(ParseExcursions, Examples) {
    using FT = FrameType;
    const ParsedOrbit a = parse_excursions({1, 2, 1});
    EXPECT_EQ(types(a), (std::vector<FT>{FT::Type3, FT::Type3, FT::Type4}));

    const ParsedOrbit b = parse_excursions({-2, -1, 1, -1, 1});
    EXPECT_EQ(types(b), (std::vector<FT>{FT::Type1, FT::Type2, FT::Type4}));
    EXPECT_EQ(b.frames[0].start, 0);
    EXPECT_EQ(b.frames[0].end, 1);
    EXPECT_EQ(b.frames[1].start, 2);
    EXPECT_EQ(b.frames[1].end, 3);
    EXPECT_EQ(b.frames[2].start, 4);

    const ParsedOrbit c = parse_excursions({1, -1, -2});
    ASSERT_EQ(c.frames.size(), 1u);
    EXPECT_EQ(c.frames[0].type, FT::Type4);
    EXPECT_EQ(c.frames[0].end, 2);
}

TEST(ParseExcursions, Rejections) {
    try {
        parse_excursions({-3, -2, -1});
        FAIL() << "expected trivial parsing error";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TrivialParsing);
    }
    EXPECT_THROW(parse_excursions({1}), Error);
}

TEST(ParseExcursions, FramesPartitionRealItineraries) {
    const RefinedPartition& part = pm1_part();
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int t = 0; t < 1000; ++t) {
        const Word w = itinerary(pm1(), part, u(rng), 30);
        if (has_underflow(w) || !has_positive(w)) continue;
        const ParsedOrbit p = parse_excursions(w);
        int next = 0;
        for (std::size_t i = 0; i < p.frames.size(); ++i) {
            const Frame& f = p.frames[i];
            EXPECT_EQ(f.start, next);
            next = f.end + 1;
            if (i > 0) {
                EXPECT_GT(w[static_cast<std::size_t>(f.start)], 0);
            }
            for (int k = f.start + 1; k <= f.end; ++k) EXPECT_LT(w[static_cast<std::size_t>(k)], 0);
            if (f.type == FrameType::Type1) {
                EXPECT_EQ(i, 0u);
            }
            if (f.type == FrameType::Type4) {
                EXPECT_EQ(i + 1, p.frames.size());
            }
            if (f.type == FrameType::Type3) {
                EXPECT_EQ(f.length(), 1);
            }
            if (f.type == FrameType::Type2) {
                EXPECT_GT(f.length(), 1);
            }
        }
        EXPECT_EQ(next, static_cast<int>(w.size()));
    }
}

TEST(LogDistortion, TrivialCases) {
    const RefinedPartition& part = pm1_part();
    EXPECT_EQ(log_distortion(pm1(), part, 0.3, 0.3, 5), 0.0);
    EXPECT_EQ(log_distortion(pm1(), part, 0.6, 0.7, 0), 0.0);
    try {
        log_distortion(pm1(), part, 0.6, 0.8, 1);
        FAIL() << "expected itinerary mismatch";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ItineraryMismatch);
    }
}

TEST(LogDistortion, SumAgreesWithHighPrecisionProduct) {
    const RefinedPartition& part = pm1_part();
    const auto pairs = sample_cylinder_pairs(pm1(), part, 15, 300, 4);
    std::size_t checked = 0;
    for (const CylinderPair& cp : pairs) {
        double sum = 0.0;
        try {
            sum = log_distortion(pm1(), part, cp.pair.x, cp.pair.y, cp.pair.n);
        } catch (const Error&) {
            continue;
        }
        const double prod = oracle::pm_chain_log_ratio(1.0, cp.pair.x, cp.pair.y, cp.pair.n);
        EXPECT_LE(std::abs(sum - prod), 1e-8 * std::max(std::abs(prod), 1e-300)) << sum << " vs " << prod;
        ++checked;
    }
    EXPECT_GT(checked, 1000u);
}

TEST(SegmentEstimates, TypeThreeFramesExpandByLambda) {
    const RefinedPartition& part = pm1_part();
    const auto sample = sample_cylinder_pairs(pm1(), part, 15, 300, 8);
    std::vector<OrbitPair> pairs;
    for (const auto& cp : sample) pairs.push_back(cp.pair);
    const SegmentReport rep = verify_segment_estimates(pm1(), part, pairs);
    EXPECT_GT(rep.frame_counts[2], 0u);
    for (const FrameRecord& f : rep.frames) {
        if (f.type != FrameType::Type3) continue;
        EXPECT_LE(f.sep_start, f.sep_next / 2.0 * (1 + 1e-9));
        EXPECT_NEAR(f.log_sum, 0.0, 1e-15); // affine branch
    }
    EXPECT_LT(rep.eta_hat, 1.0);
    for (double v : rep.total_abs_log) EXPECT_LE(v, rep.c_hat());
}

TEST(LemDist, BoundedAndSound) {
    const RefinedPartition& part = pm1_part();
    const DistortionReport r15 = verify_lem_dist(pm1(), part, 15, 500, 2);
    EXPECT_TRUE(std::isfinite(r15.max_abs_log));
    EXPECT_TRUE(r15.c_hat_sound);
    EXPECT_GE(r15.d_hat, r15.d_observed);
    EXPECT_EQ(r15.violations_ii, 0u);
    EXPECT_EQ(r15.violations_iii, 0u);
    EXPECT_GE(r15.d_observed, 1.0);
}

TEST(LemDist, DepthOneWholeCylinder) {
    const RefinedPartition& part = pm1_part();
    const ConditionalMeasureCheck c = conditional_measures(pm1(), part, {1}, part.element(1));
    EXPECT_DOUBLE_EQ(c.image_conditional, 1.0);
    EXPECT_DOUBLE_EQ(c.source_conditional, 1.0);
    EXPECT_THROW(conditional_measures(pm1(), part, {-2, -1}, part.element(-2)), Error);
}

TEST(Young, QuotientEnvelope) {
    const RefinedPartition& part = pm1_part();
    const YoungCheckRecord y = verify_young(pm1(), part, 50, 1000, 3);
    EXPECT_TRUE(std::isfinite(y.c_prime));
    EXPECT_TRUE(y.second_inequality);
    EXPECT_TRUE(y.separations_within_cells);
    for (const YoungStratum& s : y.strata) {
        if (s.p == 0) {
            EXPECT_EQ(s.max_quotient, 0.0);
        }
        EXPECT_LE(s.max_quotient, y.c_prime);
    }
    for (int k = 1; k <= 50; ++k) {
        const double b = part.b(k);
        const std::int64_t n = y.n_k[static_cast<std::size_t>(k - 1)];
        EXPECT_GE(b, std::pow(static_cast<double>(n + 1), -1.0));
        EXPECT_LT(b, std::pow(static_cast<double>(n), -1.0));
    }
}

TEST(Young, OraclePairAtFullDepth) {
    // p = j: chain-rule sum along the neutral excursion against the 50-digit product
    const RefinedPartition& part = pm1_part();
    const int j = 50;
    const Interval cell = part.element(-j);
    const double x = cell.lo + 0.1 * cell.width(), y = cell.lo + 0.9 * cell.width();
    const double ref = oracle::pm_chain_log_ratio(1.0, x, y, j - 1);
    const double got = log_distortion(pm1(), part, x, y, j - 1);
    EXPECT_LE(std::abs(got - ref), 1e-8 * std::abs(ref));
    const YoungCheckRecord rec = verify_young(pm1(), part, j, 1000, 3);
    double xs = x, ys = y;
    for (int p = 0; p < j; ++p) {
        xs = pm1().eval(xs);
        ys = pm1().eval(ys);
    }
    EXPECT_LE(std::abs(ref) * part.neutral_length(0) / std::abs(xs - ys), rec.c_prime * (1 + 1e-9));
}
