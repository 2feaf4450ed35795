#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "collider_lab/rng.hpp"

using namespace collider_lab;
using rng::Philox4x32;

namespace {

Philox4x32 keyed(std::uint32_t k0, std::uint32_t k1) {
    return Philox4x32((std::uint64_t{k1} << 32) | k0);
}

}  // namespace

// Known-answer vectors from the Random123 distribution (kat_vectors, philox4x32_10).
TEST(Philox, KnownAnswerZero) {
    const auto out = keyed(0, 0)({0, 0, 0, 0});
    EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
}

TEST(Philox, KnownAnswerOnes) {
    const auto out = keyed(0xffffffff, 0xffffffff)({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff});
    EXPECT_EQ(out, (Philox4x32::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
}

TEST(Philox, KnownAnswerPi) {
    const auto out =
        keyed(0xa4093822, 0x299f31d0)({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344});
    EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(UnitOpen, NeverHitsEndpoints) {
    EXPECT_GT(rng::to_unit_open(0), 0.0);
    EXPECT_LT(rng::to_unit_open(~std::uint64_t{0}), 1.0);
}

TEST(StreamGenerator, PureFunctionOfSeedStreamAndRow) {
    const SeedSpec seed{42, "a"};
    const rng::StreamGenerator g1(seed), g2(seed);
    for (std::uint64_t row : {0ull, 1ull, 123456789ull, (1ull << 40) + 3}) {
        auto a = g1.row(row);
        auto b = g2.row(row);
        for (int k = 0; k < 7; ++k) EXPECT_EQ(a.uniform(), b.uniform());
    }
    auto first = rng::StreamGenerator({42, "a"}).row(5).uniform();
    EXPECT_NE(first, rng::StreamGenerator({42, "b"}).row(5).uniform());
    EXPECT_NE(first, rng::StreamGenerator({43, "a"}).row(5).uniform());
    EXPECT_NE(first, rng::StreamGenerator({42, "a"}).row(6).uniform());
}

TEST(StreamGenerator, ChildStreams) {
    const SeedSpec s{1, "root"};
    EXPECT_EQ(s.child("x").stream_id, "root/x");
    EXPECT_EQ(s.child("x").master_seed, 1u);
}

TEST(StreamGenerator, UniformAndNormalMoments) {
    const rng::StreamGenerator g({9, "moments"});
    const std::size_t n = 1'000'000;
    double su = 0, su2 = 0, sz = 0, sz2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto rs = g.row(i);
        const double u = rs.uniform();
        const double z = rs.normal();
        su += u;
        su2 += u * u;
        sz += z;
        sz2 += z * z;
    }
    const double nd = static_cast<double>(n);
    EXPECT_NEAR(su / nd, 0.5, 4 * std::sqrt(1.0 / 12 / nd));
    EXPECT_NEAR(su2 / nd - std::pow(su / nd, 2), 1.0 / 12, 0.001);
    EXPECT_NEAR(sz / nd, 0.0, 4 / std::sqrt(nd));
    EXPECT_NEAR(sz2 / nd, 1.0, 4 * std::sqrt(2.0 / nd));
}

TEST(StreamGenerator, DistinctStreamsUncorrelated) {
    const rng::StreamGenerator a({3, "exposure"}), b({3, "outcome"});
    const std::size_t n = 200'000;
    double sab = 0, sa = 0, sb = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double u = a.row(i).uniform();
        const double v = b.row(i).uniform();
        sa += u;
        sb += v;
        sab += u * v;
        saa += u * u;
        sbb += v * v;
    }
    const double nd = static_cast<double>(n);
    const double cov = sab / nd - sa / nd * sb / nd;
    const double r = cov / std::sqrt((saa / nd - std::pow(sa / nd, 2)) * (sbb / nd - std::pow(sb / nd, 2)));
    EXPECT_LT(std::abs(r), 4 / std::sqrt(nd));
}
