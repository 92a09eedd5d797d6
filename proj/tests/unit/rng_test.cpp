#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "gsurf/rng.hpp"
#include "gsurf/stats.hpp"

namespace gsurf {
namespace {

// Known-answer vectors of the Philox4x32-10 reference implementation.
TEST(Philox, KnownAnswerZero) {
    const auto out = philox4x32_10({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out[0], 0x6627e8d5u);
    EXPECT_EQ(out[1], 0xe169c58du);
    EXPECT_EQ(out[2], 0xbc57ac4cu);
    EXPECT_EQ(out[3], 0x9b00dbd8u);
}

TEST(Philox, KnownAnswerOnes) {
    const auto out = philox4x32_10({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out[0], 0x408f276du);
    EXPECT_EQ(out[1], 0x41c83b0eu);
    EXPECT_EQ(out[2], 0xa20bc7c6u);
    EXPECT_EQ(out[3], 0x6d5451fdu);
}

TEST(Philox, KnownAnswerPi) {
    const auto out = philox4x32_10({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out[0], 0xd16cfe09u);
    EXPECT_EQ(out[1], 0x94fdccebu);
    EXPECT_EQ(out[2], 0x5001e420u);
    EXPECT_EQ(out[3], 0x24126ea1u);
}

TEST(Philox, UsableAtCompileTime) {
    static_assert(derive_tag(1, 2, 3) == derive_tag(1, 2, 3));
    SUCCEED();
}

TEST(DeriveTag, DistinctAcrossStreamsAndIndices) {
    std::set<std::uint64_t> tags;
    for (std::uint64_t s = 1; s <= 6; ++s)
        for (std::uint64_t i = 0; i < 2000; ++i) tags.insert(derive_tag(20240917, s, i));
    EXPECT_EQ(tags.size(), 6u * 2000u);
}

TEST(DeriveTag, DependsOnMasterSeed) {
    EXPECT_NE(derive_tag(1, 1, 0), derive_tag(2, 1, 0));
    EXPECT_NE(derive_tag(1ull << 40, 1, 0), derive_tag(0, 1, 0));
}

TEST(UniformAt, OpenUnitIntervalAndRandomAccess) {
    double sum = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        const double u = uniform_at(99, k, 1);
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 3.0 * std::sqrt(1.0 / 12.0 / n));
    EXPECT_EQ(uniform_at(99, 12345, 1), uniform_at(99, 12345, 1));
    EXPECT_NE(uniform_at(99, 12345, 1), uniform_at(99, 12345, 0));
}

TEST(Xoshiro, ReproducibleAndUniform) {
    Xoshiro256pp a(7), b(7);
    for (int k = 0; k < 100; ++k) ASSERT_EQ(a(), b());
    Xoshiro256pp c(8);
    std::vector<double> u(100000);
    for (auto& v : u) v = c.uniform();
    const auto m = mean_se(u);
    EXPECT_LT(std::abs(m.mean - 0.5), 3.0 * m.se);
}

}  // namespace
}  // namespace gsurf
