// SPDX-License-Identifier: Apache-2.0
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace otfs;
using namespace otfs::testing;

namespace {

const double kA = 1.0 / std::sqrt(2.0);

BitStream bits(std::initializer_list<int> b) {
    BitStream s;
    for (int v : b) s.bits.push_back(std::uint8_t(v));
    return s;
}

} // namespace

TEST(Qpsk, GrayMapping) {
    const CVec s = qpsk_symbols(bits({0, 0, 1, 1, 0, 1, 1, 0}));
    EXPECT_EQ(s[0], cd(kA, kA));
    EXPECT_EQ(s[1], cd(-kA, -kA));
    EXPECT_EQ(s[2], cd(kA, -kA));
    EXPECT_EQ(s[3], cd(-kA, kA));
    EXPECT_NEAR(s.squaredNorm() / 4.0, 1.0, 1e-15);
}

TEST(Qpsk, MapFillsGridInVectorizationOrder) {
    const FrameConfig cfg = small_config(2, 2);
    const auto g = qpsk_map(bits({0, 0, 1, 1, 0, 1, 1, 0}), cfg);
    ASSERT_TRUE(g.matches(cfg));
    EXPECT_EQ(g.data(0, 0), cd(kA, kA));
    EXPECT_EQ(g.data(1, 0), cd(-kA, -kA));
    EXPECT_EQ(g.data(0, 1), cd(kA, -kA));
}

TEST(Qpsk, MapRejectsWrongBitCount) {
    EXPECT_THROW(qpsk_map(bits({0, 1, 0, 1}), small_config(4, 2)), DimensionError);
    EXPECT_THROW(qpsk_symbols(bits({0, 1, 0})), DimensionError);
}

TEST(Qpsk, SliceExamples) {
    CVec in(4);
    in << cd(0.9, 0.8) * kA, cd(3.0, 3.0) * kA, cd(-0.1, -0.1), cd(0.0, 0.0);
    const auto r = qpsk_slice(in);
    EXPECT_EQ(r.points[0], cd(kA, kA));
    EXPECT_EQ(r.points[1], cd(kA, kA));
    EXPECT_EQ(r.points[2], cd(-kA, -kA));
    EXPECT_EQ(r.bits.bits[4], 1);
    EXPECT_EQ(r.bits.bits[5], 1);
    // zero counts as positive
    EXPECT_EQ(r.points[3], cd(kA, kA));
    EXPECT_EQ(r.bits.bits[6], 0);
    EXPECT_EQ(r.bits.bits[7], 0);
}

TEST(Qpsk, ExactConstellationSlicesToItself) {
    const CVec s = qpsk_symbols(bits({0, 0, 0, 1, 1, 0, 1, 1}));
    EXPECT_EQ(qpsk_slice(s).points, s);
}

TEST(Qpsk, ExhaustiveRoundTripUpToFourSymbols) {
    for (std::size_t k = 1; k <= 4; ++k) {
        const std::size_t nbits = 2 * k;
        for (std::uint32_t word = 0; word < (1u << nbits); ++word) {
            BitStream b;
            for (std::size_t i = 0; i < nbits; ++i) b.bits.push_back(std::uint8_t((word >> i) & 1u));
            ASSERT_EQ(qpsk_slice(qpsk_symbols(b)).bits, b);
        }
    }
}

TEST(Qpsk, RandomStreamHasUnitEnergy) {
    Rng rng(7);
    const CVec s = qpsk_symbols(random_bits(20000, rng));
    EXPECT_NEAR(s.squaredNorm() / double(s.size()), 1.0, 1e-12);
}

TEST(Vectorize, ColumnMajor) {
    CMat m(2, 2);
    m << cd(1), cd(2), cd(3), cd(4);  // [[a, b], [c, d]]
    const CVec v = vectorize(m);
    EXPECT_EQ(v[0], cd(1));
    EXPECT_EQ(v[1], cd(3));
    EXPECT_EQ(v[2], cd(2));
    EXPECT_EQ(v[3], cd(4));
}

TEST(Vectorize, RoundTripAndElementPosition) {
    Rng rng(3);
    const CMat m = random_matrix(4, 8, rng);
    const CVec v = vectorize(m);
    EXPECT_EQ(devectorize(v, 4, 8), m);
    for (Eigen::Index c = 0; c < 8; ++c)
        for (Eigen::Index r = 0; r < 4; ++r) EXPECT_EQ(v[c * 4 + r], m(r, c));
}

TEST(Vectorize, LengthMismatchThrows) {
    EXPECT_THROW(devectorize(CVec::Zero(7), 2, 4), DimensionError);
    EXPECT_THROW(devectorize_dd(CVec::Zero(5), small_config(2, 2)), DimensionError);
}

TEST(FrameConfig, Validation) {
    FrameConfig c = small_config(8, 4, 3);
    EXPECT_NO_THROW(c.validate());
    c.cp_len = 1;
    EXPECT_THROW(c.validate(), ConfigError);  // cp_len < L - 1
    c = small_config(8, 4, 9);
    EXPECT_THROW(c.validate(), ConfigError);  // L > N_l
    c = small_config(8, 4);
    c.n_doppler_bins = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(FrameConfig, DerivedTiming) {
    const FrameConfig c = desk_preset().frame;
    EXPECT_DOUBLE_EQ(c.subcarrier_spacing(), 78.125e3);
    EXPECT_DOUBLE_EQ(c.symbol_duration(), 12.8e-6);
    EXPECT_EQ(c.frame_len_with_cp(), 16u * 72u);
    EXPECT_NEAR(c.doppler_from_speed(310.0), 5997.48, 0.01);
}
