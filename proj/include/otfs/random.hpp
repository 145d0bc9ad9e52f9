// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "otfs/frame.hpp"

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace otfs {

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Order-sensitive combination of a seed with a list of stream indices.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
    std::uint64_t s = mix64(base);
    for (auto p : parts) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
    return s;
}

using Rng = std::mt19937_64;

// Circularly symmetric complex Gaussian samples with E|z|^2 = variance.
inline CVec complex_gaussian(std::size_t n, double variance, Rng& rng) {
    std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
    CVec z(static_cast<Eigen::Index>(n));
    for (auto& v : z) {
        const double re = nd(rng);
        const double im = nd(rng);
        v = cd(re, im);
    }
    return z;
}

inline BitStream random_bits(std::size_t n, Rng& rng) {
    BitStream b;
    b.bits.resize(n);
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (i % 64 == 0) word = rng();
        b.bits[i] = std::uint8_t(word & 1u);
        word >>= 1;
    }
    return b;
}

} // namespace otfs
