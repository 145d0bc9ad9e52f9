// SPDX-License-Identifier: Apache-2.0
//
// Frame geometry, symbol grids and QPSK mapping.
//
// Layout conventions used throughout the library:
//   - DelayDopplerGrid is N_nu x N_l (row = Doppler bin, column = delay bin).
//   - TimeFrequencyGrid is N_l x N_nu (row = subcarrier, column = OFDM symbol).
//   - Both grids vectorize column by column, so the delay-Doppler vector is
//     N_l consecutive blocks of N_nu Doppler entries and the time-frequency
//     vector is N_nu consecutive OFDM symbols.
#pragma once

#include "otfs/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace otfs {

using cd = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

struct FrameConfig {
    std::size_t n_subcarriers = 8;   // N_l
    std::size_t n_doppler_bins = 4;  // N_nu
    std::size_t max_delay_taps = 3;  // L, delays 0..L-1 samples
    std::size_t cp_len = 2;
    double sample_rate = 625e3;      // Hz
    double carrier_freq = 5.8e9;     // Hz, only used for speed <-> Doppler

    std::size_t size() const { return n_subcarriers * n_doppler_bins; }
    std::size_t symbol_len_with_cp() const { return n_subcarriers + cp_len; }
    std::size_t frame_len_with_cp() const { return n_doppler_bins * symbol_len_with_cp(); }

    // Useful part of one OFDM symbol, N_l / fs.
    double symbol_duration() const { return static_cast<double>(n_subcarriers) / sample_rate; }
    double frame_duration() const { return static_cast<double>(frame_len_with_cp()) / sample_rate; }
    double subcarrier_spacing() const { return sample_rate / static_cast<double>(n_subcarriers); }

    double doppler_from_speed(double speed_mps) const { return speed_mps * carrier_freq / 299792458.0; }

    void validate() const {
        if (n_subcarriers == 0 || n_doppler_bins == 0)
            throw ConfigError("frame: n_subcarriers and n_doppler_bins must be positive");
        if (max_delay_taps == 0)
            throw ConfigError("frame: max_delay_taps must be positive");
        if (max_delay_taps > n_subcarriers)
            throw ConfigError("frame: max_delay_taps must not exceed n_subcarriers");
        if (cp_len + 1 < max_delay_taps)
            throw ConfigError("frame: cp_len must be at least max_delay_taps - 1");
        if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
            throw ConfigError("frame: sample_rate must be positive");
    }

    bool operator==(const FrameConfig&) const = default;
};

struct DelayDopplerGrid {
    CMat data;  // N_nu x N_l

    DelayDopplerGrid() = default;
    explicit DelayDopplerGrid(CMat m) : data(std::move(m)) {}
    static DelayDopplerGrid zeros(const FrameConfig& cfg) {
        return DelayDopplerGrid(CMat::Zero(Eigen::Index(cfg.n_doppler_bins), Eigen::Index(cfg.n_subcarriers)));
    }

    bool matches(const FrameConfig& cfg) const {
        return std::size_t(data.rows()) == cfg.n_doppler_bins && std::size_t(data.cols()) == cfg.n_subcarriers;
    }
};

struct TimeFrequencyGrid {
    CMat data;  // N_l x N_nu

    TimeFrequencyGrid() = default;
    explicit TimeFrequencyGrid(CMat m) : data(std::move(m)) {}
    static TimeFrequencyGrid zeros(const FrameConfig& cfg) {
        return TimeFrequencyGrid(CMat::Zero(Eigen::Index(cfg.n_subcarriers), Eigen::Index(cfg.n_doppler_bins)));
    }

    bool matches(const FrameConfig& cfg) const {
        return std::size_t(data.rows()) == cfg.n_subcarriers && std::size_t(data.cols()) == cfg.n_doppler_bins;
    }
};

// Samples in sequential time order, with or without per-symbol cyclic prefix.
struct TimeSignal {
    CVec data;
    bool has_cp = false;

    bool matches(const FrameConfig& cfg) const {
        return std::size_t(data.size()) == (has_cp ? cfg.frame_len_with_cp() : cfg.size());
    }
};

struct BitStream {
    std::vector<std::uint8_t> bits;

    std::size_t size() const { return bits.size(); }
    bool operator==(const BitStream&) const = default;
};

inline std::size_t bits_per_frame(const FrameConfig& cfg) { return 2 * cfg.size(); }

// ---------------------------------------------------------------------------
// Vectorization

template <typename Grid>
CVec vectorize(const Grid& g) {
    return Eigen::Map<const CVec>(g.data.data(), g.data.size());
}

inline CVec vectorize(const CMat& m) { return Eigen::Map<const CVec>(m.data(), m.size()); }

inline CMat devectorize(const CVec& v, Eigen::Index rows, Eigen::Index cols) {
    detail::require_dim(v.size() == rows * cols,
                        "devectorize: length " + std::to_string(v.size()) + " does not fit " +
                            std::to_string(rows) + "x" + std::to_string(cols));
    return Eigen::Map<const CMat>(v.data(), rows, cols);
}

inline DelayDopplerGrid devectorize_dd(const CVec& v, const FrameConfig& cfg) {
    return DelayDopplerGrid(devectorize(v, Eigen::Index(cfg.n_doppler_bins), Eigen::Index(cfg.n_subcarriers)));
}

inline TimeFrequencyGrid devectorize_tf(const CVec& v, const FrameConfig& cfg) {
    return TimeFrequencyGrid(devectorize(v, Eigen::Index(cfg.n_subcarriers), Eigen::Index(cfg.n_doppler_bins)));
}

// ---------------------------------------------------------------------------
// QPSK, Gray mapped: (b0, b1) -> ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2)

inline CVec qpsk_symbols(const BitStream& in) {
    detail::require_dim(in.size() % 2 == 0, "qpsk: bit count must be even");
    const double a = 1.0 / std::sqrt(2.0);
    CVec out(Eigen::Index(in.size() / 2));
    for (Eigen::Index s = 0; s < out.size(); ++s) {
        const auto b0 = in.bits[2 * std::size_t(s)];
        const auto b1 = in.bits[2 * std::size_t(s) + 1];
        out[s] = cd(b0 ? -a : a, b1 ? -a : a);
    }
    return out;
}

inline DelayDopplerGrid qpsk_map(const BitStream& in, const FrameConfig& cfg) {
    detail::require_dim(in.size() == bits_per_frame(cfg),
                        "qpsk_map: expected " + std::to_string(bits_per_frame(cfg)) + " bits, got " +
                            std::to_string(in.size()));
    return devectorize_dd(qpsk_symbols(in), cfg);
}

struct SliceResult {
    BitStream bits;
    CVec points;
};

// Quadrant decision. A coordinate of exactly zero counts as positive.
inline SliceResult qpsk_slice(const CVec& symbols) {
    const double a = 1.0 / std::sqrt(2.0);
    SliceResult r;
    r.bits.bits.resize(2 * std::size_t(symbols.size()));
    r.points.resize(symbols.size());
    for (Eigen::Index s = 0; s < symbols.size(); ++s) {
        const bool b0 = symbols[s].real() < 0.0;
        const bool b1 = symbols[s].imag() < 0.0;
        r.bits.bits[2 * std::size_t(s)] = b0;
        r.bits.bits[2 * std::size_t(s) + 1] = b1;
        r.points[s] = cd(b0 ? -a : a, b1 ? -a : a);
    }
    return r;
}

inline std::size_t count_bit_errors(const BitStream& a, const BitStream& b) {
    detail::require_dim(a.size() == b.size(), "count_bit_errors: length mismatch");
    std::size_t e = 0;
    for (std::size_t i = 0; i < a.size(); ++i) e += (a.bits[i] != b.bits[i]);
    return e;
}

} // namespace otfs
