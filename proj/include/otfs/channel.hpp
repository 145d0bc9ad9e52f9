// SPDX-License-Identifier: Apache-2.0
//
// Time-varying multipath channel, its time-domain matrix and the equivalent
// delay-Doppler matrix.
//
// The channel acts on the CP-stripped frame symbol by symbol: the CP of each
// OFDM symbol absorbs the delay spread, so tap l' at output sample
// i = n N_l + m reads input sample n N_l + (m - l' mod N_l) of the same
// symbol. This is exactly what per-sample convolution of the CP-extended
// frame followed by CP removal produces, at any Doppler.
#pragma once

#include "otfs/errors.hpp"
#include "otfs/frame.hpp"
#include "otfs/random.hpp"
#include "otfs/transforms.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

namespace otfs {

using SpMat = Eigen::SparseMatrix<cd>;

struct TapProfile {
    std::vector<std::size_t> delays;  // samples
    std::vector<double> powers_db;
    bool normalized = false;
    bool fading = true;  // false: fixed real gains sqrt(power), no Doppler

    std::vector<double> linear_powers() const {
        std::vector<double> p(powers_db.size());
        std::transform(powers_db.begin(), powers_db.end(), p.begin(),
                       [](double db) { return std::pow(10.0, db / 10.0); });
        return p;
    }

    std::size_t max_delay() const { return delays.empty() ? 0 : *std::max_element(delays.begin(), delays.end()); }

    // Rescales powers so the linear sum is 1.
    TapProfile& normalize() {
        double total = 0.0;
        for (double p : linear_powers()) total += p;
        if (!(total > 0.0)) throw ConfigError("tap profile: total power must be positive");
        const double off = 10.0 * std::log10(total);
        for (auto& db : powers_db) db -= off;
        normalized = true;
        return *this;
    }

    void validate(const FrameConfig& cfg) const {
        if (delays.empty()) throw ConfigError("tap profile: no taps");
        if (delays.size() != powers_db.size()) throw ConfigError("tap profile: delays and powers differ in length");
        for (double db : powers_db)
            if (!std::isfinite(db)) throw ConfigError("tap profile: non-finite power");
        if (max_delay() >= cfg.max_delay_taps)
            throw ConfigError("tap profile: delay " + std::to_string(max_delay()) +
                              " samples exceeds max_delay_taps - 1 = " + std::to_string(cfg.max_delay_taps - 1));
    }

    // Delays in microseconds are rounded to the nearest sample.
    static TapProfile from_microseconds(const std::vector<double>& delays_us, std::vector<double> powers_db,
                                        double sample_rate) {
        if (delays_us.size() != powers_db.size())
            throw ConfigError("tap profile: delays and powers differ in length");
        TapProfile p;
        for (double d : delays_us) {
            if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("tap profile: delays must be non-negative");
            p.delays.push_back(std::size_t(std::llround(d * 1e-6 * sample_rate)));
        }
        p.powers_db = std::move(powers_db);
        p.normalize();
        return p;
    }
};

// COST 207 typical urban, six taps.
inline const std::vector<double>& tu6_delays_us() {
    static const std::vector<double> d{0.0, 0.2, 0.5, 1.6, 2.3, 5.0};
    return d;
}
inline const std::vector<double>& tu6_powers_db() {
    static const std::vector<double> p{-3.0, 0.0, -2.0, -6.0, -8.0, -10.0};
    return p;
}

// TU6 with its delay axis compressed so the last tap lands on max_delay_samples.
inline TapProfile scaled_tu6(double sample_rate, std::size_t max_delay_samples) {
    std::vector<double> d = tu6_delays_us();
    const double scale = double(max_delay_samples) / (5.0e-6 * sample_rate);
    for (auto& v : d) v *= scale;
    return TapProfile::from_microseconds(d, tu6_powers_db(), sample_rate);
}

// ---------------------------------------------------------------------------

struct TimeVaryingCir {
    CMat gains;  // L x N_l N_nu, row = delay in samples
    double doppler_hz = 0.0;
    std::uint64_t seed = 0;
    bool exceeds_model_validity = false;  // f_d * frame duration >= 0.5
};

// Time of the post-CP sample i, in seconds from the frame start.
inline double sample_time(std::size_t i, const FrameConfig& cfg) {
    const std::size_t n = i / cfg.n_subcarriers, m = i % cfg.n_subcarriers;
    return double(n * cfg.symbol_len_with_cp() + cfg.cp_len + m) / cfg.sample_rate;
}

inline constexpr std::size_t kSinusoidsPerTap = 32;

// Sum-of-sinusoids Rayleigh fading with a Jakes spectrum, independently
// seeded per tap. Taps that round to the same delay add into one row.
inline TimeVaryingCir generate_cir(const TapProfile& profile, double doppler_hz, const FrameConfig& cfg,
                                   std::uint64_t seed) {
    if (!(doppler_hz >= 0.0) || !std::isfinite(doppler_hz)) throw ConfigError("doppler must be non-negative");
    profile.validate(cfg);
    const auto powers = profile.linear_powers();
    const std::size_t n = cfg.size();

    TimeVaryingCir cir;
    cir.gains = CMat::Zero(Eigen::Index(cfg.max_delay_taps), Eigen::Index(n));
    cir.doppler_hz = doppler_hz;
    cir.seed = seed;
    cir.exceeds_model_validity = doppler_hz * cfg.frame_duration() >= 0.5;

    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = sample_time(i, cfg);

    std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
    for (std::size_t tap = 0; tap < powers.size(); ++tap) {
        Rng rng(derive_seed(seed, {tap}));
        const double amp = std::sqrt(powers[tap] / double(kSinusoidsPerTap));
        auto row = cir.gains.row(Eigen::Index(profile.delays[tap]));
        if (!profile.fading) {
            row.array() += std::sqrt(powers[tap]);
            continue;
        }
        for (std::size_t s = 0; s < kSinusoidsPerTap; ++s) {
            const double alpha = uni(rng);
            const double phi = uni(rng);
            const double w = 2.0 * std::numbers::pi * doppler_hz * std::cos(alpha);
            for (std::size_t i = 0; i < n; ++i) row[Eigen::Index(i)] += std::polar(amp, w * t[i] + phi);
        }
    }
    return cir;
}

// Static channel from explicit per-delay gains.
inline TimeVaryingCir static_cir(const std::vector<cd>& taps, const FrameConfig& cfg) {
    detail::require_dim(taps.size() <= cfg.max_delay_taps, "static_cir: more taps than max_delay_taps");
    TimeVaryingCir cir;
    cir.gains = CMat::Zero(Eigen::Index(cfg.max_delay_taps), Eigen::Index(cfg.size()));
    for (std::size_t l = 0; l < taps.size(); ++l) cir.gains.row(Eigen::Index(l)).setConstant(taps[l]);
    return cir;
}

namespace detail {

inline void require_cir(const TimeVaryingCir& cir, const FrameConfig& cfg) {
    require_dim(std::size_t(cir.gains.cols()) == cfg.size() && std::size_t(cir.gains.rows()) <= cfg.n_subcarriers,
                "channel impulse response does not match frame");
}

// Column index read by tap l at output sample i.
inline std::size_t tap_source(std::size_t i, std::size_t l, const FrameConfig& cfg) {
    const std::size_t nl = cfg.n_subcarriers;
    const std::size_t n = i / nl, m = i % nl;
    return n * nl + (m + nl - l) % nl;
}

} // namespace detail

inline CMat build_time_channel_matrix(const TimeVaryingCir& cir, const FrameConfig& cfg) {
    detail::require_cir(cir, cfg);
    CMat h = CMat::Zero(Eigen::Index(cfg.size()), Eigen::Index(cfg.size()));
    for (std::size_t l = 0; l < std::size_t(cir.gains.rows()); ++l)
        for (std::size_t i = 0; i < cfg.size(); ++i)
            h(Eigen::Index(i), Eigen::Index(detail::tap_source(i, l, cfg))) += cir.gains(Eigen::Index(l), Eigen::Index(i));
    return h;
}

inline SpMat time_channel_sparse(const TimeVaryingCir& cir, const FrameConfig& cfg) {
    detail::require_cir(cir, cfg);
    std::vector<Eigen::Triplet<cd>> trip;
    trip.reserve(std::size_t(cir.gains.size()));
    for (std::size_t l = 0; l < std::size_t(cir.gains.rows()); ++l) {
        if (cir.gains.row(Eigen::Index(l)).isZero(0.0)) continue;
        for (std::size_t i = 0; i < cfg.size(); ++i)
            trip.emplace_back(Eigen::Index(i), Eigen::Index(detail::tap_source(i, l, cfg)),
                              cir.gains(Eigen::Index(l), Eigen::Index(i)));
    }
    SpMat h(Eigen::Index(cfg.size()), Eigen::Index(cfg.size()));
    h.setFromTriplets(trip.begin(), trip.end());
    return h;
}

// ---------------------------------------------------------------------------
// Noise

inline double noise_variance_from_snr(double snr_db) {
    return std::isinf(snr_db) && snr_db > 0 ? 0.0 : std::pow(10.0, -snr_db / 10.0);
}

inline CVec awgn(std::size_t n, double noise_var, std::uint64_t seed) {
    if (noise_var <= 0.0) return CVec::Zero(Eigen::Index(n));
    Rng rng(seed);
    return complex_gaussian(n, noise_var, rng);
}

// Per-sample convolution of the CP-extended frame with the time-varying
// taps, then AWGN against unit signal energy. The frame is preceded by
// silence. CP samples use the gains of the first data sample of their symbol.
inline TimeSignal apply_channel(const TimeSignal& x, const TimeVaryingCir& cir, const FrameConfig& cfg,
                                double snr_db, std::uint64_t seed) {
    detail::require_dim(x.has_cp && x.matches(cfg), "apply_channel: expected a frame with CP");
    detail::require_cir(cir, cfg);
    const std::size_t sym = cfg.symbol_len_with_cp(), nl = cfg.n_subcarriers, cp = cfg.cp_len;
    TimeSignal y{CVec::Zero(x.data.size()), true};
    for (std::size_t t = 0; t < std::size_t(x.data.size()); ++t) {
        const std::size_t n = t / sym, p = t % sym;
        const std::size_t gi = n * nl + (p >= cp ? p - cp : 0);
        cd acc = 0.0;
        for (std::size_t l = 0; l < std::size_t(cir.gains.rows()) && l <= t; ++l)
            acc += cir.gains(Eigen::Index(l), Eigen::Index(gi)) * x.data[Eigen::Index(t - l)];
        y.data[Eigen::Index(t)] = acc;
    }
    y.data += awgn(std::size_t(y.data.size()), noise_variance_from_snr(snr_db), seed);
    return y;
}

// ---------------------------------------------------------------------------
// Equivalent delay-Doppler channel

enum class EquivalentMode { full, simplified };

// full:       P1 P0 H_tl Q0 Q1 with dense operators, O(N^3).
// simplified: (I (x) F) Xi^T H_tl Xi (I (x) F^H) with permutations and FFTs.
inline CMat build_equivalent_channel(const CMat& h_tl, const FrameConfig& cfg,
                                     EquivalentMode mode = EquivalentMode::simplified) {
    detail::require_dim(std::size_t(h_tl.rows()) == cfg.size() && std::size_t(h_tl.cols()) == cfg.size(),
                        "build_equivalent_channel: matrix size does not match frame");
    if (mode == EquivalentMode::full) {
        const auto ops = composed_operators(cfg);
        return ops.p1 * ops.p0 * h_tl * ops.q0 * ops.q1;
    }
    const auto xi = reorder_indices(cfg);
    const auto n = Eigen::Index(cfg.size());
    const std::size_t nv = cfg.n_doppler_bins;
    // g(a, b) = h_tl(pi^-1(a), pi^-1(b)), stored transposed so rows are contiguous.
    CMat gt(n, n);
    for (Eigen::Index b = 0; b < n; ++b)
        for (Eigen::Index a = 0; a < n; ++a) gt(b, a) = h_tl(Eigen::Index(xi.inverse(std::size_t(a))), Eigen::Index(xi.inverse(std::size_t(b))));
    // Right factor: each row of g times (I (x) F^H), i.e. inverse DFTs over
    // the columns of g^T.
    std::vector<cd> buf(nv);
    for (Eigen::Index r = 0; r < n; ++r)
        for (std::size_t blk = 0; blk < cfg.n_subcarriers; ++blk) {
            cd* p = gt.col(r).data() + blk * nv;
            std::copy(p, p + nv, buf.begin());
            detail::unitary_dft(buf.data(), p, nv, true);
        }
    CMat h_eq = gt.transpose();
    for (Eigen::Index c = 0; c < n; ++c)
        for (std::size_t blk = 0; blk < cfg.n_subcarriers; ++blk) {
            cd* p = h_eq.col(c).data() + blk * nv;
            std::copy(p, p + nv, buf.begin());
            detail::unitary_dft(buf.data(), p, nv, false);
        }
    return h_eq;
}

// Equivalent channel straight from the impulse response. Block (m, m - l')
// of H_eq is F diag(d) F^H with d_n = h_l'(n N_l + m), a circulant whose
// first column is the DFT of d scaled by 1/sqrt(N_nu). Out-of-band blocks
// are structurally absent.
inline SpMat equivalent_channel_sparse(const TimeVaryingCir& cir, const FrameConfig& cfg) {
    detail::require_cir(cir, cfg);
    const std::size_t nl = cfg.n_subcarriers, nv = cfg.n_doppler_bins;
    std::vector<Eigen::Triplet<cd>> trip;
    std::vector<cd> d(nv), dft(nv);
    const double s = 1.0 / std::sqrt(double(nv));
    for (std::size_t l = 0; l < std::size_t(cir.gains.rows()); ++l) {
        if (cir.gains.row(Eigen::Index(l)).isZero(0.0)) continue;
        for (std::size_t m = 0; m < nl; ++m) {
            for (std::size_t n = 0; n < nv; ++n) d[n] = cir.gains(Eigen::Index(l), Eigen::Index(n * nl + m));
            detail::unitary_dft(d.data(), dft.data(), nv, false);
            const std::size_t rb = m * nv, cb = ((m + nl - l) % nl) * nv;
            for (std::size_t a = 0; a < nv; ++a)
                for (std::size_t b = 0; b < nv; ++b)
                    trip.emplace_back(Eigen::Index(rb + a), Eigen::Index(cb + b), s * dft[(a + nv - b) % nv]);
        }
    }
    SpMat h(Eigen::Index(cfg.size()), Eigen::Index(cfg.size()));
    h.setFromTriplets(trip.begin(), trip.end());
    return h;
}

inline CMat equivalent_channel(const TimeVaryingCir& cir, const FrameConfig& cfg) {
    return CMat(equivalent_channel_sparse(cir, cfg));
}

// ---------------------------------------------------------------------------
// Channel frequency response per OFDM symbol: the diagonal of
// F H_tl(n) F^H, where H_tl(n) is the n-th N_l x N_l diagonal block.

inline CMat extract_cfr(const CMat& h_tl, const FrameConfig& cfg) {
    detail::require_dim(std::size_t(h_tl.rows()) == cfg.size() && std::size_t(h_tl.cols()) == cfg.size(),
                        "extract_cfr: matrix size does not match frame");
    const auto nl = Eigen::Index(cfg.n_subcarriers);
    const CMat f = dft_matrix(cfg.n_subcarriers);
    CMat cfr(nl, Eigen::Index(cfg.n_doppler_bins));
    for (Eigen::Index n = 0; n < cfr.cols(); ++n) {
        const CMat blk = f * h_tl.block(n * nl, n * nl, nl, nl) * f.adjoint();
        cfr.col(n) = blk.diagonal();
    }
    return cfr;
}

// Same quantity from the impulse response: DFT over delay of the
// symbol-averaged tap gains.
inline CMat cfr_from_cir(const TimeVaryingCir& cir, const FrameConfig& cfg) {
    detail::require_cir(cir, cfg);
    const std::size_t nl = cfg.n_subcarriers;
    CMat cfr(Eigen::Index(nl), Eigen::Index(cfg.n_doppler_bins));
    std::vector<cd> avg(nl), out(nl);
    for (std::size_t n = 0; n < cfg.n_doppler_bins; ++n) {
        std::fill(avg.begin(), avg.end(), cd{});
        for (std::size_t l = 0; l < std::size_t(cir.gains.rows()); ++l)
            avg[l] = cir.gains.row(Eigen::Index(l)).segment(Eigen::Index(n * nl), Eigen::Index(nl)).mean();
        detail::unitary_dft(avg.data(), out.data(), nl, false);
        const double s = std::sqrt(double(nl));
        for (std::size_t k = 0; k < nl; ++k) cfr(Eigen::Index(k), Eigen::Index(n)) = s * out[k];
    }
    return cfr;
}

// Frequency-domain matrix of OFDM symbol n, F H_tl(n) F^H (includes ICI).
inline CMat symbol_frequency_matrix(const SpMat& h_tl, std::size_t n, const FrameConfig& cfg) {
    const auto nl = Eigen::Index(cfg.n_subcarriers);
    const CMat blk = CMat(h_tl.block(Eigen::Index(n) * nl, Eigen::Index(n) * nl, nl, nl));
    const CMat f = dft_matrix(cfg.n_subcarriers);
    return f * blk * f.adjoint();
}

// ---------------------------------------------------------------------------
// Band structure in the delay-major ordering. Entries are grouped into
// N_nu x N_nu blocks; the block offset of entry (i, j) is
// (i / N_nu - j / N_nu) mod N_l. The claimed band is block offsets 0..L,
// N_nu (L + 1) entries wide.

struct BandSupport {
    std::size_t band_width = 0;    // entries, N_nu times the covering block arc
    double max_out_of_band = 0.0;  // largest |entry| with block offset > L
};

inline BandSupport band_support(const CMat& h_eq, const FrameConfig& cfg, double tol) {
    detail::require_dim(std::size_t(h_eq.rows()) == cfg.size() && std::size_t(h_eq.cols()) == cfg.size(),
                        "band_support: matrix size does not match frame");
    const std::size_t nl = cfg.n_subcarriers, nv = cfg.n_doppler_bins;
    std::vector<bool> occupied(nl, false);
    BandSupport out;
    for (Eigen::Index j = 0; j < h_eq.cols(); ++j)
        for (Eigen::Index i = 0; i < h_eq.rows(); ++i) {
            const double mag = std::abs(h_eq(i, j));
            const std::size_t off = (std::size_t(i) / nv + nl - std::size_t(j) / nv) % nl;
            if (mag > tol) occupied[off] = true;
            if (off > cfg.max_delay_taps) out.max_out_of_band = std::max(out.max_out_of_band, mag);
        }
    if (std::none_of(occupied.begin(), occupied.end(), [](bool b) { return b; })) return out;
    // Shortest circular arc covering every occupied offset = N_l - longest empty run.
    std::size_t longest = 0, run = 0;
    for (std::size_t k = 0; k < 2 * nl; ++k) {
        run = occupied[k % nl] ? 0 : run + 1;
        longest = std::max(longest, std::min(run, nl));
    }
    out.band_width = (nl - longest) * nv;
    return out;
}

} // namespace otfs
