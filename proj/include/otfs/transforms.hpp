// SPDX-License-Identifier: Apache-2.0
//
// Linear transforms of the OTFS chain.
//
// All DFTs are unitary: F(k, l) = exp(-j 2 pi k l / N) / sqrt(N).
//
// Index conventions (N = N_l * N_nu):
//   sequential time    i = n * N_l + m      (OFDM symbol n, sample m)
//   delay-major        j = m * N_nu + n     (layout of x_t before reordering)
//   reordering Xi      (Xi x)[i] = x[pi(i)], pi(i) = floor(i / N_l) + (i mod N_l) * N_nu
//
// The extended FFT F_bar maps the delay-major layout to the column-major
// time-frequency layout by running one N_l-point DFT per OFDM symbol over
// the N_nu-strided sub-sequence, i.e. F_bar = (I_{N_nu} (x) F_{N_l}) Xi.
#pragma once

#include "otfs/errors.hpp"
#include "otfs/frame.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>
#include <vector>

namespace otfs {

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
    thread_local Eigen::FFT<double> engine = [] {
        Eigen::FFT<double> f;
        f.SetFlag(Eigen::FFT<double>::Unscaled);
        return f;
    }();
    return engine;
}

// Unitary DFT of n contiguous samples. src and dst must not alias.
inline void unitary_dft(const cd* src, cd* dst, std::size_t n, bool inverse) {
    if (n == 1) {
        dst[0] = src[0];
        return;
    }
    auto& f = fft_engine();
    if (inverse)
        f.inv(dst, src, Eigen::Index(n));
    else
        f.fwd(dst, src, Eigen::Index(n));
    const double s = 1.0 / std::sqrt(double(n));
    for (std::size_t i = 0; i < n; ++i) dst[i] *= s;
}

// Unitary DFT of every column of m, in place.
inline void dft_columns(CMat& m, bool inverse) {
    std::vector<cd> buf(std::size_t(m.rows()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        std::copy(m.col(c).data(), m.col(c).data() + m.rows(), buf.begin());
        unitary_dft(buf.data(), m.col(c).data(), buf.size(), inverse);
    }
}

inline void dft_rows(CMat& m, bool inverse) {
    CMat t = m.transpose();
    dft_columns(t, inverse);
    m = t.transpose();
}

inline void require_vec(const CVec& x, const FrameConfig& cfg, const char* who) {
    require_dim(std::size_t(x.size()) == cfg.size(),
                std::string(who) + ": expected length " + std::to_string(cfg.size()) + ", got " +
                    std::to_string(x.size()));
}

} // namespace detail

// Dense unitary DFT matrix.
inline CMat dft_matrix(std::size_t n) {
    const auto sz = static_cast<Eigen::Index>(n);
    CMat f(sz, sz);
    const double s = 1.0 / std::sqrt(double(n));
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
            const double ph = -2.0 * std::numbers::pi * double((k * l) % n) / double(n);
            f(Eigen::Index(k), Eigen::Index(l)) = std::polar(s, ph);
        }
    return f;
}

// ---------------------------------------------------------------------------
// Reordering permutation Xi

class ReorderMatrix {
public:
    explicit ReorderMatrix(const FrameConfig& cfg) : perm_(cfg.size()), inv_(cfg.size()) {
        const std::size_t nl = cfg.n_subcarriers, nv = cfg.n_doppler_bins;
        for (std::size_t i = 0; i < perm_.size(); ++i) {
            perm_[i] = i / nl + (i % nl) * nv;
            inv_[perm_[i]] = i;
        }
    }

    std::size_t size() const { return perm_.size(); }
    const std::vector<std::size_t>& indices() const { return perm_; }
    std::size_t operator()(std::size_t i) const { return perm_[i]; }

    // Xi x: delay-major -> sequential time.
    CVec apply(const CVec& x) const {
        detail::require_dim(std::size_t(x.size()) == size(), "reorder: length mismatch");
        CVec y(x.size());
        for (std::size_t i = 0; i < perm_.size(); ++i) y[Eigen::Index(i)] = x[Eigen::Index(perm_[i])];
        return y;
    }

    // Xi^T y: sequential time -> delay-major.
    CVec apply_transpose(const CVec& y) const {
        detail::require_dim(std::size_t(y.size()) == size(), "reorder: length mismatch");
        CVec x(y.size());
        for (std::size_t i = 0; i < perm_.size(); ++i) x[Eigen::Index(perm_[i])] = y[Eigen::Index(i)];
        return x;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd xi = Eigen::MatrixXd::Zero(Eigen::Index(size()), Eigen::Index(size()));
        for (std::size_t i = 0; i < perm_.size(); ++i) xi(Eigen::Index(i), Eigen::Index(perm_[i])) = 1.0;
        return xi;
    }

    std::size_t inverse(std::size_t j) const { return inv_[j]; }

private:
    std::vector<std::size_t> perm_;
    std::vector<std::size_t> inv_;
};

inline ReorderMatrix reorder_indices(const FrameConfig& cfg) { return ReorderMatrix(cfg); }

// ---------------------------------------------------------------------------
// Extended FFT

// Forward: delay-major input, column-major time-frequency output.
// Inverse: the adjoint, time-frequency input, delay-major output.
inline CVec extended_fft_apply(const CVec& x, const FrameConfig& cfg, bool inverse) {
    detail::require_vec(x, cfg, "extended_fft_apply");
    const std::size_t nl = cfg.n_subcarriers, nv = cfg.n_doppler_bins;
    CVec y(x.size());
    std::vector<cd> in(nl), out(nl);
    for (std::size_t n = 0; n < nv; ++n) {
        if (!inverse) {
            for (std::size_t m = 0; m < nl; ++m) in[m] = x[Eigen::Index(m * nv + n)];
            detail::unitary_dft(in.data(), out.data(), nl, false);
            for (std::size_t k = 0; k < nl; ++k) y[Eigen::Index(n * nl + k)] = out[k];
        } else {
            for (std::size_t k = 0; k < nl; ++k) in[k] = x[Eigen::Index(n * nl + k)];
            detail::unitary_dft(in.data(), out.data(), nl, true);
            for (std::size_t m = 0; m < nl; ++m) y[Eigen::Index(m * nv + n)] = out[m];
        }
    }
    return y;
}

inline CMat extended_fft_matrix(const FrameConfig& cfg) {
    const CMat f = dft_matrix(cfg.n_subcarriers);
    const std::size_t nl = cfg.n_subcarriers, nv = cfg.n_doppler_bins;
    CMat fb = CMat::Zero(Eigen::Index(cfg.size()), Eigen::Index(cfg.size()));
    for (std::size_t n = 0; n < nv; ++n)
        for (std::size_t k = 0; k < nl; ++k)
            for (std::size_t m = 0; m < nl; ++m)
                fb(Eigen::Index(n * nl + k), Eigen::Index(m * nv + n)) = f(Eigen::Index(k), Eigen::Index(m));
    return fb;
}

// (I_{N_l} (x) F_{N_nu}) x, or its adjoint when inverse is set.
inline CVec doppler_dft_apply(const CVec& x, const FrameConfig& cfg, bool inverse) {
    detail::require_vec(x, cfg, "doppler_dft_apply");
    const std::size_t nv = cfg.n_doppler_bins;
    CVec y(x.size());
    for (std::size_t l = 0; l < cfg.n_subcarriers; ++l)
        detail::unitary_dft(x.data() + l * nv, y.data() + l * nv, nv, inverse);
    return y;
}

inline CMat doppler_dft_matrix(const FrameConfig& cfg, bool inverse) {
    CMat f = dft_matrix(cfg.n_doppler_bins);
    if (inverse) f.adjointInPlace();
    CMat k = CMat::Zero(Eigen::Index(cfg.size()), Eigen::Index(cfg.size()));
    const auto nv = Eigen::Index(cfg.n_doppler_bins);
    for (Eigen::Index l = 0; l < Eigen::Index(cfg.n_subcarriers); ++l) k.block(l * nv, l * nv, nv, nv) = f;
    return k;
}

// ---------------------------------------------------------------------------
// Symplectic transform: X_tf = F_{N_l} (F_{N_nu}^H X_dd)^T

inline TimeFrequencyGrid dsft_forward(const DelayDopplerGrid& x, const FrameConfig& cfg) {
    detail::require_dim(x.matches(cfg), "dsft_forward: grid shape does not match frame");
    CMat t = x.data;
    detail::dft_columns(t, true);
    CMat tf = t.transpose();
    detail::dft_columns(tf, false);
    return TimeFrequencyGrid(std::move(tf));
}

inline DelayDopplerGrid dsft_inverse(const TimeFrequencyGrid& y, const FrameConfig& cfg) {
    detail::require_dim(y.matches(cfg), "dsft_inverse: grid shape does not match frame");
    CMat t = y.data;
    detail::dft_columns(t, true);
    CMat dd = t.transpose();
    detail::dft_columns(dd, false);
    return DelayDopplerGrid(std::move(dd));
}

// ---------------------------------------------------------------------------
// Cyclic prefix, one per OFDM symbol of N_l samples.

inline TimeSignal cp_add(const TimeSignal& x, const FrameConfig& cfg) {
    detail::require_dim(!x.has_cp && x.matches(cfg), "cp_add: expected a CP-free frame");
    const auto nl = Eigen::Index(cfg.n_subcarriers), cp = Eigen::Index(cfg.cp_len);
    TimeSignal out{CVec(Eigen::Index(cfg.frame_len_with_cp())), true};
    for (Eigen::Index n = 0; n < Eigen::Index(cfg.n_doppler_bins); ++n) {
        auto dst = out.data.segment(n * (nl + cp), nl + cp);
        auto src = x.data.segment(n * nl, nl);
        // cp may exceed nl in odd configs; wrap around the symbol.
        for (Eigen::Index c = 0; c < cp; ++c) dst[c] = src[((nl - cp + c) % nl + nl) % nl];
        dst.tail(nl) = src;
    }
    return out;
}

inline TimeSignal cp_remove(const TimeSignal& y, const FrameConfig& cfg) {
    detail::require_dim(y.has_cp && y.matches(cfg), "cp_remove: expected a frame with CP");
    const auto nl = Eigen::Index(cfg.n_subcarriers), cp = Eigen::Index(cfg.cp_len);
    TimeSignal out{CVec(Eigen::Index(cfg.size())), false};
    for (Eigen::Index n = 0; n < Eigen::Index(cfg.n_doppler_bins); ++n)
        out.data.segment(n * nl, nl) = y.data.segment(n * (nl + cp) + cp, nl);
    return out;
}

inline TimeSignal strip_cp_if_present(const TimeSignal& y, const FrameConfig& cfg) {
    detail::require_dim(y.matches(cfg), "time signal length does not match frame");
    return y.has_cp ? cp_remove(y, cfg) : y;
}

// ---------------------------------------------------------------------------
// Modulator and demodulator

// Full chain: 2-D DSFT, extended IFFT, reorder, CP.
inline TimeSignal otfs_modulate(const DelayDopplerGrid& x, const FrameConfig& cfg) {
    const CVec x_kn = vectorize(dsft_forward(x, cfg));
    const CVec x_t = extended_fft_apply(x_kn, cfg, true);
    return cp_add(TimeSignal{reorder_indices(cfg).apply(x_t), false}, cfg);
}

// Simplified chain: x_t = Xi (I (x) F_{N_nu}^H) x_dd, then CP.
inline TimeSignal otfs_modulate_fast(const DelayDopplerGrid& x, const FrameConfig& cfg) {
    detail::require_dim(x.matches(cfg), "otfs_modulate_fast: grid shape does not match frame");
    const CVec spread = doppler_dft_apply(vectorize(x), cfg, true);
    return cp_add(TimeSignal{reorder_indices(cfg).apply(spread), false}, cfg);
}

// y_kn = F_bar Xi^T y_t; exposed for the frequency-domain equalizer.
inline TimeFrequencyGrid tf_stage(const TimeSignal& y, const FrameConfig& cfg) {
    const TimeSignal s = strip_cp_if_present(y, cfg);
    return devectorize_tf(extended_fft_apply(reorder_indices(cfg).apply_transpose(s.data), cfg, false), cfg);
}

// Full chain inverse: Xi^T, extended FFT, inverse DSFT.
inline DelayDopplerGrid otfs_demodulate_full(const TimeSignal& y, const FrameConfig& cfg) {
    return dsft_inverse(tf_stage(y, cfg), cfg);
}

// Simplified: y_dd = (I (x) F_{N_nu}) Xi^T y_t.
inline DelayDopplerGrid otfs_demodulate(const TimeSignal& y, const FrameConfig& cfg) {
    const TimeSignal s = strip_cp_if_present(y, cfg);
    return devectorize_dd(doppler_dft_apply(reorder_indices(cfg).apply_transpose(s.data), cfg, false), cfg);
}

// Plain OFDM: one unitary IDFT per symbol, then CP.
inline TimeSignal ofdm_modulate(const TimeFrequencyGrid& x, const FrameConfig& cfg) {
    detail::require_dim(x.matches(cfg), "ofdm_modulate: grid shape does not match frame");
    CMat t = x.data;
    detail::dft_columns(t, true);
    return cp_add(TimeSignal{vectorize(t), false}, cfg);
}

// ---------------------------------------------------------------------------
// Dense operators bracketed in the equivalent-channel composition:
//   H_eq = P1 P0 H_tl Q0 Q1

struct ComposedOperators {
    CMat p1;  // (I (x) F_{N_nu}) F_bar^H
    CMat p0;  // F_bar Xi^T
    CMat q0;  // Xi F_bar^H
    CMat q1;  // F_bar (I (x) F_{N_nu}^H)
};

inline ComposedOperators composed_operators(const FrameConfig& cfg) {
    const CMat fb = extended_fft_matrix(cfg);
    const CMat xi = reorder_indices(cfg).dense().cast<cd>();
    ComposedOperators ops;
    ops.p1 = doppler_dft_matrix(cfg, false) * fb.adjoint();
    ops.p0 = fb * xi.transpose();
    ops.q0 = xi * fb.adjoint();
    ops.q1 = fb * doppler_dft_matrix(cfg, true);
    return ops;
}

} // namespace otfs
