// SPDX-License-Identifier: Apache-2.0
//
// Two-stage OTFS receiver and the baselines it is compared against.
//
// Stage one is a per-subcarrier, per-symbol single-tap equalizer applied to
// the time-frequency observation. Stage two works on the delay-Doppler
// vector: a matched filter with the equivalent channel, minus the
// interference rebuilt from the hard decisions of stage one,
//
//     x_hat = H_eq^H y_dd - R_bar slice(y_fde_dd),
//
// where R_bar is H_eq^H H_eq with its diagonal and low-power entries removed.
#pragma once

#include "otfs/channel.hpp"
#include "otfs/errors.hpp"
#include "otfs/frame.hpp"
#include "otfs/transforms.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <optional>
#include <string_view>

namespace otfs {

enum class FdeMode {
    paper,  // G = H* / (|H| + gamma)
    mmse,   // G = H* / (|H|^2 + gamma)
};

inline std::string_view to_string(FdeMode m) { return m == FdeMode::paper ? "paper" : "mmse"; }

struct FdeCoefficients {
    CMat g;  // N_l x N_nu
    double gamma_fd = 0.0;
};

// gamma defaults to the noise variance.
inline FdeCoefficients fde_build(const CMat& cfr, double noise_var, FdeMode mode,
                                 std::optional<double> gamma = std::nullopt) {
    const double gm = gamma.value_or(noise_var);
    if (!(gm >= 0.0)) throw ConfigError("fde_build: regularizer must be non-negative");
    FdeCoefficients c{CMat(cfr.rows(), cfr.cols()), gm};
    for (Eigen::Index i = 0; i < cfr.size(); ++i) {
        const cd h = cfr(i);
        const double den = (mode == FdeMode::paper ? std::abs(h) : std::norm(h)) + gm;
        c.g(i) = den > 0.0 ? std::conj(h) / den : cd{};
    }
    return c;
}

inline TimeFrequencyGrid fde_apply(const TimeFrequencyGrid& y, const FdeCoefficients& c) {
    detail::require_dim(y.data.rows() == c.g.rows() && y.data.cols() == c.g.cols(),
                        "fde_apply: coefficient shape does not match grid");
    return TimeFrequencyGrid(y.data.cwiseProduct(c.g));
}

inline DelayDopplerGrid fde_to_dd(const TimeFrequencyGrid& y_eq, const FrameConfig& cfg) {
    return dsft_inverse(y_eq, cfg);
}

// ---------------------------------------------------------------------------
// Delay-Doppler interference cancellation

struct CancellationMatrix {
    SpMat r_bar;      // off-diagonal, clipped R_HH
    CVec r_diag;      // diagonal of R_HH
    double clip_threshold = 0.0;
};

inline CancellationMatrix dde_build(const SpMat& h_eq, double clip_threshold) {
    detail::require_dim(h_eq.rows() == h_eq.cols(), "dde_build: equivalent channel must be square");
    if (!(clip_threshold >= 0.0 && clip_threshold <= 1.0))
        throw ConfigError("dde_build: clip_threshold must lie in [0, 1]");
    const SpMat r = SpMat(h_eq.adjoint()) * h_eq;

    double max_off = 0.0;
    for (Eigen::Index k = 0; k < r.outerSize(); ++k)
        for (SpMat::InnerIterator it(r, k); it; ++it)
            if (it.row() != it.col()) max_off = std::max(max_off, std::abs(it.value()));

    CancellationMatrix cm;
    cm.clip_threshold = clip_threshold;
    cm.r_diag = r.diagonal();
    const double floor = clip_threshold * max_off;
    std::vector<Eigen::Triplet<cd>> keep;
    for (Eigen::Index k = 0; k < r.outerSize(); ++k)
        for (SpMat::InnerIterator it(r, k); it; ++it)
            if (it.row() != it.col() && std::abs(it.value()) >= floor && it.value() != cd{})
                keep.emplace_back(it.row(), it.col(), it.value());
    cm.r_bar.resize(r.rows(), r.cols());
    cm.r_bar.setFromTriplets(keep.begin(), keep.end());
    return cm;
}

inline CancellationMatrix dde_build(const CMat& h_eq, double clip_threshold) {
    return dde_build(SpMat(h_eq.sparseView()), clip_threshold);
}

struct DdeOptions {
    // Divide entry m by Re(R_HH(m, m)) before slicing. Decision-invariant for
    // QPSK; keeps soft outputs on the constellation scale.
    bool post_scale = true;
};

inline DelayDopplerGrid dde_equalize(const DelayDopplerGrid& y_dd, const DelayDopplerGrid& y_fde_dd, const SpMat& h_eq,
                                     const CancellationMatrix& cm, const DdeOptions& opt = {}) {
    const Eigen::Index n = h_eq.rows();
    detail::require_dim(y_dd.data.size() == n && y_fde_dd.data.size() == n && cm.r_bar.rows() == n &&
                            h_eq.cols() == n && y_dd.data.rows() == y_fde_dd.data.rows(),
                        "dde_equalize: shapes are inconsistent");
    const CVec decisions = qpsk_slice(vectorize(y_fde_dd)).points;
    CVec x = h_eq.adjoint() * vectorize(y_dd);
    x -= cm.r_bar * decisions;
    if (opt.post_scale)
        for (Eigen::Index m = 0; m < n; ++m)
            if (cm.r_diag[m].real() > 0.0) x[m] /= cm.r_diag[m].real();
    return DelayDopplerGrid(devectorize(x, y_dd.data.rows(), y_dd.data.cols()));
}

inline DelayDopplerGrid dde_equalize(const DelayDopplerGrid& y_dd, const DelayDopplerGrid& y_fde_dd, const CMat& h_eq,
                                     const CancellationMatrix& cm, const DdeOptions& opt = {}) {
    return dde_equalize(y_dd, y_fde_dd, SpMat(h_eq.sparseView()), cm, opt);
}

// ---------------------------------------------------------------------------
// Baselines

// Plain OFDM frame, one complex tap per subcarrier and symbol.
inline BitStream ofdm_single_tap(const TimeFrequencyGrid& y_tf, const CMat& cfr, double noise_var) {
    detail::require_dim(y_tf.data.rows() == cfr.rows() && y_tf.data.cols() == cfr.cols(),
                        "ofdm_single_tap: CFR shape does not match grid");
    const auto g = fde_build(cfr, noise_var, FdeMode::mmse);
    return qpsk_slice(vectorize(fde_apply(y_tf, g))).bits;
}

// x_hat = (H^H H + s I)^-1 H^H y. With s = 0 the system is solved directly
// and a singular H is reported.
inline CVec full_mmse(const CMat& h, const CVec& y, double noise_var) {
    detail::require_dim(h.rows() == h.cols() && h.rows() == y.size(), "full_mmse: shapes are inconsistent");
    if (!(noise_var >= 0.0)) throw ConfigError("full_mmse: noise variance must be non-negative");
    if (noise_var == 0.0) {
        Eigen::FullPivLU<CMat> lu(h);
        if (!lu.isInvertible()) throw SingularMatrixError("full_mmse: channel matrix is singular");
        return lu.solve(y);
    }
    CMat a = h.adjoint() * h;
    a.diagonal().array() += noise_var;
    Eigen::LLT<CMat> llt(a);
    if (llt.info() != Eigen::Success) throw SingularMatrixError("full_mmse: regularized system is not positive definite");
    return llt.solve(h.adjoint() * y);
}

inline CVec full_mmse(const SpMat& h, const CVec& y, double noise_var) {
    detail::require_dim(h.rows() == h.cols() && h.rows() == y.size(), "full_mmse: shapes are inconsistent");
    if (!(noise_var >= 0.0)) throw ConfigError("full_mmse: noise variance must be non-negative");
    if (noise_var == 0.0) {
        Eigen::SparseLU<SpMat> lu;
        lu.compute(h);
        if (lu.info() != Eigen::Success) throw SingularMatrixError("full_mmse: channel matrix is singular");
        return lu.solve(y);
    }
    SpMat a = SpMat(h.adjoint()) * h;
    SpMat reg(a.rows(), a.cols());
    reg.setIdentity();
    a += noise_var * reg;
    Eigen::SimplicialLDLT<SpMat> ldlt;
    ldlt.compute(a);
    if (ldlt.info() != Eigen::Success) throw SingularMatrixError("full_mmse: regularized system factorization failed");
    return ldlt.solve(SpMat(h.adjoint()) * y);
}

} // namespace otfs
