// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
#include "otfs/otfs.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace otfs;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

double rel_fro(const CMat& a, const CMat& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

CMat random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    std::normal_distribution<double> nd;
    CMat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = cd(nd(rng), nd(rng));
    return m;
}

// ---------------------------------------------------------------------------

Outcome equivalent_channel_oracles() {
    const FrameConfig f = fig1_preset().frame;
    const auto n = Eigen::Index(f.size());
    double worst = 0.0;
    for (double fd : {0.0, 6000.0}) {
        const auto cir = generate_cir(fig1_preset().profile, fd, f, 2024);
        const CMat h_tl = build_time_channel_matrix(cir, f);
        const CMat composed = build_equivalent_channel(h_tl, f, EquivalentMode::full);
        const CMat simplified = build_equivalent_channel(h_tl, f, EquivalentMode::simplified);
        CMat oracle(n, n);
        for (Eigen::Index c = 0; c < n; ++c) {
            CVec e = CVec::Zero(n);
            e[c] = 1.0;
            const auto rx = apply_channel(otfs_modulate(devectorize_dd(e, f), f), cir, f, kInf, 0);
            oracle.col(c) = vectorize(otfs_demodulate_full(rx, f));
        }
        worst = std::max({worst, rel_fro(composed, simplified), rel_fro(composed, oracle), rel_fro(simplified, oracle)});
    }
    return {worst < 1e-10, fmt("max pairwise rel. Frobenius %.2e", worst)};
}

Outcome band_confinement() {
    const auto p = fig1_preset();
    const auto& f = p.frame;
    const auto nv = Eigen::Index(f.n_doppler_bins), nl = Eigen::Index(f.n_subcarriers);
    const auto taps = Eigen::Index(f.max_delay_taps);
    bool ok = true;
    std::string detail;
    for (double fd : {0.0, 1000.0, 3000.0, 6000.0}) {
        const CMat h = equivalent_channel(generate_cir(p.profile, fd, f, 77), f);
        const auto band = band_support(h, f, 1e-12);
        double in_band_off = 0.0;  // largest off-diagonal entry inside the band
        for (Eigen::Index r = 0; r < h.rows(); ++r)
            for (Eigen::Index c = 0; c < h.cols(); ++c) {
                const Eigen::Index off = ((r / nv - c / nv) % nl + nl) % nl;
                if (r != c && off < taps) in_band_off = std::max(in_band_off, std::abs(h(r, c)));
            }
        // Doppler spread only: off-diagonal entries inside the same-delay blocks
        double ici = 0.0;
        for (Eigen::Index r = 0; r < h.rows(); ++r)
            for (Eigen::Index c = 0; c < h.cols(); ++c)
                if (r != c && r / nv == c / nv) ici = std::max(ici, std::abs(h(r, c)));
        const bool here = band.max_out_of_band < 1e-12 && band.band_width <= std::size_t(nv * (taps + 1)) &&
                          (fd == 0.0 || in_band_off > 1e-3);
        ok = ok && here;
        detail += fmt("fd=%g: out-of-band %.1e, width %g, ICI %.2e; ", fd, band.max_out_of_band,
                      double(band.band_width), ici);
    }
    return {ok, detail};
}

Outcome lti_exactness() {
    auto cfg = desk_preset();
    cfg.equalizers = {Equalizer::otfs_fde};
    cfg.fde_mode = FdeMode::mmse;
    Rng rng(31337);
    std::uniform_int_distribution<std::size_t> n_taps(1, cfg.frame.max_delay_taps);
    std::uniform_int_distribution<std::size_t> delay(0, cfg.frame.max_delay_taps - 1);
    std::uniform_real_distribution<double> power(-20.0, 0.0);
    std::size_t errors = 0, bits = 0;
    for (std::size_t t = 0; t < 100; ++t) {
        TapProfile prof;
        const std::size_t k = n_taps(rng);
        for (std::size_t i = 0; i < k; ++i) {
            prof.delays.push_back(delay(rng));
            prof.powers_db.push_back(power(rng));
        }
        prof.normalize();
        cfg.profile = prof;
        const auto r = run_trial(cfg, kInf, 0.0, derive_trial_seed(11, 0, 0, t));
        errors += r.bit_errors[0];
        bits += r.bits;
    }
    return {errors == 0, fmt("%g bit errors in %g bits", double(errors), double(bits))};
}

Outcome awgn_calibration() {
    ExperimentConfig c;
    c.frame = FrameConfig{64, 16, 1, 0, 64 * 78.125e3, 5.8e9};
    c.profile = TapProfile{{0}, {0.0}, true, false};
    c.snr_db_list = {8.0};
    c.doppler_hz_list = {0.0};
    c.equalizers = {Equalizer::otfs_fde};
    c.n_trials = 250;
    const auto rec = run_sweep(c).at(0);
    const double theory = 0.5 * std::erfc(std::sqrt(std::pow(10.0, 0.8)) / std::sqrt(2.0));
    const double rel = std::abs(rec.ber - theory) / theory;
    return {rec.bits >= 500000 && rel < 0.1,
            fmt("BER %.4e vs Q-function %.4e over %g bits (rel. error %.3f)", rec.ber, theory, double(rec.bits), rel)};
}

Outcome genie_cancellation() {
    const auto p = desk_preset();
    const auto& f = p.frame;
    Rng rng(5);
    double worst = 0.0;
    std::size_t symbol_errors = 0;
    for (std::uint64_t t = 0; t < 5; ++t) {
        const SpMat h = equivalent_channel_sparse(generate_cir(p.profile, 6000.0, f, 900 + t), f);
        const DelayDopplerGrid x = qpsk_map(random_bits(bits_per_frame(f), rng), f);
        const DelayDopplerGrid y(devectorize_dd(h * vectorize(x), f));
        const auto cm = dde_build(h, 0.0);
        const CVec out = vectorize(dde_equalize(y, x, h, cm, DdeOptions{false}));
        const CVec expect = cm.r_diag.cwiseProduct(vectorize(x));
        worst = std::max(worst, (out - expect).cwiseAbs().maxCoeff());
        const CVec decided = qpsk_slice(out).points;
        for (Eigen::Index i = 0; i < decided.size(); ++i) symbol_errors += decided[i] != vectorize(x)[i];
    }
    return {worst < 1e-10 && symbol_errors == 0,
            fmt("max |out - diag(R) x| %.2e, %g symbol errors", worst, double(symbol_errors))};
}

// Lower 2.5% bootstrap quantile of mean(b - a) over paired samples.
double paired_bootstrap_lower(const std::vector<double>& a, const std::vector<double>& b, std::uint64_t seed) {
    const std::size_t n = a.size();
    std::vector<double> diff(n), means(2000);
    for (std::size_t i = 0; i < n; ++i) diff[i] = b[i] - a[i];
    Rng rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += diff[pick(rng)];
        m = s / double(n);
    }
    std::sort(means.begin(), means.end());
    return means[std::size_t(0.025 * double(means.size()))];
}

Outcome equalizer_ordering() {
    auto cfg = desk_preset();
    cfg.equalizers = {Equalizer::ofdm_single_tap, Equalizer::otfs_fde, Equalizer::otfs_fde_dde, Equalizer::otfs_full_mmse};
    const std::size_t trials = 500;
    const double snr = 20.0, fd = 6000.0;
    std::vector<std::vector<double>> ber(cfg.equalizers.size(), std::vector<double>(trials));
    parallel_for(trials, 0, [&](std::size_t t) {
        const auto r = run_trial(cfg, snr, fd, derive_trial_seed(cfg.base_seed, 0, 0, t));
        for (std::size_t e = 0; e < r.bit_errors.size(); ++e) ber[e][t] = double(r.bit_errors[e]) / double(r.bits);
    });
    auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / double(v.size()); };
    const double ofdm = mean(ber[0]), fde = mean(ber[1]), dde = mean(ber[2]), mmse = mean(ber[3]);
    const double lo_fde_ofdm = paired_bootstrap_lower(ber[1], ber[0], 1);
    const double lo_dde_fde = paired_bootstrap_lower(ber[2], ber[1], 2);
    const bool ok = mmse <= dde && lo_dde_fde > 0.0 && lo_fde_ofdm > 0.0;
    return {ok, fmt("mean BER full_mmse %.2e <= fde_dde %.2e < fde %.2e < ofdm_single_tap %.2e", mmse, dde, fde, ofdm) +
                    fmt("; bootstrap lower bounds %.2e, %.2e", lo_dde_fde, lo_fde_ofdm)};
}

Outcome sweep_determinism() {
    auto cfg = desk_preset();
    cfg.snr_db_list = {10, 20};
    cfg.doppler_hz_list = {0, 6000};
    cfg.n_trials = 6;
    const auto dir = std::filesystem::temp_directory_path() / "otfs_acceptance";
    std::filesystem::create_directories(dir);
    std::vector<std::string> files;
    for (std::size_t t : {1, 2, 4, 1}) {
        cfg.threads = t;
        const auto path = (dir / ("sweep_" + std::to_string(files.size()) + ".csv")).string();
        emit_csv(run_sweep(cfg), path);
        std::ifstream is(path, std::ios::binary);
        files.emplace_back(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
    }
    const bool same = std::all_of(files.begin(), files.end(), [&](const std::string& s) { return s == files[0]; });
    return {same && !files[0].empty(), fmt("%g runs at 1/2/4/1 threads, %g bytes each", double(files.size()),
                                           double(files[0].size()))};
}

Outcome transform_suite() {
    double worst = 0.0;
    auto track = [&](double v) { worst = std::max(worst, v); };
    Rng rng(8);
    for (auto [nl, nv] : {std::pair<std::size_t, std::size_t>{4, 2}, {8, 4}, {16, 8}}) {
        FrameConfig f{nl, nv, 3, 2, double(nl) * 78.125e3, 5.8e9};
        const auto n = Eigen::Index(f.size());
        const CMat eye = CMat::Identity(n, n);

        for (std::size_t k : {nl, nv}) {
            const CMat d = dft_matrix(k);
            track((d.adjoint() * d - CMat::Identity(Eigen::Index(k), Eigen::Index(k))).cwiseAbs().maxCoeff());
        }
        const CMat fb = extended_fft_matrix(f);
        track((fb.adjoint() * fb - eye).cwiseAbs().maxCoeff());

        const auto xi = reorder_indices(f);
        std::vector<std::size_t> sorted = xi.indices();
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i)
            if (sorted[i] != i) track(1.0);
        const Eigen::MatrixXd p = xi.dense();
        track((p.transpose() * p - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());

        // every basis vector through both modulators, then random frames
        for (Eigen::Index c = 0; c < n; ++c) {
            CVec e = CVec::Zero(n);
            e[c] = 1.0;
            const auto dd = devectorize_dd(e, f);
            track((otfs_modulate(dd, f).data - otfs_modulate_fast(dd, f).data).cwiseAbs().maxCoeff());
        }
        for (int t = 0; t < 100; ++t) {
            const DelayDopplerGrid x(random_matrix(Eigen::Index(nv), Eigen::Index(nl), rng));
            const TimeSignal full = otfs_modulate(x, f);
            track((full.data - otfs_modulate_fast(x, f).data).cwiseAbs().maxCoeff());
            const double e_dd = x.data.squaredNorm();
            track(std::abs(dsft_forward(x, f).data.squaredNorm() - e_dd) / e_dd);
            track(std::abs(cp_remove(full, f).data.squaredNorm() - e_dd) / e_dd);
            track((otfs_demodulate(full, f).data - x.data).cwiseAbs().maxCoeff());
            track((otfs_demodulate_full(full, f).data - x.data).cwiseAbs().maxCoeff());
        }
    }
    return {worst < 1e-12, fmt("max deviation %.2e over 4x2, 8x4, 16x8", worst)};
}

} // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "equivalent-channel constructions agree", 5, equivalent_channel_oracles},
        {2, "band confinement under Doppler", 60, band_confinement},
        {3, "LTI exactness of the FDE", 120, lti_exactness},
        {4, "AWGN calibration", 60, awgn_calibration},
        {5, "genie cancellation identity", 60, genie_cancellation},
        {6, "equalizer ordering at 6 kHz Doppler", 600, equalizer_ordering},
        {7, "sweep determinism across thread counts", 120, sweep_determinism},
        {8, "transform suite", 10, transform_suite},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_s) {
            o.pass = false;
            o.detail += fmt(" [over time budget of %gs]", c.budget_s);
        }
        failures += !o.pass;
        std::printf("%s criterion %d: %s (%.1fs) %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
