// SPDX-License-Identifier: Apache-2.0
//
// Monte-Carlo BER harness. Every trial draws one bit frame, one channel
// realization and one noise vector; all enabled receivers consume that same
// realization so their error counts are paired.
#pragma once

#include "otfs/channel.hpp"
#include "otfs/equalizers.hpp"
#include "otfs/errors.hpp"
#include "otfs/frame.hpp"
#include "otfs/random.hpp"
#include "otfs/transforms.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace otfs {

enum class Equalizer { ofdm_single_tap, ofdm_full_mmse, otfs_fde, otfs_fde_dde, otfs_full_mmse };

inline constexpr std::array<Equalizer, 5> kAllEqualizers{Equalizer::ofdm_single_tap, Equalizer::ofdm_full_mmse,
                                                         Equalizer::otfs_fde, Equalizer::otfs_fde_dde,
                                                         Equalizer::otfs_full_mmse};

inline std::string_view to_string(Equalizer e) {
    switch (e) {
    case Equalizer::ofdm_single_tap: return "ofdm_single_tap";
    case Equalizer::ofdm_full_mmse: return "ofdm_full_mmse";
    case Equalizer::otfs_fde: return "otfs_fde";
    case Equalizer::otfs_fde_dde: return "otfs_fde_dde";
    case Equalizer::otfs_full_mmse: return "otfs_full_mmse";
    }
    return "?";
}

inline Equalizer parse_equalizer(std::string_view s) {
    for (auto e : kAllEqualizers)
        if (to_string(e) == s) return e;
    throw ConfigError("unknown equalizer '" + std::string(s) + "'");
}

// Which delay-Doppler observation feeds the matched filter of the second stage.
enum class DdeInput { raw, fde };

struct ExperimentConfig {
    FrameConfig frame;
    TapProfile profile;
    std::vector<double> snr_db_list{20.0};
    std::vector<double> doppler_hz_list{0.0};
    std::size_t n_trials = 100;
    std::uint64_t base_seed = 1;
    std::vector<Equalizer> equalizers{kAllEqualizers.begin(), kAllEqualizers.end()};
    FdeMode fde_mode = FdeMode::mmse;
    std::optional<double> gamma_fd;  // defaults to the noise variance
    double clip_threshold = 0.02;
    std::size_t dde_iterations = 1;
    bool dde_post_scale = true;
    DdeInput dde_input = DdeInput::raw;
    std::size_t threads = 0;  // 0: hardware concurrency

    void validate() const {
        frame.validate();
        profile.validate(frame);
        if (snr_db_list.empty()) throw ConfigError("snr_db_list must not be empty");
        if (doppler_hz_list.empty()) throw ConfigError("doppler_hz_list must not be empty");
        if (equalizers.empty()) throw ConfigError("equalizers must not be empty");
        if (n_trials == 0) throw ConfigError("n_trials must be at least 1");
        if (dde_iterations == 0) throw ConfigError("dde_iterations must be at least 1");
        if (!(clip_threshold >= 0.0 && clip_threshold <= 1.0)) throw ConfigError("clip_threshold must lie in [0, 1]");
        if (gamma_fd && !(*gamma_fd >= 0.0)) throw ConfigError("gamma_fd must be non-negative");
        for (double s : snr_db_list)
            if (std::isnan(s)) throw ConfigError("snr_db_list contains NaN");
        for (double d : doppler_hz_list)
            if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError("doppler_hz_list entries must be non-negative");
    }
};

// ---------------------------------------------------------------------------
// Presets

// 64 x 16 frame at 78.125 kHz spacing with a TU6 profile compressed to 8 taps.
inline ExperimentConfig desk_preset() {
    ExperimentConfig c;
    c.frame = FrameConfig{64, 16, 8, 8, 64 * 78.125e3, 5.8e9};
    c.profile = scaled_tu6(c.frame.sample_rate, c.frame.max_delay_taps - 1);
    c.snr_db_list = {0, 5, 10, 15, 20, 25, 30};
    c.doppler_hz_list = {6000};
    c.n_trials = 100;
    return c;
}

// 512 x 16 frame at 40 MHz with the unscaled TU6 profile. The CP is 256
// samples (6.4 us) because 5.12 us is not an integer number of samples.
inline ExperimentConfig table2_preset() {
    ExperimentConfig c;
    c.frame = FrameConfig{512, 16, 201, 256, 40e6, 5.8e9};
    c.profile = TapProfile::from_microseconds(tu6_delays_us(), tu6_powers_db(), c.frame.sample_rate);
    c.snr_db_list = {0, 5, 10, 15, 20, 25, 30};
    c.doppler_hz_list = {6000};
    c.n_trials = 5000;
    return c;
}

// The 8 x 4 frame with three delay taps used to visualize H_eq.
inline ExperimentConfig fig1_preset() {
    ExperimentConfig c;
    c.frame = FrameConfig{8, 4, 3, 2, 8 * 78.125e3, 5.8e9};
    c.profile = scaled_tu6(c.frame.sample_rate, c.frame.max_delay_taps - 1);
    c.snr_db_list = {20};
    c.doppler_hz_list = {6000};
    c.n_trials = 100;
    return c;
}

inline ExperimentConfig preset(std::string_view name) {
    if (name == "desk") return desk_preset();
    if (name == "table2") return table2_preset();
    if (name == "fig1") return fig1_preset();
    throw ConfigError("unknown preset '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// One trial

inline std::uint64_t derive_trial_seed(std::uint64_t base, std::size_t snr_idx, std::size_t doppler_idx,
                                       std::size_t trial) {
    return derive_seed(base, {snr_idx, doppler_idx, trial});
}

struct TrialRealization {
    BitStream bits;
    TimeVaryingCir cir;
    SpMat h_tl;
    CVec noise;  // added after H_tl, identical for every receiver
    double noise_var = 0.0;
};

inline TrialRealization realize_trial(const ExperimentConfig& cfg, double snr_db, double doppler_hz,
                                      std::uint64_t seed) {
    TrialRealization r;
    Rng bit_rng(derive_seed(seed, {0}));
    r.bits = random_bits(bits_per_frame(cfg.frame), bit_rng);
    r.cir = generate_cir(cfg.profile, doppler_hz, cfg.frame, derive_seed(seed, {1}));
    r.h_tl = time_channel_sparse(r.cir, cfg.frame);
    r.noise_var = noise_variance_from_snr(snr_db);
    r.noise = awgn(cfg.frame.size(), r.noise_var, derive_seed(seed, {2}));
    return r;
}

// Lazily computed receiver-side quantities shared by the equalizers of one trial.
class TrialWorkspace {
public:
    TrialWorkspace(const ExperimentConfig& cfg, const TrialRealization& r) : cfg_(cfg), r_(r) {}

    const ExperimentConfig& config() const { return cfg_; }
    const TrialRealization& realization() const { return r_; }

    // Received time samples after CP removal: H_tl x + n.
    CVec receive(const CVec& x_t) const { return r_.h_tl * x_t + r_.noise; }

    const CMat& cfr() {
        if (!cfr_) cfr_ = cfr_from_cir(r_.cir, cfg_.frame);
        return *cfr_;
    }

    const SpMat& h_eq() {
        if (!h_eq_) h_eq_ = equivalent_channel_sparse(r_.cir, cfg_.frame);
        return *h_eq_;
    }

    struct Otfs {
        DelayDopplerGrid y_dd;
        TimeFrequencyGrid y_tf;
    };

    const Otfs& otfs() {
        if (!otfs_) {
            const auto& f = cfg_.frame;
            const TimeSignal tx = cp_remove(otfs_modulate_fast(qpsk_map(r_.bits, f), f), f);
            const TimeSignal rx{receive(tx.data), false};
            otfs_ = Otfs{otfs_demodulate(rx, f), tf_stage(rx, f)};
        }
        return *otfs_;
    }

    const TimeFrequencyGrid& ofdm_rx() {
        if (!ofdm_) {
            const auto& f = cfg_.frame;
            const TimeSignal tx = cp_remove(ofdm_modulate(devectorize_tf(qpsk_symbols(r_.bits), f), f), f);
            ofdm_ = tf_stage(TimeSignal{receive(tx.data), false}, f);
        }
        return *ofdm_;
    }

    const DelayDopplerGrid& fde_output() {
        if (!fde_) {
            const auto g = fde_build(cfr(), r_.noise_var, cfg_.fde_mode, cfg_.gamma_fd);
            fde_ = fde_to_dd(fde_apply(otfs().y_tf, g), cfg_.frame);
        }
        return *fde_;
    }

private:
    const ExperimentConfig& cfg_;
    const TrialRealization& r_;
    std::optional<CMat> cfr_;
    std::optional<SpMat> h_eq_;
    std::optional<Otfs> otfs_;
    std::optional<TimeFrequencyGrid> ofdm_;
    std::optional<DelayDopplerGrid> fde_;
};

inline BitStream detect(Equalizer eq, TrialWorkspace& ws) {
    const auto& cfg = ws.config();
    const auto& r = ws.realization();
    const auto& f = cfg.frame;
    switch (eq) {
    case Equalizer::ofdm_single_tap:
        return ofdm_single_tap(ws.ofdm_rx(), ws.cfr(), r.noise_var);
    case Equalizer::ofdm_full_mmse: {
        const auto& y = ws.ofdm_rx();
        CVec est(Eigen::Index(f.size()));
        const auto nl = Eigen::Index(f.n_subcarriers);
        for (std::size_t n = 0; n < f.n_doppler_bins; ++n)
            est.segment(Eigen::Index(n) * nl, nl) =
                full_mmse(symbol_frequency_matrix(r.h_tl, n, f), y.data.col(Eigen::Index(n)), r.noise_var);
        return qpsk_slice(est).bits;
    }
    case Equalizer::otfs_fde:
        return qpsk_slice(vectorize(ws.fde_output())).bits;
    case Equalizer::otfs_fde_dde: {
        const auto cm = dde_build(ws.h_eq(), cfg.clip_threshold);
        const DdeOptions opt{cfg.dde_post_scale};
        DelayDopplerGrid estimate = ws.fde_output();
        for (std::size_t it = 0; it < cfg.dde_iterations; ++it) {
            const auto& observed = cfg.dde_input == DdeInput::raw ? ws.otfs().y_dd : ws.fde_output();
            estimate = dde_equalize(observed, estimate, ws.h_eq(), cm, opt);
        }
        return qpsk_slice(vectorize(estimate)).bits;
    }
    case Equalizer::otfs_full_mmse:
        return qpsk_slice(full_mmse(ws.h_eq(), vectorize(ws.otfs().y_dd), r.noise_var)).bits;
    }
    throw ConfigError("unhandled equalizer");
}

// A receiver under test: maps one trial realization to its bit decisions.
using DetectorFn = std::function<BitStream(TrialWorkspace&)>;

struct TrialResult {
    std::vector<std::size_t> bit_errors;  // one per detector, in order
    std::size_t bits = 0;
};

inline TrialResult run_trial_with(const ExperimentConfig& cfg, double snr_db, double doppler_hz, std::uint64_t seed,
                                  const std::vector<DetectorFn>& detectors) {
    const TrialRealization r = realize_trial(cfg, snr_db, doppler_hz, seed);
    TrialWorkspace ws(cfg, r);
    TrialResult out;
    out.bits = r.bits.size();
    for (const auto& d : detectors) out.bit_errors.push_back(count_bit_errors(d(ws), r.bits));
    return out;
}

// Error counts for cfg.equalizers, in that order.
inline TrialResult run_trial(const ExperimentConfig& cfg, double snr_db, double doppler_hz, std::uint64_t seed) {
    std::vector<DetectorFn> d;
    for (auto e : cfg.equalizers) d.emplace_back([e](TrialWorkspace& ws) { return detect(e, ws); });
    return run_trial_with(cfg, snr_db, doppler_hz, seed, d);
}

// ---------------------------------------------------------------------------
// Sweeps

struct BerRecord {
    std::string equalizer;
    double snr_db = 0.0;
    double doppler_hz = 0.0;
    std::uint64_t frames = 0;
    std::uint64_t bits = 0;
    std::uint64_t bit_errors = 0;
    double ber = 0.0;
    std::uint64_t seed = 0;

    bool operator==(const BerRecord&) const = default;
};

// Runs fn(0..count-1) on `threads` workers and rethrows the first failure.
inline void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, std::max<std::size_t>(count, 1));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lk(mu);
                if (!failure) failure = std::current_exception();
                next = count;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

inline std::vector<BerRecord> run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::size_t ns = cfg.snr_db_list.size(), nd = cfg.doppler_hz_list.size(), nt = cfg.n_trials;
    std::vector<TrialResult> results(ns * nd * nt);
    parallel_for(results.size(), cfg.threads, [&](std::size_t idx) {
        const std::size_t t = idx % nt, d = (idx / nt) % nd, s = idx / (nt * nd);
        results[idx] = run_trial(cfg, cfg.snr_db_list[s], cfg.doppler_hz_list[d], derive_trial_seed(cfg.base_seed, s, d, t));
    });

    std::vector<BerRecord> records;
    for (std::size_t s = 0; s < ns; ++s)
        for (std::size_t d = 0; d < nd; ++d)
            for (std::size_t e = 0; e < cfg.equalizers.size(); ++e) {
                BerRecord rec{std::string(to_string(cfg.equalizers[e])), cfg.snr_db_list[s], cfg.doppler_hz_list[d]};
                rec.seed = cfg.base_seed;
                for (std::size_t t = 0; t < nt; ++t) {
                    const auto& tr = results[(s * nd + d) * nt + t];
                    rec.frames += 1;
                    rec.bits += tr.bits;
                    rec.bit_errors += tr.bit_errors[e];
                }
                rec.ber = rec.bits ? double(rec.bit_errors) / double(rec.bits) : 0.0;
                records.push_back(std::move(rec));
            }
    std::stable_sort(records.begin(), records.end(), [](const BerRecord& a, const BerRecord& b) {
        if (a.equalizer != b.equalizer) return a.equalizer < b.equalizer;
        if (a.snr_db != b.snr_db) return a.snr_db < b.snr_db;
        return a.doppler_hz < b.doppler_hz;
    });
    return records;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr std::string_view kCsvHeader = "equalizer,snr_db,doppler_hz,frames,bits,bit_errors,ber,seed";

namespace detail {

template <typename T>
std::string format_number(T v) {
    std::array<char, 64> buf{};
    auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), p);
}

template <typename T>
T parse_number(std::string_view s, const std::string& what) {
    T v{};
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) throw std::runtime_error("csv: bad " + what + " '" + std::string(s) + "'");
    return v;
}

} // namespace detail

inline void write_csv(const std::vector<BerRecord>& records, std::ostream& os) {
    os << kCsvHeader << '\n';
    for (const auto& r : records)
        os << r.equalizer << ',' << detail::format_number(r.snr_db) << ',' << detail::format_number(r.doppler_hz) << ','
           << r.frames << ',' << r.bits << ',' << r.bit_errors << ',' << detail::format_number(r.ber) << ',' << r.seed
           << '\n';
}

inline void emit_csv(const std::vector<BerRecord>& records, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(records, os);
    os.flush();
    if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

inline std::vector<BerRecord> parse_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader) throw std::runtime_error("csv: missing or unexpected header");
    std::vector<BerRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string_view> f;
        std::string_view rest(line);
        for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1))
            f.push_back(rest.substr(0, pos));
        f.push_back(rest);
        if (f.size() != 8) throw std::runtime_error("csv: expected 8 columns, got " + std::to_string(f.size()));
        BerRecord r;
        r.equalizer = std::string(f[0]);
        r.snr_db = detail::parse_number<double>(f[1], "snr_db");
        r.doppler_hz = detail::parse_number<double>(f[2], "doppler_hz");
        r.frames = detail::parse_number<std::uint64_t>(f[3], "frames");
        r.bits = detail::parse_number<std::uint64_t>(f[4], "bits");
        r.bit_errors = detail::parse_number<std::uint64_t>(f[5], "bit_errors");
        r.ber = detail::parse_number<double>(f[6], "ber");
        r.seed = detail::parse_number<std::uint64_t>(f[7], "seed");
        out.push_back(std::move(r));
    }
    return out;
}

// Row-major |H_eq| grid.
inline void write_magnitude_csv(const CMat& m, std::ostream& os) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            if (j) os << ',';
            os << detail::format_number(std::abs(m(i, j)));
        }
        os << '\n';
    }
}

} // namespace otfs
