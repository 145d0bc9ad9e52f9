// SPDX-License-Identifier: Apache-2.0
//
// JSON configuration files. Every object rejects keys it does not know.
//
//   profile file:     {"delays_us": [...], "powers_db": [...], "fading": bool}
//   experiment file:  {"preset": "desk", "frame": {...}, "profile": {...} | "path.json",
//                      "snr_db_list": [...], "doppler_hz_list": [...], "n_trials": N,
//                      "base_seed": N, "equalizers": [...], "fde_mode": "paper" | "mmse",
//                      "gamma_fd": x, "clip_threshold": x, "dde_iterations": N,
//                      "dde_post_scale": bool, "dde_input": "raw" | "fde", "threads": N}
//
// Missing experiment fields keep the values of the preset (desk by default).
#pragma once

#include "otfs/channel.hpp"
#include "otfs/errors.hpp"
#include "otfs/harness.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

namespace otfs {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& j, std::initializer_list<std::string_view> known, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_as(const json& j, const std::string& where) {
    try {
        return j.get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

inline json read_json_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open '" + path.string() + "'");
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

} // namespace detail

inline TapProfile profile_from_json(const json& j, double sample_rate) {
    detail::reject_unknown_keys(j, {"delays_us", "powers_db", "fading"}, "profile");
    if (!j.contains("delays_us") || !j.contains("powers_db"))
        throw ConfigError("profile: delays_us and powers_db are required");
    auto p = TapProfile::from_microseconds(detail::get_as<std::vector<double>>(j["delays_us"], "profile.delays_us"),
                                           detail::get_as<std::vector<double>>(j["powers_db"], "profile.powers_db"),
                                           sample_rate);
    if (j.contains("fading")) p.fading = detail::get_as<bool>(j["fading"], "profile.fading");
    return p;
}

inline TapProfile load_profile(const std::filesystem::path& path, double sample_rate) {
    return profile_from_json(detail::read_json_file(path), sample_rate);
}

inline FrameConfig frame_from_json(const json& j, FrameConfig f) {
    detail::reject_unknown_keys(
        j, {"n_subcarriers", "n_doppler_bins", "max_delay_taps", "cp_len", "sample_rate", "carrier_freq"}, "frame");
    auto take = [&](const char* key, auto& dst) {
        if (j.contains(key)) dst = detail::get_as<std::decay_t<decltype(dst)>>(j[key], std::string("frame.") + key);
    };
    take("n_subcarriers", f.n_subcarriers);
    take("n_doppler_bins", f.n_doppler_bins);
    take("max_delay_taps", f.max_delay_taps);
    take("cp_len", f.cp_len);
    take("sample_rate", f.sample_rate);
    take("carrier_freq", f.carrier_freq);
    return f;
}

// base_dir resolves a profile given as a relative file path.
inline ExperimentConfig experiment_from_json(const json& j, ExperimentConfig base,
                                             const std::filesystem::path& base_dir = {}) {
    detail::reject_unknown_keys(j,
                                {"preset", "frame", "profile", "snr_db_list", "doppler_hz_list", "n_trials",
                                 "base_seed", "equalizers", "fde_mode", "gamma_fd", "clip_threshold",
                                 "dde_iterations", "dde_post_scale", "dde_input", "threads"},
                                "config");
    ExperimentConfig c = j.contains("preset") ? preset(detail::get_as<std::string>(j["preset"], "preset")) : std::move(base);
    const bool frame_changed = j.contains("frame");
    if (frame_changed) c.frame = frame_from_json(j["frame"], c.frame);

    if (j.contains("profile")) {
        const auto& p = j["profile"];
        if (p.is_string()) {
            std::filesystem::path path = p.get<std::string>();
            if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
            c.profile = load_profile(path, c.frame.sample_rate);
        } else {
            c.profile = profile_from_json(p, c.frame.sample_rate);
        }
    } else if (frame_changed) {
        // Preset profiles are expressed in samples of the preset frame.
        c.profile = scaled_tu6(c.frame.sample_rate, c.frame.max_delay_taps - 1);
    }

    auto take = [&](const char* key, auto& dst) {
        if (j.contains(key)) dst = detail::get_as<std::decay_t<decltype(dst)>>(j[key], key);
    };
    take("snr_db_list", c.snr_db_list);
    take("doppler_hz_list", c.doppler_hz_list);
    take("n_trials", c.n_trials);
    take("base_seed", c.base_seed);
    take("clip_threshold", c.clip_threshold);
    take("dde_iterations", c.dde_iterations);
    take("dde_post_scale", c.dde_post_scale);
    take("threads", c.threads);
    if (j.contains("gamma_fd")) c.gamma_fd = detail::get_as<double>(j["gamma_fd"], "gamma_fd");
    if (j.contains("equalizers")) {
        c.equalizers.clear();
        for (const auto& s : detail::get_as<std::vector<std::string>>(j["equalizers"], "equalizers"))
            c.equalizers.push_back(parse_equalizer(s));
    }
    if (j.contains("fde_mode")) {
        const auto m = detail::get_as<std::string>(j["fde_mode"], "fde_mode");
        if (m == "paper") c.fde_mode = FdeMode::paper;
        else if (m == "mmse") c.fde_mode = FdeMode::mmse;
        else throw ConfigError("fde_mode must be 'paper' or 'mmse'");
    }
    if (j.contains("dde_input")) {
        const auto m = detail::get_as<std::string>(j["dde_input"], "dde_input");
        if (m == "raw") c.dde_input = DdeInput::raw;
        else if (m == "fde") c.dde_input = DdeInput::fde;
        else throw ConfigError("dde_input must be 'raw' or 'fde'");
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path, ExperimentConfig base = desk_preset()) {
    return experiment_from_json(detail::read_json_file(path), std::move(base), path.parent_path());
}

} // namespace otfs
