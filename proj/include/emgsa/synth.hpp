/*
 * Copyright 2026 The emgsa Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "emgsa/common.hpp"
#include "emgsa/dataset.hpp"
#include "emgsa/features.hpp"
#include "emgsa/rng.hpp"

namespace emgsa {

// Acquisition constants of the emulated protocol.
inline constexpr int kChannels = 8;
inline constexpr int kGestures = 4;
inline constexpr int kSamplesPerWindow = 800;
inline constexpr int kSamplingRateHz = 2000;

/// Per-subject signal model. `mixing` emulates electrode placement shift by
/// leaking energy into circularly adjacent channels; `channel_gains` emulate
/// skin/contact impedance differences; `activation` holds per-gesture
/// per-channel amplitude (mV) before mixing.
struct SubjectModel {
    int subject_id = 0;
    Vector channel_gains;  // 8, strictly positive
    Matrix mixing;         // 8x8 row-stochastic, mass on diagonal and neighbors
    Matrix activation;     // 4x8, nonnegative amplitudes
    double noise_floor = 0.02;
};

/// Cohort generator knobs. The three variability knobs are calibrated so that
/// the default cohort shows a large intra/cross accuracy gap that subspace
/// alignment can partially close; `scripts/calibrate.sh` reruns the grid.
struct CohortConfig {
    int n_subjects = 14;
    int windows_per_gesture = 150;
    double gain_spread = 1.0;
    double shift_strength = 0.5;
    double activation_jitter = 0.15;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_subjects < 1) throw ArgumentError("cohort config: n_subjects must be >= 1");
        if (windows_per_gesture < 1) throw ArgumentError("cohort config: windows_per_gesture must be >= 1");
        if (!(gain_spread >= 0.0)) throw ArgumentError("cohort config: gain_spread must be >= 0");
        if (!(shift_strength >= 0.0 && shift_strength <= 1.0))
            throw ArgumentError("cohort config: shift_strength must be in [0, 1]");
        if (!(activation_jitter >= 0.0)) throw ArgumentError("cohort config: activation_jitter must be >= 0");
    }
};

/// Flat key=value serialization of CohortConfig.
inline std::string serialize_cohort_config(const CohortConfig& c) {
    std::string s;
    s += "n_subjects=" + std::to_string(c.n_subjects) + "\n";
    s += "windows_per_gesture=" + std::to_string(c.windows_per_gesture) + "\n";
    s += "gain_spread=" + detail::format_double(c.gain_spread) + "\n";
    s += "shift_strength=" + detail::format_double(c.shift_strength) + "\n";
    s += "activation_jitter=" + detail::format_double(c.activation_jitter) + "\n";
    s += "seed=" + std::to_string(c.seed) + "\n";
    return s;
}

inline CohortConfig parse_cohort_config(const std::string& text) {
    CohortConfig c;
    std::size_t pos = 0;
    long line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("cohort config line " + std::to_string(line_no) + ": expected key=value");
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        const std::string where = "cohort config line " + std::to_string(line_no);
        if (key == "n_subjects")
            c.n_subjects = static_cast<int>(detail::parse_int(value, where));
        else if (key == "windows_per_gesture")
            c.windows_per_gesture = static_cast<int>(detail::parse_int(value, where));
        else if (key == "gain_spread")
            c.gain_spread = detail::parse_double(value, where);
        else if (key == "shift_strength")
            c.shift_strength = detail::parse_double(value, where);
        else if (key == "activation_jitter")
            c.activation_jitter = detail::parse_double(value, where);
        else if (key == "seed")
            c.seed = static_cast<std::uint64_t>(detail::parse_int(value, where));
        else
            throw FormatError(where + ": unknown key '" + key + "'");
    }
    c.validate();
    return c;
}

namespace detail {

inline constexpr std::uint64_t kTagBasePattern = 0x62617365ULL;  // "base"
inline constexpr std::uint64_t kTagSubject = 0x73756266ULL;      // "subj"
inline constexpr std::uint64_t kTagWindow = 0x77696e64ULL;       // "wind"

inline int circular_distance(int a, int b, int m) {
    const int d = std::abs(a - b) % m;
    return std::min(d, m - d);
}

inline double circular_distance(double a, double b, int m) {
    double d = std::fmod(std::abs(a - b), static_cast<double>(m));
    return std::min(d, m - d);
}

/// Shared per-cohort gesture activation template (mV). Gesture bumps sit on
/// neighboring positions of the electrode ring (1.3 channels apart, closer
/// than the electrode pitch), with a broad antagonist bump on the opposite
/// side and a seeded +-15% texture. Overlapping bumps keep each subject's
/// gestures separable while letting electrode shifts alias one subject's
/// gesture onto another's neighbor.
inline Matrix base_activation_pattern(std::uint64_t cohort_seed) {
    Rng rng(derive_seed(cohort_seed, {kTagBasePattern}));
    Matrix base(kGestures, kChannels);
    for (int g = 0; g < kGestures; ++g) {
        const double primary = 1.3 * g + 0.4;
        const double secondary = primary + 4.0;
        for (int c = 0; c < kChannels; ++c) {
            const double dp = circular_distance(static_cast<double>(c), primary, kChannels);
            const double ds = circular_distance(static_cast<double>(c), secondary, kChannels);
            double amp = 0.05 + 0.85 * std::exp(-dp * dp / (2.0 * 0.8 * 0.8)) +
                         0.35 * std::exp(-ds * ds / (2.0 * 1.6 * 1.6));
            amp *= 1.0 + 0.15 * rng.normal();
            base(g, c) = std::max(amp, 0.02);
        }
    }
    return base;
}

}  // namespace detail

/// Deterministic function of (config.seed, subject_id). Draw order is fixed:
/// 32 activation-jitter normals, 8 gain draws, 1 electrode-shift draw.
inline SubjectModel sample_subject_model(const CohortConfig& config, int subject_id) {
    config.validate();
    if (subject_id < 0 || subject_id >= config.n_subjects) {
        throw ArgumentError("sample_subject_model: subject " + std::to_string(subject_id) + " out of range [0, " +
                            std::to_string(config.n_subjects) + ")");
    }
    const Matrix base = detail::base_activation_pattern(config.seed);
    Rng rng(derive_seed(config.seed, {detail::kTagSubject, static_cast<std::uint64_t>(subject_id)}));

    SubjectModel m;
    m.subject_id = subject_id;
    m.noise_floor = 0.02;

    m.activation.resize(kGestures, kChannels);
    for (int g = 0; g < kGestures; ++g) {
        for (int c = 0; c < kChannels; ++c) {
            const double jitter = std::max(1.0 + config.activation_jitter * rng.normal(), 0.05);
            m.activation(g, c) = base(g, c) * jitter;
        }
    }

    // Log-uniform in [1/(1+spread), 1+spread]; spread 0 gives exactly 1.
    m.channel_gains.resize(kChannels);
    const double log_span = std::log1p(config.gain_spread);
    for (int c = 0; c < kChannels; ++c) m.channel_gains(c) = std::exp(rng.uniform(-log_span, log_span));

    // Electrode placement shift: the whole array rotates by the same fraction
    // of a channel pitch, so every row leaks the same share of energy to the
    // same-side neighbor. mixing = (1 - f) I + f S_dir with f <= shift_strength.
    m.mixing = Matrix::Zero(kChannels, kChannels);
    const double u = rng.uniform(-1.0, 1.0);
    const double fraction = config.shift_strength * std::abs(u);
    const int direction = u >= 0.0 ? 1 : kChannels - 1;
    for (int c = 0; c < kChannels; ++c) {
        m.mixing(c, c) = 1.0 - fraction;
        m.mixing(c, (c + direction) % kChannels) += fraction;
    }
    return m;
}

namespace detail {

// Bandpass FIR used for the EMG surrogate: difference of a 2-tap and a 50-tap
// moving average. At 2000 Hz this passes roughly 20-450 Hz and blocks DC.
// Taps: h0 = h1 = 1/2 - 1/50, h2..h49 = -1/50; sum h^2 = 0.48, so the output
// is scaled by 1/sqrt(0.48) to restore unit variance for white input.
inline constexpr int kFirLong = 50;
inline const double kFirInvGain = 1.0 / std::sqrt(0.48);

inline std::vector<double> bandlimited_noise(Rng& rng, double sigma, int n) {
    const int raw_n = n + kFirLong - 1;
    std::vector<double> raw(static_cast<std::size_t>(raw_n));
    for (auto& v : raw) v = rng.normal();
    std::vector<double> out(static_cast<std::size_t>(n));
    double rolling = 0.0;
    for (int t = 0; t < kFirLong; ++t) rolling += raw[static_cast<std::size_t>(t)];
    const double scale = sigma * kFirInvGain;
    for (int t = kFirLong - 1; t < raw_n; ++t) {
        if (t >= kFirLong) rolling += raw[static_cast<std::size_t>(t)] - raw[static_cast<std::size_t>(t - kFirLong)];
        const double ma2 = 0.5 * (raw[static_cast<std::size_t>(t)] + raw[static_cast<std::size_t>(t - 1)]);
        const double ma50 = rolling / kFirLong;
        out[static_cast<std::size_t>(t - (kFirLong - 1))] = scale * (ma2 - ma50);
    }
    return out;
}

}  // namespace detail

/// One synthetic window: per pre-mix channel c, zero-mean band-limited noise
/// with standard deviation activation(gesture, c) + noise_floor; channels are
/// then combined by `mixing` and scaled by `channel_gains`. Samples are
/// quantized to float32 precision, matching the on-disk formats.
inline EmgWindow generate_window(const SubjectModel& model, int gesture, std::uint64_t seed) {
    if (gesture < 0 || gesture >= kGestures) {
        throw ArgumentError("generate_window: gesture " + std::to_string(gesture) + " out of range");
    }
    Rng rng(seed);
    Matrix pre(kChannels, kSamplesPerWindow);
    for (int c = 0; c < kChannels; ++c) {
        const double sigma = model.activation(gesture, c) + model.noise_floor;
        const auto noise = detail::bandlimited_noise(rng, sigma, kSamplesPerWindow);
        for (int t = 0; t < kSamplesPerWindow; ++t) pre(c, t) = noise[static_cast<std::size_t>(t)];
    }
    EmgWindow w;
    w.subject_id = model.subject_id;
    w.gesture = gesture;
    w.samples = model.channel_gains.asDiagonal() * (model.mixing * pre);
    for (Eigen::Index i = 0; i < w.samples.size(); ++i) {
        w.samples.data()[i] = detail::to_sample_grid(w.samples.data()[i]);
    }
    return w;
}

namespace detail {

inline std::uint64_t window_seed(const CohortConfig& config, int subject, int gesture, int index) {
    return derive_seed(config.seed, {kTagWindow, static_cast<std::uint64_t>(subject),
                                     static_cast<std::uint64_t>(gesture), static_cast<std::uint64_t>(index)});
}

}  // namespace detail

/// Full cohort: n_subjects x 4 gestures x windows_per_gesture windows, ordered
/// subject-major then gesture then window index. Per-window seeds are hashed
/// from (seed, subject, gesture, index), so generation order does not matter.
inline Dataset generate_cohort(const CohortConfig& config) {
    config.validate();
    Dataset d;
    d.channels = kChannels;
    d.samples_per_window = kSamplesPerWindow;
    d.sampling_rate_hz = kSamplingRateHz;
    d.windows.reserve(static_cast<std::size_t>(config.n_subjects) * kGestures *
                      static_cast<std::size_t>(config.windows_per_gesture));
    for (int s = 0; s < config.n_subjects; ++s) {
        const SubjectModel model = sample_subject_model(config, s);
        for (int g = 0; g < kGestures; ++g) {
            for (int i = 0; i < config.windows_per_gesture; ++i) {
                d.windows.push_back(generate_window(model, g, detail::window_seed(config, s, g, i)));
            }
        }
    }
    return d;
}

/// Cohort features without materializing the raw windows; identical to
/// extract_matrix(generate_cohort(config), fc) row for row.
inline FeatureMatrix synth_feature_matrix(const CohortConfig& config, const FeatureConfig& fc = {}) {
    config.validate();
    fc.validate();
    const std::size_t n = static_cast<std::size_t>(config.n_subjects) * kGestures *
                          static_cast<std::size_t>(config.windows_per_gesture);
    FeatureMatrix m;
    m.values.resize(static_cast<Eigen::Index>(n), kChannels * kFeaturesPerChannel);
    m.labels.reserve(n);
    m.subjects.reserve(n);
    Eigen::Index row = 0;
    for (int s = 0; s < config.n_subjects; ++s) {
        const SubjectModel model = sample_subject_model(config, s);
        for (int g = 0; g < kGestures; ++g) {
            for (int i = 0; i < config.windows_per_gesture; ++i) {
                const EmgWindow w = generate_window(model, g, detail::window_seed(config, s, g, i));
                m.values.row(row++) = extract_features(w, fc).transpose();
                m.labels.push_back(g);
                m.subjects.push_back(s);
            }
        }
    }
    return m;
}

}  // namespace emgsa
