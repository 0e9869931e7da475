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
#include <string>
#include <vector>

#include "emgsa/common.hpp"
#include "emgsa/dataset.hpp"

namespace emgsa {

/// Thresholds for the two count features. Units match the sample values (mV).
struct FeatureConfig {
    double zc_threshold = 0.0;
    double wamp_threshold = 0.01;

    void validate() const {
        if (!(zc_threshold >= 0.0) || !std::isfinite(zc_threshold) || !(wamp_threshold >= 0.0) ||
            !std::isfinite(wamp_threshold)) {
            throw ArgumentError("feature thresholds must be finite and nonnegative");
        }
    }
};

inline constexpr int kFeaturesPerChannel = 7;

/// Feature order within each channel block. Column index = channel * 7 + feature.
inline const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {"mav", "rms", "wl", "zc", "wamp", "max", "iemg"};
    return names;
}

/// Seven time-domain features per channel, channel-major:
///   MAV  mean absolute value            (1/N) sum |x_i|
///   RMS  root mean square               sqrt((1/N) sum x_i^2)
///   WL   waveform length                sum_{i>=2} |x_i - x_{i-1}|
///   ZC   zero crossings                 #{i<N : x_i*x_{i+1} < 0 and |x_i - x_{i+1}| >= zc_threshold}
///   WAMP Wilson amplitude               #{i<N : |x_i - x_{i+1}| >= wamp_threshold}
///   MAX  maximum absolute amplitude     max |x_i|
///   IEMG integrated EMG                 sum |x_i|
/// Zero crossings use a strict sign change; exact zeros do not count.
inline Vector extract_features(const EmgWindow& w, const FeatureConfig& cfg = {}) {
    cfg.validate();
    const Eigen::Index channels = w.samples.rows();
    const Eigen::Index n = w.samples.cols();
    if (n < 1) throw DataError("extract_features: empty window");
    if (!w.samples.allFinite()) throw DataError("extract_features: non-finite sample value");

    Vector out(channels * kFeaturesPerChannel);
    for (Eigen::Index c = 0; c < channels; ++c) {
        double abs_sum = 0.0, sq_sum = 0.0, wl = 0.0, max_abs = 0.0;
        long zc = 0, wamp = 0;
        double prev = w.samples(c, 0);
        abs_sum = std::abs(prev);
        sq_sum = prev * prev;
        max_abs = std::abs(prev);
        for (Eigen::Index t = 1; t < n; ++t) {
            const double x = w.samples(c, t);
            const double a = std::abs(x);
            abs_sum += a;
            sq_sum += x * x;
            if (a > max_abs) max_abs = a;
            const double step = std::abs(x - prev);
            wl += step;
            if (prev * x < 0.0 && step >= cfg.zc_threshold) ++zc;
            if (step >= cfg.wamp_threshold) ++wamp;
            prev = x;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        double* f = out.data() + c * kFeaturesPerChannel;
        f[0] = abs_sum * inv_n;                   // MAV
        f[1] = std::sqrt(sq_sum * inv_n);         // RMS
        f[2] = wl;                                // WL
        f[3] = static_cast<double>(zc);           // ZC
        f[4] = static_cast<double>(wamp);         // WAMP
        f[5] = max_abs;                           // MAX
        f[6] = abs_sum;                           // IEMG
    }
    return out;
}

/// Feature matrix for a whole dataset; row i comes from window i.
inline FeatureMatrix extract_matrix(const Dataset& d, const FeatureConfig& cfg = {}) {
    cfg.validate();
    FeatureMatrix m;
    m.values.resize(static_cast<Eigen::Index>(d.windows.size()),
                    static_cast<Eigen::Index>(d.channels) * kFeaturesPerChannel);
    m.labels.reserve(d.windows.size());
    m.subjects.reserve(d.windows.size());
    for (std::size_t i = 0; i < d.windows.size(); ++i) {
        try {
            m.values.row(static_cast<Eigen::Index>(i)) = extract_features(d.windows[i], cfg).transpose();
        } catch (const DataError& e) {
            throw DataError("window " + std::to_string(i) + ": " + e.what());
        }
        m.labels.push_back(d.windows[i].gesture);
        m.subjects.push_back(d.windows[i].subject_id);
    }
    return m;
}

}  // namespace emgsa
