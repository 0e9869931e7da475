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

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "emgsa/binary_io.hpp"
#include "emgsa/common.hpp"
#include "emgsa/rng.hpp"

namespace emgsa {

/// One labeled acquisition window: `channels` rows by `samples_per_window`
/// columns of raw EMG, in millivolts. Sample values carry float32 precision
/// (both on-disk formats store them as such), so save/load round-trips are
/// value-exact.
struct EmgWindow {
    int subject_id = 0;
    int gesture = 0;
    Matrix samples;  // channels x samples_per_window

    bool operator==(const EmgWindow& o) const {
        return subject_id == o.subject_id && gesture == o.gesture && samples.rows() == o.samples.rows() &&
               samples.cols() == o.samples.cols() && samples == o.samples;
    }
};

/// A cohort of labeled windows. Subject ids are contiguous 0..S-1 after any
/// load (original ids are remapped in ascending order).
struct Dataset {
    int channels = 8;
    int samples_per_window = 800;
    int sampling_rate_hz = 2000;
    std::vector<std::string> gesture_names = {"thumb", "index", "middle", "little"};
    std::vector<EmgWindow> windows;

    int subject_count() const {
        int s = 0;
        for (const auto& w : windows) s = std::max(s, w.subject_id + 1);
        return s;
    }

    bool operator==(const Dataset& o) const {
        return channels == o.channels && samples_per_window == o.samples_per_window &&
               sampling_rate_hz == o.sampling_rate_hz && gesture_names == o.gesture_names && windows == o.windows;
    }

    /// Checks the structural invariants; throws DataError naming the first
    /// offending window.
    void validate() const {
        for (std::size_t i = 0; i < windows.size(); ++i) {
            const auto& w = windows[i];
            if (w.samples.rows() != channels || w.samples.cols() != samples_per_window) {
                throw DataError("window " + std::to_string(i) + ": shape " + std::to_string(w.samples.rows()) + "x" +
                                std::to_string(w.samples.cols()) + " does not match dataset " +
                                std::to_string(channels) + "x" + std::to_string(samples_per_window));
            }
            if (w.gesture < 0 || w.gesture >= static_cast<int>(gesture_names.size())) {
                throw DataError("window " + std::to_string(i) + ": gesture " + std::to_string(w.gesture) +
                                " out of range");
            }
            if (!w.samples.allFinite()) {
                throw DataError("window " + std::to_string(i) + ": non-finite sample value");
            }
        }
    }
};

/// Engineered-feature rows with per-row gesture labels and subject ids.
struct FeatureMatrix {
    Matrix values;  // n_samples x n_features
    std::vector<int> labels;
    std::vector<int> subjects;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }

    FeatureMatrix take_rows(const std::vector<int>& idx) const {
        FeatureMatrix out;
        out.values.resize(static_cast<Eigen::Index>(idx.size()), values.cols());
        out.labels.reserve(idx.size());
        out.subjects.reserve(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.values.row(static_cast<Eigen::Index>(i)) = values.row(idx[i]);
            out.labels.push_back(labels[static_cast<std::size_t>(idx[i])]);
            out.subjects.push_back(subjects[static_cast<std::size_t>(idx[i])]);
        }
        return out;
    }

    /// Same values, labels replaced by a sentinel. Used by the cross-subject
    /// harness to withhold target labels from every fitting path.
    FeatureMatrix without_labels() const {
        FeatureMatrix out = *this;
        std::fill(out.labels.begin(), out.labels.end(), -1);
        return out;
    }

    void check_consistent() const {
        if (static_cast<Eigen::Index>(labels.size()) != values.rows() ||
            static_cast<Eigen::Index>(subjects.size()) != values.rows()) {
            throw DataError("feature matrix: labels/subjects length does not match row count");
        }
    }
};

enum class FileFormat { binary, csv };

namespace detail {

inline std::string format_float(float v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& field, const std::string& where) {
    double v = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw FormatError(where + ": cannot parse number '" + field + "'");
    }
    return v;
}

inline long parse_int(const std::string& field, const std::string& where) {
    long v = 0;
    auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw FormatError(where + ": cannot parse integer '" + field + "'");
    }
    return v;
}

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

// Quantize to the float32 grid; the canonical precision of sample values.
inline double to_sample_grid(double v) { return static_cast<double>(static_cast<float>(v)); }

/// Remap subject ids to contiguous 0-based integers, ascending original order.
inline void remap_subjects(Dataset& d) {
    std::map<int, int> remap;
    for (const auto& w : d.windows) remap.emplace(w.subject_id, 0);
    int next = 0;
    for (auto& [orig, mapped] : remap) mapped = next++;
    for (auto& w : d.windows) w.subject_id = remap.at(w.subject_id);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Binary dataset format, little-endian:
//   magic "EMGW" | u16 version=1 | u8 channels | u16 samples_per_window |
//   u32 n_windows | per window: u16 subject_id, u8 gesture,
//   channels*samples_per_window float32 in channel-major order.
// ---------------------------------------------------------------------------

inline void save_dataset_binary(const Dataset& d, const std::string& path) {
    detail::ByteWriter w(path);
    w.bytes("EMGW", 4);
    w.u16(1);
    w.u8(static_cast<std::uint8_t>(d.channels));
    w.u16(static_cast<std::uint16_t>(d.samples_per_window));
    w.u32(static_cast<std::uint32_t>(d.windows.size()));
    for (const auto& win : d.windows) {
        w.u16(static_cast<std::uint16_t>(win.subject_id));
        w.u8(static_cast<std::uint8_t>(win.gesture));
        for (int c = 0; c < d.channels; ++c)
            for (int t = 0; t < d.samples_per_window; ++t) w.f32(static_cast<float>(win.samples(c, t)));
    }
    w.close();
}

inline Dataset load_dataset_binary(const std::string& path) {
    detail::ByteReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != "EMGW") {
        throw FormatError("'" + path + "': bad magic at byte offset 0 (expected \"EMGW\")");
    }
    const std::uint16_t version = r.u16();
    if (version != 1) {
        throw FormatError("'" + path + "': unsupported format version " + std::to_string(version) +
                          " at byte offset 4");
    }
    Dataset d;
    d.channels = r.u8();
    d.samples_per_window = r.u16();
    if (d.channels < 1 || d.samples_per_window < 1) {
        throw FormatError("'" + path + "': invalid dimensions in header (channels=" + std::to_string(d.channels) +
                          ", samples_per_window=" + std::to_string(d.samples_per_window) + ") at byte offset 6");
    }
    const std::uint32_t n_windows = r.u32();
    d.windows.reserve(n_windows);
    for (std::uint32_t i = 0; i < n_windows; ++i) {
        EmgWindow win;
        win.subject_id = r.u16();
        win.gesture = r.u8();
        win.samples.resize(d.channels, d.samples_per_window);
        for (int c = 0; c < d.channels; ++c) {
            for (int t = 0; t < d.samples_per_window; ++t) {
                const float v = r.f32();
                if (!std::isfinite(v)) {
                    throw DataError("'" + path + "': non-finite sample in window " + std::to_string(i) +
                                    " (channel " + std::to_string(c) + ", sample " + std::to_string(t) + ")");
                }
                win.samples(c, t) = static_cast<double>(v);
            }
        }
        d.windows.push_back(std::move(win));
    }
    if (!r.at_eof()) {
        throw FormatError("'" + path + "': trailing bytes after window " + std::to_string(n_windows - 1) +
                          " at byte offset " + std::to_string(r.offset()));
    }
    detail::remap_subjects(d);
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------
// CSV dataset format: header `subject,gesture,channel,s0,...,s{N-1}`, one line
// per (window, channel); consecutive groups of `channels` lines with the
// channel column counting 0..channels-1 form one window.
// ---------------------------------------------------------------------------

inline void save_dataset_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "subject,gesture,channel";
    for (int t = 0; t < d.samples_per_window; ++t) out << ",s" << t;
    out << "\n";
    for (const auto& win : d.windows) {
        for (int c = 0; c < d.channels; ++c) {
            out << win.subject_id << ',' << win.gesture << ',' << c;
            for (int t = 0; t < d.samples_per_window; ++t) {
                out << ',' << detail::format_float(static_cast<float>(win.samples(c, t)));
            }
            out << "\n";
        }
    }
    if (!out) throw FormatError("write to '" + path + "' failed");
}

inline Dataset load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("'" + path + "': empty file");
    auto header = detail::split_line(line);
    if (header.size() < 4 || header[0] != "subject" || header[1] != "gesture" || header[2] != "channel") {
        throw FormatError("'" + path + "': line 1: expected header subject,gesture,channel,s0,...");
    }
    Dataset d;
    d.samples_per_window = static_cast<int>(header.size()) - 3;
    d.channels = 0;  // inferred from the first window group
    d.windows.clear();

    long line_no = 1;
    EmgWindow current;
    std::vector<Vector> channel_rows;
    int expected_channel = 0;
    bool first_group_done = false;

    auto flush_window = [&]() {
        if (channel_rows.empty()) return;
        if (!first_group_done) {
            d.channels = static_cast<int>(channel_rows.size());
            first_group_done = true;
        } else if (static_cast<int>(channel_rows.size()) != d.channels) {
            throw FormatError("'" + path + "': line " + std::to_string(line_no) + ": window has " +
                              std::to_string(channel_rows.size()) + " channel rows, expected " +
                              std::to_string(d.channels));
        }
        current.samples.resize(static_cast<Eigen::Index>(channel_rows.size()), d.samples_per_window);
        for (std::size_t c = 0; c < channel_rows.size(); ++c) current.samples.row(static_cast<Eigen::Index>(c)) = channel_rows[c];
        d.windows.push_back(current);
        channel_rows.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "'" + path + "': line " + std::to_string(line_no);
        auto fields = detail::split_line(line);
        if (fields.size() != header.size()) {
            throw FormatError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        }
        const int subject = static_cast<int>(detail::parse_int(fields[0], where));
        const int gesture = static_cast<int>(detail::parse_int(fields[1], where));
        const int channel = static_cast<int>(detail::parse_int(fields[2], where));
        if (channel == 0) {
            flush_window();
            expected_channel = 0;
            current.subject_id = subject;
            current.gesture = gesture;
        } else if (channel != expected_channel || subject != current.subject_id || gesture != current.gesture) {
            throw FormatError(where + ": channel rows out of order (got channel " + std::to_string(channel) +
                              ", expected " + std::to_string(expected_channel) + ")");
        }
        ++expected_channel;
        Vector row(d.samples_per_window);
        for (int t = 0; t < d.samples_per_window; ++t) {
            const double v = detail::to_sample_grid(detail::parse_double(fields[static_cast<std::size_t>(t) + 3], where));
            if (!std::isfinite(v)) {
                throw DataError(where + ": non-finite sample in window " + std::to_string(d.windows.size()));
            }
            row(t) = v;
        }
        channel_rows.push_back(std::move(row));
    }
    flush_window();
    detail::remap_subjects(d);
    d.validate();
    return d;
}

inline void save_dataset(const Dataset& d, const std::string& path, FileFormat format) {
    if (format == FileFormat::binary)
        save_dataset_binary(d, path);
    else
        save_dataset_csv(d, path);
}

inline Dataset load_dataset(const std::string& path, FileFormat format) {
    return format == FileFormat::binary ? load_dataset_binary(path) : load_dataset_csv(path);
}

/// Sniffs the binary magic to pick a loader.
inline Dataset load_dataset_auto(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw FormatError("cannot open '" + path + "' for reading");
    char magic[4] = {0, 0, 0, 0};
    probe.read(magic, 4);
    probe.close();
    return std::string(magic, 4) == "EMGW" ? load_dataset_binary(path) : load_dataset_csv(path);
}

// ---------------------------------------------------------------------------
// FeatureMatrix CSV: header `subject,gesture,f0,...,f{d-1}`, one row per
// sample, doubles printed shortest-round-trip.
// ---------------------------------------------------------------------------

inline void save_features_csv(const FeatureMatrix& m, const std::string& path) {
    m.check_consistent();
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "subject,gesture";
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ",f" << j;
    out << "\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out << m.subjects[static_cast<std::size_t>(i)] << ',' << m.labels[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < m.cols(); ++j) out << ',' << detail::format_double(m.values(i, j));
        out << "\n";
    }
    if (!out) throw FormatError("write to '" + path + "' failed");
}

inline FeatureMatrix load_features_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open '" + path + "' for reading");
    std::string line;
    if (!std::getline(in, line)) throw FormatError("'" + path + "': empty file");
    auto header = detail::split_line(line);
    if (header.size() < 3 || header[0] != "subject" || header[1] != "gesture") {
        throw FormatError("'" + path + "': line 1: expected header subject,gesture,f0,...");
    }
    const std::size_t n_features = header.size() - 2;
    std::vector<std::array<int, 2>> meta;
    std::vector<double> data;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "'" + path + "': line " + std::to_string(line_no);
        auto fields = detail::split_line(line);
        if (fields.size() != header.size()) {
            throw FormatError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        }
        meta.push_back({static_cast<int>(detail::parse_int(fields[0], where)),
                        static_cast<int>(detail::parse_int(fields[1], where))});
        for (std::size_t j = 0; j < n_features; ++j) {
            const double v = detail::parse_double(fields[j + 2], where);
            if (!std::isfinite(v)) throw DataError(where + ": non-finite feature value");
            data.push_back(v);
        }
    }
    FeatureMatrix m;
    m.values.resize(static_cast<Eigen::Index>(meta.size()), static_cast<Eigen::Index>(n_features));
    for (std::size_t i = 0; i < meta.size(); ++i) {
        m.subjects.push_back(meta[i][0]);
        m.labels.push_back(meta[i][1]);
        for (std::size_t j = 0; j < n_features; ++j)
            m.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data[i * n_features + j];
    }
    return m;
}

// ---------------------------------------------------------------------------
// Row normalization and splitting primitives.
// ---------------------------------------------------------------------------

/// Scales every row to unit Euclidean norm; all-zero rows pass through
/// unchanged. Idempotent.
inline FeatureMatrix l2_normalize_rows(const FeatureMatrix& x) {
    FeatureMatrix out = x;
    for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
        const double norm = out.values.row(i).norm();
        if (norm > 0.0) out.values.row(i) /= norm;
    }
    return out;
}

/// Leave-one-subject-out split: (rows of all other subjects, rows of
/// target_subject), row order preserved within each part.
inline std::pair<FeatureMatrix, FeatureMatrix> split_loso(const FeatureMatrix& x, int target_subject) {
    x.check_consistent();
    std::vector<int> src_idx, tgt_idx;
    for (std::size_t i = 0; i < x.subjects.size(); ++i) {
        (x.subjects[i] == target_subject ? tgt_idx : src_idx).push_back(static_cast<int>(i));
    }
    if (tgt_idx.empty()) {
        throw ArgumentError("split_loso: subject " + std::to_string(target_subject) + " not present");
    }
    return {x.take_rows(src_idx), x.take_rows(tgt_idx)};
}

struct Fold {
    std::vector<int> train;
    std::vector<int> test;
};

/// k-fold assignment over labels.size() samples. Stratified mode deals each
/// class's shuffled indices across folds with a rotating remainder offset, so
/// fold sizes still differ by at most one globally. Deterministic in seed.
inline std::vector<Fold> kfold_indices(const std::vector<int>& labels, int k, std::uint64_t seed,
                                       bool stratified = true) {
    const int n = static_cast<int>(labels.size());
    if (k < 2 || k > n) {
        throw ArgumentError("kfold_indices: k=" + std::to_string(k) + " out of range for n=" + std::to_string(n));
    }
    Rng rng(derive_seed(seed, {0x6b666f6cULL}));  // "kfol"
    std::vector<std::vector<int>> test_sets(static_cast<std::size_t>(k));

    std::map<int, std::vector<int>> by_class;
    if (stratified) {
        for (int i = 0; i < n; ++i) by_class[labels[static_cast<std::size_t>(i)]].push_back(i);
    } else {
        auto& all = by_class[0];
        for (int i = 0; i < n; ++i) all.push_back(i);
    }

    int offset = 0;
    for (auto& [cls, idx] : by_class) {
        rng.shuffle(idx);
        const int m = static_cast<int>(idx.size());
        const int base = m / k;
        const int rem = m % k;
        int pos = 0;
        for (int f = 0; f < k; ++f) {
            const bool extra = ((f - offset) % k + k) % k < rem;
            const int take = base + (extra ? 1 : 0);
            for (int t = 0; t < take; ++t) test_sets[static_cast<std::size_t>(f)].push_back(idx[static_cast<std::size_t>(pos++)]);
        }
        offset = (offset + rem) % k;
    }

    std::vector<Fold> folds(static_cast<std::size_t>(k));
    std::vector<char> in_test(static_cast<std::size_t>(n));
    for (int f = 0; f < k; ++f) {
        auto& test = test_sets[static_cast<std::size_t>(f)];
        std::sort(test.begin(), test.end());
        std::fill(in_test.begin(), in_test.end(), 0);
        for (int i : test) in_test[static_cast<std::size_t>(i)] = 1;
        auto& fold = folds[static_cast<std::size_t>(f)];
        fold.test = test;
        fold.train.reserve(static_cast<std::size_t>(n - static_cast<int>(test.size())));
        for (int i = 0; i < n; ++i)
            if (!in_test[static_cast<std::size_t>(i)]) fold.train.push_back(i);
    }
    return folds;
}

}  // namespace emgsa
