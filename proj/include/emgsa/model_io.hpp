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

// Versioned little-endian blob format for fitted models:
//   magic "EMGM" | u16 version=1 | u8 kind | payload.
// Matrices are stored as u32 rows, u32 cols, then float64 values row-major.

#include <string>
#include <vector>

#include "emgsa/adapt.hpp"
#include "emgsa/binary_io.hpp"
#include "emgsa/common.hpp"
#include "emgsa/mlp.hpp"

namespace emgsa {

namespace detail {

inline constexpr std::uint8_t kBlobSa = 1;
inline constexpr std::uint8_t kBlobCoral = 2;
inline constexpr std::uint8_t kBlobKliep = 3;
inline constexpr std::uint8_t kBlobMlp = 4;

inline void write_matrix(ByteWriter& w, const Matrix& m) {
    w.u32(static_cast<std::uint32_t>(m.rows()));
    w.u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) w.f64(m(i, j));
}

inline Matrix read_matrix(ByteReader& r) {
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Matrix m(rows, cols);
    for (std::uint32_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = r.f64();
    return m;
}

inline void write_vector(ByteWriter& w, const Vector& v) {
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) w.f64(v(i));
}

inline Vector read_vector(ByteReader& r) {
    const std::uint32_t n = r.u32();
    Vector v(n);
    for (std::uint32_t i = 0; i < n; ++i) v(i) = r.f64();
    return v;
}

inline ByteWriter open_blob(const std::string& path, std::uint8_t kind) {
    ByteWriter w(path);
    w.bytes("EMGM", 4);
    w.u16(1);
    w.u8(kind);
    return w;
}

inline ByteReader open_blob_for(const std::string& path, std::uint8_t kind) {
    ByteReader r(path);
    char magic[4];
    r.bytes(magic, 4);
    if (std::string(magic, 4) != "EMGM") {
        throw FormatError("'" + path + "': bad model magic at byte offset 0");
    }
    const std::uint16_t version = r.u16();
    if (version != 1) throw FormatError("'" + path + "': unsupported model version " + std::to_string(version));
    const std::uint8_t got = r.u8();
    if (got != kind) {
        throw FormatError("'" + path + "': model kind " + std::to_string(got) + " does not match expected " +
                          std::to_string(kind));
    }
    return r;
}

}  // namespace detail

inline void save_model(const SAModel& m, const std::string& path) {
    auto w = detail::open_blob(path, detail::kBlobSa);
    w.u8(m.l2_mode ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(m.dims));
    detail::write_matrix(w, m.source_basis);
    detail::write_matrix(w, m.target_basis);
    detail::write_matrix(w, m.alignment);
    detail::write_vector(w, m.source_center);
    detail::write_vector(w, m.target_center);
    w.close();
}

inline SAModel load_sa_model(const std::string& path) {
    auto r = detail::open_blob_for(path, detail::kBlobSa);
    SAModel m;
    m.l2_mode = r.u8() != 0;
    m.dims = static_cast<int>(r.u32());
    m.source_basis = detail::read_matrix(r);
    m.target_basis = detail::read_matrix(r);
    m.alignment = detail::read_matrix(r);
    m.source_center = detail::read_vector(r);
    m.target_center = detail::read_vector(r);
    return m;
}

inline void save_model(const CoralModel& m, const std::string& path) {
    auto w = detail::open_blob(path, detail::kBlobCoral);
    w.f64(m.lambda);
    detail::write_matrix(w, m.map);
    detail::write_vector(w, m.source_center);
    detail::write_vector(w, m.target_center);
    w.close();
}

inline CoralModel load_coral_model(const std::string& path) {
    auto r = detail::open_blob_for(path, detail::kBlobCoral);
    CoralModel m;
    m.lambda = r.f64();
    m.map = detail::read_matrix(r);
    m.source_center = detail::read_vector(r);
    m.target_center = detail::read_vector(r);
    return m;
}

inline void save_model(const KliepModel& m, const std::string& path) {
    auto w = detail::open_blob(path, detail::kBlobKliep);
    w.f64(m.sigma);
    detail::write_matrix(w, m.basis_centers);
    detail::write_vector(w, m.alpha);
    detail::write_vector(w, m.weights);
    w.close();
}

inline KliepModel load_kliep_model(const std::string& path) {
    auto r = detail::open_blob_for(path, detail::kBlobKliep);
    KliepModel m;
    m.sigma = r.f64();
    m.basis_centers = detail::read_matrix(r);
    m.alpha = detail::read_vector(r);
    m.weights = detail::read_vector(r);
    return m;
}

inline void save_model(const MlpModel& m, const std::string& path) {
    auto w = detail::open_blob(path, detail::kBlobMlp);
    w.u32(static_cast<std::uint32_t>(m.n_classes));
    w.u32(static_cast<std::uint32_t>(m.best_epoch));
    detail::write_matrix(w, m.w1);
    detail::write_vector(w, m.b1);
    detail::write_matrix(w, m.w2);
    detail::write_vector(w, m.b2);
    detail::write_vector(w, m.input_mean);
    detail::write_vector(w, m.input_std);
    w.u32(static_cast<std::uint32_t>(m.training_trace.size()));
    for (double v : m.training_trace) w.f64(v);
    w.close();
}

inline MlpModel load_mlp_model(const std::string& path) {
    auto r = detail::open_blob_for(path, detail::kBlobMlp);
    MlpModel m;
    m.n_classes = static_cast<int>(r.u32());
    m.best_epoch = static_cast<int>(r.u32());
    m.w1 = detail::read_matrix(r);
    m.b1 = detail::read_vector(r);
    m.w2 = detail::read_matrix(r);
    m.b2 = detail::read_vector(r);
    m.input_mean = detail::read_vector(r);
    m.input_std = detail::read_vector(r);
    const std::uint32_t n = r.u32();
    m.training_trace.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) m.training_trace[i] = r.f64();
    return m;
}

/// training_trace export: `epoch,val_accuracy`.
inline void save_training_trace_csv(const MlpModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "epoch,val_accuracy\n";
    for (std::size_t i = 0; i < m.training_trace.size(); ++i) {
        out << i << ',' << detail::format_double(m.training_trace[i]) << "\n";
    }
    if (!out) throw FormatError("write to '" + path + "' failed");
}

}  // namespace emgsa
