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

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "emgsa/common.hpp"

// Little-endian binary readers/writers shared by the dataset and model blob
// formats. Values are assembled byte by byte, so the code is host-endianness
// independent.

namespace emgsa::detail {

class ByteWriter {
public:
    explicit ByteWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw FormatError("cannot open '" + path + "' for writing");
        path_ = path;
    }

    void u8(std::uint8_t v) { put(&v, 1); }
    void u16(std::uint16_t v) {
        std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
        put(b, 2);
    }
    void u32(std::uint32_t v) {
        std::uint8_t b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        put(b, 4);
    }
    void u64(std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
        put(b, 8);
    }
    void f32(float v) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void bytes(const char* data, std::size_t n) { put(data, n); }

    void close() {
        out_.close();
        if (!out_) throw FormatError("write to '" + path_ + "' failed");
    }

private:
    void put(const void* data, std::size_t n) {
        out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
        if (!out_) throw FormatError("write to '" + path_ + "' failed");
    }

    std::ofstream out_;
    std::string path_;
};

class ByteReader {
public:
    explicit ByteReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw FormatError("cannot open '" + path + "' for reading");
    }

    std::uint64_t offset() const { return offset_; }
    const std::string& path() const { return path_; }

    std::uint8_t u8() {
        std::uint8_t b;
        get(&b, 1);
        return b;
    }
    std::uint16_t u16() {
        std::uint8_t b[2];
        get(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32() {
        std::uint8_t b[4];
        get(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint8_t b[8];
        get(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    void bytes(char* dst, std::size_t n) { get(dst, n); }

    bool at_eof() {
        in_.peek();
        return in_.eof();
    }

private:
    void get(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) {
            throw FormatError("'" + path_ + "': unexpected end of file at byte offset " +
                              std::to_string(offset_ + static_cast<std::uint64_t>(in_.gcount())));
        }
        offset_ += n;
    }

    std::ifstream in_;
    std::string path_;
    std::uint64_t offset_ = 0;
};

}  // namespace emgsa::detail
