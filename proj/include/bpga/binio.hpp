// SPDX-License-Identifier: Apache-2.0
//
// Little-endian binary file helpers shared by the checkpoint, fixture and
// quantized-model formats, plus the CRC32/FNV hashes used for integrity
// checks and manifests.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace bpga::io {

// Byte buffer with explicit little-endian encoders. Files are written in
// one shot so the trailing CRC can cover everything before it.
class Writer {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void i16(std::int16_t v) { u16(static_cast<std::uint16_t>(v)); }
    void f32(float v);
    void bytes(const void* p, std::size_t n);
    void magic(const char m[4]) { bytes(m, 4); }

    const std::vector<std::uint8_t>& data() const { return buf_; }
    void save(const std::filesystem::path& path) const;

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    explicit Reader(std::vector<std::uint8_t> data) : buf_(std::move(data)) {}
    static Reader load(const std::filesystem::path& path);

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::int16_t i16() { return static_cast<std::int16_t>(u16()); }
    float f32();
    void expect_magic(const char m[4], const std::string& what);

    std::size_t pos() const { return pos_; }
    std::size_t size() const { return buf_.size(); }
    std::size_t remaining() const { return buf_.size() - pos_; }
    const std::vector<std::uint8_t>& data() const { return buf_; }

private:
    void need(std::size_t n) const;
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

// IEEE 802.3 CRC32 (zlib-compatible).
std::uint32_t crc32(const void* data, std::size_t n, std::uint32_t seed = 0);

// FNV-1a 64-bit, used for manifest config/input hashes.
std::uint64_t fnv1a(const void* data, std::size_t n);
std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t h);

}  // namespace bpga::io
