// SPDX-License-Identifier: Apache-2.0
//
// Little-endian float32 files and JSON sidecars shared by the on-disk formats.

#pragma once

#include "noiseforge/error.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace noiseforge::io {

inline std::uint32_t to_little(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big)
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    return v;
}

inline std::vector<char> encode_f32(std::span<const float> values) {
    std::vector<char> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const std::uint32_t raw = to_little(std::bit_cast<std::uint32_t>(values[i]));
        std::memcpy(bytes.data() + 4 * i, &raw, 4);
    }
    return bytes;
}

inline std::vector<float> decode_f32(std::span<const char> bytes) {
    std::vector<float> values(bytes.size() / 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        std::uint32_t raw;
        std::memcpy(&raw, bytes.data() + 4 * i, 4);
        values[i] = std::bit_cast<float>(to_little(raw));
    }
    return values;
}

inline void write_bytes(const std::filesystem::path& path, std::span<const char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError(FormatErrorKind::Io, "failed writing " + path.string());
}

inline std::vector<char> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(FormatErrorKind::Io, "cannot open " + path.string());
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    write_bytes(path, std::span<const char>(text.data(), text.size()));
}

/// Reads a float32 payload that must hold exactly `expected` values.
inline std::vector<float> read_f32(const std::filesystem::path& path, std::size_t expected) {
    const auto bytes = read_bytes(path);
    const std::size_t want = expected * 4;
    if (bytes.size() < want) {
        std::ostringstream msg;
        msg << path.filename().string() << " has " << bytes.size() << " bytes, expected " << want;
        throw FormatError(FormatErrorKind::Truncated, msg.str());
    }
    if (bytes.size() > want) {
        std::ostringstream msg;
        msg << path.filename().string() << " has " << bytes.size() << " bytes, expected " << want;
        throw FormatError(FormatErrorKind::SizeMismatch, msg.str());
    }
    return decode_f32(bytes);
}

inline nlohmann::json read_json(const std::filesystem::path& path,
                                FormatErrorKind on_parse_error = FormatErrorKind::Parse) {
    const auto bytes = read_bytes(path);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(on_parse_error, path.string() + ": " + e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

/// CRC-32 (zlib polynomial) rendered as 8 lowercase hex digits.
std::string crc32_hex(std::span<const char> bytes);

} // namespace noiseforge::io
