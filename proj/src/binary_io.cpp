// SPDX-License-Identifier: Apache-2.0

#include "binary_io.hpp"

#include <zlib.h>

#include <algorithm>

#include <cstdio>

namespace noiseforge::io {

std::string crc32_hex(std::span<const char> bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in slices.
    std::size_t offset = 0;
    while (offset < bytes.size()) {
        const std::size_t n = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
        crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + offset), static_cast<uInt>(n));
        offset += n;
    }
    char hex[9];
    std::snprintf(hex, sizeof hex, "%08lx", static_cast<unsigned long>(crc));
    return hex;
}

} // namespace noiseforge::io
