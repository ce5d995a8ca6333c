// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace noiseforge {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violated by the caller (bad box, bad threshold, empty token list...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A category, token or stored record that was looked up but does not exist.
class LookupError : public Error {
public:
    using Error::Error;
};

/// Configuration file or flag problems. `key()` names the offending key when known.
class ConfigError : public Error {
public:
    ConfigError(std::string key, const std::string& what)
        : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

enum class FormatErrorKind {
    CorruptHeader,
    VersionMismatch,
    Truncated,
    ChecksumMismatch,
    SizeMismatch,
    Inconsistent,
    Io,
    Parse,
};

const char* to_string(FormatErrorKind kind) noexcept;

/// On-disk data that cannot be read back: database directories, composed
/// images, layout and detection files.
class FormatError : public Error {
public:
    FormatError(FormatErrorKind kind, const std::string& what)
        : Error(std::string(to_string(kind)) + ": " + what), kind_(kind), detail_(what) {}
    FormatErrorKind kind() const noexcept { return kind_; }
    /// Message without the kind prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    FormatErrorKind kind_;
    std::string detail_;
};

inline const char* to_string(FormatErrorKind kind) noexcept {
    switch (kind) {
    case FormatErrorKind::CorruptHeader: return "corrupt header";
    case FormatErrorKind::VersionMismatch: return "version mismatch";
    case FormatErrorKind::Truncated: return "truncated payload";
    case FormatErrorKind::ChecksumMismatch: return "checksum mismatch";
    case FormatErrorKind::SizeMismatch: return "size mismatch";
    case FormatErrorKind::Inconsistent: return "inconsistent data";
    case FormatErrorKind::Io: return "i/o error";
    case FormatErrorKind::Parse: return "parse error";
    }
    return "format error";
}

} // namespace noiseforge
