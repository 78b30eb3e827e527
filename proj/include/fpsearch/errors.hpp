#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fpsearch {

/// Input violates a precondition (non-finite values, too few samples, ...).
class InvalidInputError : public std::runtime_error {
public:
    explicit InvalidInputError(const std::string& what) : std::runtime_error(what) {}
};

/// Enrollment key already present.
class ConflictError : public std::runtime_error {
public:
    explicit ConflictError(const std::string& what) : std::runtime_error(what) {}
};

/// A requested operation is not possible with the given configuration
/// (e.g. re-ranking over a gallery enrolled without minutiae).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed serialized data. Carries the byte offset at which parsing failed.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t byte_offset, const std::string& what)
        : std::runtime_error(what + " (at byte " + std::to_string(byte_offset) + ")"),
          byte_offset_(byte_offset) {}

    std::size_t byte_offset() const noexcept { return byte_offset_; }

private:
    std::size_t byte_offset_;
};

/// File carries an unsupported format version.
class VersionError : public std::runtime_error {
public:
    explicit VersionError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem-level failure (missing path, short read, failed write).
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fpsearch
