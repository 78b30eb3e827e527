#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "fpsearch/errors.hpp"

// Little-endian buffer readers/writers shared by the gallery, PQ-index and
// minutiae-map file formats. All formats are little-endian on disk; this
// code assumes a little-endian host (checked at compile time).

static_assert(std::endian::native == std::endian::little,
              "serialized formats are little-endian; big-endian hosts unsupported");

namespace fpsearch {

class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }

    void put_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }

    const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }
    std::vector<std::uint8_t> take() noexcept { return std::move(buf_); }

private:
    std::vector<std::uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    template <typename T>
    T get() {
        static_assert(std::is_trivially_copyable_v<T>);
        require(sizeof(T));
        T value;
        std::memcpy(&value, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    void get_bytes(void* out, std::size_t n) {
        require(n);
        std::memcpy(out, data_ + pos_, n);
        pos_ += n;
    }

    void skip(std::size_t n) {
        require(n);
        pos_ += n;
    }

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return size_ - pos_; }
    bool exhausted() const noexcept { return pos_ == size_; }

private:
    void require(std::size_t n) const {
        if (size_ - pos_ < n)
            throw ParseError(pos_, "unexpected end of data, need " + std::to_string(n) +
                                       " more bytes, have " + std::to_string(size_ - pos_));
    }

    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::string read_file_text(const std::string& path);
void write_file_text(const std::string& path, const std::string& text);

} // namespace fpsearch
