#ifndef FCNAD_BINARY_IO_HPP
#define FCNAD_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "fcnad/error.hpp"

namespace fcnad {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
    uLong crc = ::crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks
    std::size_t pos = 0;
    while (pos < bytes.size()) {
        const std::size_t chunk = std::min<std::size_t>(bytes.size() - pos, 1u << 30);
        crc = ::crc32(crc, bytes.data() + pos, static_cast<uInt>(chunk));
        pos += chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

class ByteWriter {
public:
    template <typename T>
    void put(T value) {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_u8(std::uint8_t v) { put(v); }
    void put_u32(std::uint32_t v) { put(v); }
    void put_u64(std::uint64_t v) { put(v); }

    template <typename T>
    void put_array(std::span<const T> values) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
        bytes_.insert(bytes_.end(), p, p + values.size_bytes());
    }
    void put_bytes(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }
    void put_raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

    std::vector<std::uint8_t>& bytes() noexcept { return bytes_; }
    std::size_t size() const noexcept { return bytes_.size(); }

private:
    std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked little-endian reader; running past the end throws ErrorCode::Truncated
/// with the current context string.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void set_context(std::string context) { context_ = std::move(context); }

    template <typename T>
    T get() {
        require(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::uint8_t get_u8() { return get<std::uint8_t>(); }
    std::uint32_t get_u32() { return get<std::uint32_t>(); }
    std::uint64_t get_u64() { return get<std::uint64_t>(); }

    template <typename T>
    std::vector<T> get_array(std::size_t count) {
        if (count > remaining() / sizeof(T)) require(count * sizeof(T) + 1);
        std::vector<T> values(count);
        std::memcpy(values.data(), bytes_.data() + pos_, count * sizeof(T));
        pos_ += count * sizeof(T);
        return values;
    }
    std::string get_string(std::size_t length) {
        require(length);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), length);
        pos_ += length;
        return s;
    }
    std::span<const std::uint8_t> get_span(std::size_t length) {
        require(length);
        auto s = bytes_.subspan(pos_, length);
        pos_ += length;
        return s;
    }

    std::size_t position() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void require(std::size_t n) const {
        if (n > remaining()) {
            throw Error(ErrorCode::Truncated, context_.empty() ? std::string("unexpected end of data")
                                                               : "unexpected end of data in " + context_);
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
    std::string context_;
};

} // namespace fcnad

#endif
