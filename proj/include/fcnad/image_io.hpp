#ifndef FCNAD_IMAGE_IO_HPP
#define FCNAD_IMAGE_IO_HPP

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fcnad/error.hpp"
#include "fcnad/preproc.hpp"

namespace fcnad {

/// 8-bit grayscale raster as stored on disk.
struct GrayImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
};

namespace detail {

inline std::size_t pgm_read_header_int(std::span<const std::uint8_t> bytes, std::size_t& pos,
                                       const std::string& name) {
    // whitespace and '#' comments may precede each header field
    while (pos < bytes.size()) {
        if (std::isspace(bytes[pos])) {
            ++pos;
        } else if (bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else {
            break;
        }
    }
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
        value = value * 10 + (bytes[pos] - '0');
        ++pos;
        if (++digits > 9) throw Error(ErrorCode::Decode, name + ": header value too large");
    }
    if (digits == 0) throw Error(ErrorCode::Decode, name + ": malformed PGM header");
    return value;
}

} // namespace detail

/// Parses a binary (P5) PGM with maxval <= 255.
inline GrayImage parse_pgm(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>") {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
        throw Error(ErrorCode::Decode, name + ": not a binary PGM (P5)");
    }
    std::size_t pos = 2;
    GrayImage img;
    img.width = detail::pgm_read_header_int(bytes, pos, name);
    img.height = detail::pgm_read_header_int(bytes, pos, name);
    const std::size_t maxval = detail::pgm_read_header_int(bytes, pos, name);
    if (maxval == 0 || maxval > 255) {
        throw Error(ErrorCode::Decode, name + ": unsupported maxval " + std::to_string(maxval));
    }
    if (img.width == 0 || img.height == 0) throw Error(ErrorCode::Decode, name + ": empty image");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        throw Error(ErrorCode::Decode, name + ": malformed PGM header");
    }
    ++pos;
    const std::size_t count = img.width * img.height;
    if (bytes.size() - pos < count) {
        throw Error(ErrorCode::Decode, name + ": truncated pixel data");
    }
    img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + count));
    if (maxval != 255) {
        for (auto& p : img.pixels) {
            p = static_cast<std::uint8_t>(std::lround(std::min<double>(p, maxval) * 255.0 / maxval));
        }
    }
    return img;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "short write to " + path.string());
}

inline GrayImage read_pgm(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return parse_pgm(bytes, path.string());
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
    const std::string header =
        "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
    return out;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    write_file_bytes(path, encode_pgm(img));
}

/// Scales 8-bit luminance into [0,1].
inline Frame to_frame(const GrayImage& img) {
    Frame f(img.height, img.width);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) f.data[i] = img.pixels[i] / 255.0f;
    return f;
}

inline GrayImage to_gray(const Frame& f) {
    GrayImage img{f.height, f.width, std::vector<std::uint8_t>(f.data.size())};
    for (std::size_t i = 0; i < f.data.size(); ++i) {
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(f.data[i], 0.0f, 1.0f) * 255.0f));
    }
    return img;
}

inline Frame decode_frame(std::span<const std::uint8_t> bytes, const std::string& name = "<memory>") {
    return to_frame(parse_pgm(bytes, name));
}

/// Lexicographically sorted *.pgm files of a directory.
inline std::vector<std::filesystem::path> list_pgm(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::Io, dir.string() + " is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

/// Sequential frame reader; one stream per instance.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    /// Next frame, or nullopt at end of stream. Decode failures throw ErrorCode::Decode.
    virtual std::optional<Frame> next() = 0;
    /// Name of the item the last next() call read (file name or raw offset).
    virtual std::string last_name() const = 0;
    /// Advance past an item that failed to decode.
    virtual void skip() = 0;
};

class PgmDirectorySource : public FrameSource {
public:
    explicit PgmDirectorySource(const std::filesystem::path& dir) : files_(list_pgm(dir)) {}

    std::optional<Frame> next() override {
        if (pos_ >= files_.size()) return std::nullopt;
        current_ = pos_;
        auto frame = to_frame(read_pgm(files_[pos_]));
        ++pos_;
        return frame;
    }
    std::string last_name() const override {
        return current_ < files_.size() ? files_[current_].filename().string() : std::string{};
    }
    void skip() override {
        if (pos_ == current_) ++pos_;
    }
    std::size_t count() const noexcept { return files_.size(); }

private:
    std::vector<std::filesystem::path> files_;
    std::size_t pos_ = 0;
    std::size_t current_ = static_cast<std::size_t>(-1);
};

/// Frames already in memory (tests, fixtures).
class MemorySource : public FrameSource {
public:
    explicit MemorySource(std::span<const Frame> frames, std::string name = "memory")
        : frames_(frames), name_(std::move(name)) {}

    std::optional<Frame> next() override {
        if (pos_ >= frames_.size()) return std::nullopt;
        return frames_[pos_++];
    }
    std::string last_name() const override { return name_ + "#" + std::to_string(pos_ - 1); }
    void skip() override {}

private:
    std::span<const Frame> frames_;
    std::string name_;
    std::size_t pos_ = 0;
};

/// Concatenated H*W byte frames.
class RawSource : public FrameSource {
public:
    RawSource(const std::filesystem::path& path, std::size_t width, std::size_t height)
        : in_(path, std::ios::binary), path_(path.string()), width_(width), height_(height),
          buffer_(width * height) {
        if (!in_) throw Error(ErrorCode::Io, "cannot open " + path_);
        if (width == 0 || height == 0) throw Error(ErrorCode::Config, "raw dimensions must be positive");
    }

    std::optional<Frame> next() override {
        in_.read(reinterpret_cast<char*>(buffer_.data()), static_cast<std::streamsize>(buffer_.size()));
        const auto got = static_cast<std::size_t>(in_.gcount());
        if (got == 0) return std::nullopt;
        ++index_;
        if (got < buffer_.size()) {
            throw Error(ErrorCode::Decode, path_ + ": truncated raw frame " + std::to_string(index_ - 1));
        }
        Frame f(height_, width_);
        for (std::size_t i = 0; i < buffer_.size(); ++i) f.data[i] = buffer_[i] / 255.0f;
        return f;
    }
    std::string last_name() const override { return path_ + "#" + std::to_string(index_ - 1); }
    void skip() override {}

private:
    std::ifstream in_;
    std::string path_;
    std::size_t width_;
    std::size_t height_;
    std::vector<std::uint8_t> buffer_;
    std::size_t index_ = 0;
};

} // namespace fcnad

#endif
