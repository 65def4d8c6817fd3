#ifndef FCNAD_PREPROC_HPP
#define FCNAD_PREPROC_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "fcnad/error.hpp"
#include "fcnad/tensor.hpp"

namespace fcnad {

/// Single-channel luminance frame, values in [0,1], row-major.
struct Frame {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<float> data;

    Frame() = default;
    Frame(std::size_t h, std::size_t w, float fill = 0.0f) : height(h), width(w), data(h * w, fill) {}
    Frame(std::size_t h, std::size_t w, std::vector<float> values)
        : height(h), width(w), data(std::move(values)) {
        if (data.size() != h * w) throw Error(ErrorCode::Shape, "frame data length mismatch");
    }

    float& at(std::size_t y, std::size_t x) noexcept { return data[y * width + x]; }
    float at(std::size_t y, std::size_t x) const noexcept { return data[y * width + x]; }

    bool same_dims(const Frame& o) const noexcept { return height == o.height && width == o.width; }

    friend bool operator==(const Frame&, const Frame&) = default;
};

/// Pixelwise mean of two consecutive frames.
struct AveragedFrame {
    Frame frame;
};

/// Three temporal channels <I'(t-4), I'(t-2), I'(t)> on the input grid.
struct TemporalInput {
    Tensor3 tensor;
    std::int64_t frame_index = 0;
};

inline constexpr std::size_t kHistoryFrames = 6;
inline constexpr std::size_t kWarmupFrames = kHistoryFrames - 1;

inline AveragedFrame temporal_average(const Frame& a, const Frame& b) {
    if (!a.same_dims(b)) {
        throw Error(ErrorCode::Shape, "temporal_average: " + std::to_string(a.height) + "x" +
                                          std::to_string(a.width) + " vs " +
                                          std::to_string(b.height) + "x" + std::to_string(b.width));
    }
    AveragedFrame out{Frame(a.height, a.width)};
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        out.frame.data[i] = 0.5f * (a.data[i] + b.data[i]);
    }
    return out;
}

struct PreprocOptions {
    /// Subtracted from each temporal channel after averaging; zero keeps values in [0,1].
    std::array<float, 3> channel_mean{0.0f, 0.0f, 0.0f};
};

/// Builds D_t from the last six frames of `history` (oldest first). Channel c averages
/// frames t-5+2c and t-4+2c.
inline TemporalInput build_input(std::span<const Frame> history, std::int64_t frame_index,
                                 const PreprocOptions& options = {}) {
    if (history.size() < kHistoryFrames) {
        throw Error(ErrorCode::InsufficientHistory,
                    "need " + std::to_string(kHistoryFrames) + " frames, have " +
                        std::to_string(history.size()));
    }
    const auto window = history.last(kHistoryFrames);
    const Frame& first = window.front();
    for (const Frame& f : window) {
        if (!f.same_dims(first)) throw Error(ErrorCode::Shape, "build_input: frame dimensions differ");
    }
    TemporalInput input{Tensor3(3, first.height, first.width), frame_index};
    for (std::size_t c = 0; c < 3; ++c) {
        const Frame& older = window[2 * c];
        const Frame& newer = window[2 * c + 1];
        auto plane = input.tensor.plane(c);
        const float mean = options.channel_mean[c];
        for (std::size_t i = 0; i < plane.size(); ++i) {
            plane[i] = 0.5f * (older.data[i] + newer.data[i]) - mean;
        }
    }
    return input;
}

/// Sliding six-frame buffer for one stream. Frames are numbered from 0 in push order.
class FrameWindow {
public:
    explicit FrameWindow(PreprocOptions options = {}) : options_(options) {}

    void push(Frame frame) {
        if (!frames_.empty() && !frame.same_dims(frames_.back())) {
            throw Error(ErrorCode::Shape, "frame " + std::to_string(next_index_) +
                                              " dimensions differ from stream");
        }
        frames_.push_back(std::move(frame));
        if (frames_.size() > kHistoryFrames) frames_.pop_front();
        peak_size_ = std::max(peak_size_, frames_.size());
        ++next_index_;
    }

    bool ready() const noexcept { return frames_.size() == kHistoryFrames; }

    /// Index of the most recently pushed frame.
    std::int64_t current_index() const noexcept { return next_index_ - 1; }

    TemporalInput build() const {
        if (!ready()) {
            throw Error(ErrorCode::InsufficientHistory,
                        "frame " + std::to_string(current_index()) + " is a warmup frame");
        }
        const std::vector<Frame> copy(frames_.begin(), frames_.end());
        return build_input(copy, current_index(), options_);
    }

    std::size_t size() const noexcept { return frames_.size(); }
    std::size_t peak_size() const noexcept { return peak_size_; }

private:
    PreprocOptions options_;
    std::deque<Frame> frames_;
    std::int64_t next_index_ = 0;
    std::size_t peak_size_ = 0;
};

/// Rec. 601 luma from 8-bit RGB.
inline float luma601(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
    return (0.299f * r + 0.587f * g + 0.114f * b) / 255.0f;
}

/// Bilinear resize (pixel-center aligned).
inline Frame resize_bilinear(const Frame& src, std::size_t height, std::size_t width) {
    if (height == 0 || width == 0 || src.height == 0 || src.width == 0) {
        throw Error(ErrorCode::Shape, "resize to or from an empty frame");
    }
    if (height == src.height && width == src.width) return src;
    Frame out(height, width);
    const double sy = static_cast<double>(src.height) / height;
    const double sx = static_cast<double>(src.width) / width;
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            const double top = src.at(y0, x0) * (1 - wx) + src.at(y0, x1) * wx;
            const double bottom = src.at(y1, x0) * (1 - wx) + src.at(y1, x1) * wx;
            out.at(y, x) = static_cast<float>(top * (1 - wy) + bottom * wy);
        }
    }
    return out;
}

} // namespace fcnad

#endif
