#ifndef FCNAD_LOCALIZATION_HPP
#define FCNAD_LOCALIZATION_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fcnad/error.hpp"
#include "fcnad/image_io.hpp"
#include "fcnad/rfgeom.hpp"

namespace fcnad {

using Cell = std::pair<std::size_t, std::size_t>;

/// Per-pixel count of abnormal receptive fields covering it.
struct VoteMap {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint32_t> counts;

    VoteMap() = default;
    VoteMap(std::size_t h, std::size_t w) : height(h), width(w), counts(h * w, 0) {}

    std::uint32_t at(std::size_t y, std::size_t x) const noexcept { return counts[y * width + x]; }
    std::uint32_t max() const noexcept {
        return counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
    }
    std::uint64_t total() const noexcept {
        std::uint64_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }

    friend bool operator==(const VoteMap&, const VoteMap&) = default;
};

/// Pixel-level anomaly mask (1 = anomalous).
struct DetectionMask {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;
    std::int64_t frame_index = 0;

    DetectionMask() = default;
    DetectionMask(std::size_t h, std::size_t w, std::int64_t index = 0)
        : height(h), width(w), pixels(h * w, 0), frame_index(index) {}

    bool at(std::size_t y, std::size_t x) const noexcept { return pixels[y * width + x] != 0; }
    std::size_t count() const noexcept {
        return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](auto p) { return p != 0; }));
    }
    bool any() const noexcept {
        return std::any_of(pixels.begin(), pixels.end(), [](auto p) { return p != 0; });
    }

    friend bool operator==(const DetectionMask&, const DetectionMask&) = default;
};

/// Adds one vote to every pixel of each cell's clipped receptive field. Rectangles are
/// summed through a 2-D difference array, so cost is O(cells + pixels).
inline VoteMap accumulate(std::span<const Cell> cells, const RfGeometry& geometry, std::size_t grid_h,
                          std::size_t grid_w, std::size_t frame_h, std::size_t frame_w) {
    VoteMap votes(frame_h, frame_w);
    if (cells.empty()) return votes;
    const std::size_t stride = frame_w + 1;
    std::vector<std::int64_t> diff((frame_h + 1) * stride, 0);
    for (const auto& [i, j] : cells) {
        const ReceptiveField r = invert_cell(geometry, grid_h, grid_w, i, j, frame_h, frame_w);
        const auto y0 = static_cast<std::size_t>(r.y0);
        const auto x0 = static_cast<std::size_t>(r.x0);
        const auto y1 = static_cast<std::size_t>(r.y1) + 1;
        const auto x1 = static_cast<std::size_t>(r.x1) + 1;
        ++diff[y0 * stride + x0];
        --diff[y0 * stride + x1];
        --diff[y1 * stride + x0];
        ++diff[y1 * stride + x1];
    }
    for (std::size_t y = 0; y < frame_h; ++y) {
        for (std::size_t x = 0; x < frame_w; ++x) {
            std::int64_t v = diff[y * stride + x];
            if (x > 0) v += diff[y * stride + x - 1];
            if (y > 0) v += diff[(y - 1) * stride + x];
            if (x > 0 && y > 0) v -= diff[(y - 1) * stride + x - 1];
            diff[y * stride + x] = v;
            votes.counts[y * frame_w + x] = static_cast<std::uint32_t>(v);
        }
    }
    return votes;
}

inline VoteMap accumulate(std::span<const Cell> cells, const NetworkSpec& net, std::size_t k, std::size_t frame_h,
                          std::size_t frame_w) {
    const auto [grid_h, grid_w] = grid_dims(net, k, frame_h, frame_w);
    return accumulate(cells, geometry_of(net, k), grid_h, grid_w, frame_h, frame_w);
}

/// mask(p) = votes(p) > zeta.
inline DetectionMask threshold_votes(const VoteMap& votes, std::uint32_t zeta, std::int64_t frame_index = 0) {
    DetectionMask mask(votes.height, votes.width, frame_index);
    for (std::size_t i = 0; i < votes.counts.size(); ++i) mask.pixels[i] = votes.counts[i] > zeta ? 1 : 0;
    return mask;
}

inline GrayImage mask_image(const DetectionMask& mask) {
    GrayImage img{mask.height, mask.width, std::vector<std::uint8_t>(mask.pixels.size())};
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) img.pixels[i] = mask.pixels[i] ? 255 : 0;
    return img;
}

/// Ground-truth style reading of a mask image: byte > 127 is anomalous.
inline DetectionMask mask_from_image(const GrayImage& img, std::int64_t frame_index = 0) {
    DetectionMask mask(img.height, img.width, frame_index);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) mask.pixels[i] = img.pixels[i] > 127 ? 1 : 0;
    return mask;
}

/// Vote counts scaled so the maximum maps to 255 (all zero when there are no votes).
inline GrayImage heat_map(const VoteMap& votes) {
    GrayImage img{votes.height, votes.width, std::vector<std::uint8_t>(votes.counts.size(), 0)};
    const std::uint32_t peak = votes.max();
    if (peak == 0) return img;
    for (std::size_t i = 0; i < votes.counts.size(); ++i) {
        img.pixels[i] = static_cast<std::uint8_t>((static_cast<std::uint64_t>(votes.counts[i]) * 255 + peak / 2) / peak);
    }
    return img;
}

/// {"frame_index", "height", "width", "runs": [[start, length], ...]} over row-major pixel indices.
inline nlohmann::json mask_to_rle(const DetectionMask& mask) {
    nlohmann::json runs = nlohmann::json::array();
    std::size_t i = 0;
    const std::size_t n = mask.pixels.size();
    while (i < n) {
        if (!mask.pixels[i]) {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < n && mask.pixels[i]) ++i;
        runs.push_back({start, i - start});
    }
    return {{"frame_index", mask.frame_index}, {"height", mask.height}, {"width", mask.width}, {"runs", runs}};
}

inline DetectionMask mask_from_rle(const nlohmann::json& j) {
    DetectionMask mask(j.at("height").get<std::size_t>(), j.at("width").get<std::size_t>(),
                       j.at("frame_index").get<std::int64_t>());
    for (const auto& run : j.at("runs")) {
        const auto start = run.at(0).get<std::size_t>();
        const auto length = run.at(1).get<std::size_t>();
        if (start + length > mask.pixels.size()) throw Error(ErrorCode::Decode, "RLE run outside mask");
        std::fill_n(mask.pixels.begin() + static_cast<std::ptrdiff_t>(start), length, std::uint8_t{1});
    }
    return mask;
}

} // namespace fcnad

#endif
