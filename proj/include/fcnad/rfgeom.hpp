#ifndef FCNAD_RFGEOM_HPP
#define FCNAD_RFGEOM_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fcnad/error.hpp"
#include "fcnad/netcore.hpp"

namespace fcnad {

/// Receptive-field geometry after a prefix of layers, per axis.
/// Cell i along an axis covers input pixels [offset + i*jump, offset + i*jump + size - 1].
struct RfGeometry {
    std::size_t layer_count = 0;  ///< number of layers in the prefix
    std::string layer;            ///< name of the last layer ("input" for the empty prefix)
    std::int64_t size_h = 1;
    std::int64_t size_w = 1;
    std::int64_t jump = 1;
    std::int64_t offset_y = 0;
    std::int64_t offset_x = 0;

    friend bool operator==(const RfGeometry&, const RfGeometry&) = default;
};

/// Inclusive rectangle in frame pixel coordinates.
struct ReceptiveField {
    std::int64_t y0 = 0;
    std::int64_t x0 = 0;
    std::int64_t y1 = 0;
    std::int64_t x1 = 0;

    std::int64_t height() const noexcept { return y1 - y0 + 1; }
    std::int64_t width() const noexcept { return x1 - x0 + 1; }
    std::int64_t area() const noexcept { return height() * width(); }
    bool contains(std::int64_t y, std::int64_t x) const noexcept { return y >= y0 && y <= y1 && x >= x0 && x <= x1; }

    friend bool operator==(const ReceptiveField&, const ReceptiveField&) = default;
};

/// Geometry for every prefix 0..layers.size(); entry k describes cells of Omega_k.
inline std::vector<RfGeometry> geometry_table(const NetworkSpec& net) {
    std::vector<RfGeometry> table;
    RfGeometry g;
    g.layer = "input";
    table.push_back(g);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        std::int64_t kh = 1, kw = 1, stride = 1, pad = 0;
        if (const auto* conv = std::get_if<ConvLayerSpec>(&net.layers[i])) {
            kh = conv->kernel_h;
            kw = conv->kernel_w;
            stride = conv->stride;
            pad = conv->padding;
        } else if (const auto* pool = std::get_if<PoolLayerSpec>(&net.layers[i])) {
            kh = pool->window_h;
            kw = pool->window_w;
            stride = pool->stride;
        }
        g.size_h += (kh - 1) * g.jump;
        g.size_w += (kw - 1) * g.jump;
        g.offset_y -= pad * g.jump;
        g.offset_x -= pad * g.jump;
        g.jump *= stride;
        g.layer_count = i + 1;
        g.layer = layer_name(net.layers[i]);
        table.push_back(g);
    }
    return table;
}

inline RfGeometry geometry_of(const NetworkSpec& net, std::size_t k) {
    if (k > net.layers.size()) {
        throw Error(ErrorCode::Bounds, "layer index " + std::to_string(k) + " exceeds " +
                                           std::to_string(net.layers.size()));
    }
    return geometry_table(net)[k];
}

/// Unclipped field of cell (i, j) (row, column).
inline ReceptiveField field_of(const RfGeometry& g, std::size_t i, std::size_t j) noexcept {
    const auto y0 = g.offset_y + static_cast<std::int64_t>(i) * g.jump;
    const auto x0 = g.offset_x + static_cast<std::int64_t>(j) * g.jump;
    return {y0, x0, y0 + g.size_h - 1, x0 + g.size_w - 1};
}

inline ReceptiveField clip(const ReceptiveField& r, std::size_t frame_h, std::size_t frame_w) noexcept {
    return {std::max<std::int64_t>(r.y0, 0), std::max<std::int64_t>(r.x0, 0),
            std::min<std::int64_t>(r.y1, static_cast<std::int64_t>(frame_h) - 1),
            std::min<std::int64_t>(r.x1, static_cast<std::int64_t>(frame_w) - 1)};
}

/// Maps cell (i, j) of the grid at layer prefix k back to its clipped rectangle in the frame.
inline ReceptiveField invert_cell(const RfGeometry& g, std::size_t grid_h, std::size_t grid_w, std::size_t i,
                                  std::size_t j, std::size_t frame_h, std::size_t frame_w) {
    if (i >= grid_h || j >= grid_w) {
        throw Error(ErrorCode::Bounds, "cell (" + std::to_string(i) + "," + std::to_string(j) + ") outside " +
                                           std::to_string(grid_h) + "x" + std::to_string(grid_w) + " grid");
    }
    const auto r = clip(field_of(g, i, j), frame_h, frame_w);
    if (r.y1 < r.y0 || r.x1 < r.x0) {
        throw Error(ErrorCode::Bounds, "receptive field of cell (" + std::to_string(i) + "," + std::to_string(j) +
                                           ") lies outside the frame");
    }
    return r;
}

inline ReceptiveField invert_cell(const NetworkSpec& net, std::size_t k, std::size_t i, std::size_t j,
                                  std::size_t frame_h, std::size_t frame_w) {
    const auto [grid_h, grid_w] = grid_dims(net, k, frame_h, frame_w);
    return invert_cell(geometry_of(net, k), grid_h, grid_w, i, j, frame_h, frame_w);
}

} // namespace fcnad

#endif
