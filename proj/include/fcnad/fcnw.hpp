#ifndef FCNAD_FCNW_HPP
#define FCNAD_FCNW_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fcnad/binary_io.hpp"
#include "fcnad/error.hpp"
#include "fcnad/image_io.hpp"
#include "fcnad/netcore.hpp"

namespace fcnad {

// FCNW layout (little-endian):
//   "FCNW" | u32 version=1 | u32 layer_count
//   per layer: u8 type (0 conv, 1 pool, 2 noop) | u8 name_len | name bytes
//     conv: u32 in,out,kh,kw,stride,pad,groups,activation | f32 weights[out*(in/groups)*kh*kw] | f32 biases[out]
//     pool: u32 wh,ww,stride,mode
//   u32 CRC32 of all preceding bytes
// The tap index is not part of the format; loaders default it to the full stack.

inline constexpr char kFcnwMagic[4] = {'F', 'C', 'N', 'W'};
inline constexpr std::uint32_t kFcnwVersion = 1;

inline void encode_layer(ByteWriter& w, const Layer& layer) {
    const std::string& name = layer_name(layer);
    if (name.size() > 255) throw Error(ErrorCode::Config, "layer name longer than 255 bytes: " + name);
    if (const auto* conv = std::get_if<ConvLayerSpec>(&layer)) {
        conv->validate();
        w.put_u8(0);
        w.put_u8(static_cast<std::uint8_t>(name.size()));
        w.put_raw(name);
        for (std::uint32_t v : {conv->in_channels, conv->out_channels, conv->kernel_h, conv->kernel_w, conv->stride,
                                conv->padding, conv->groups, static_cast<std::uint32_t>(conv->activation)}) {
            w.put_u32(v);
        }
        w.put_array<float>(conv->weights);
        w.put_array<float>(conv->biases);
    } else if (const auto* pool = std::get_if<PoolLayerSpec>(&layer)) {
        w.put_u8(1);
        w.put_u8(static_cast<std::uint8_t>(name.size()));
        w.put_raw(name);
        for (std::uint32_t v : {pool->window_h, pool->window_w, pool->stride, static_cast<std::uint32_t>(pool->mode)}) {
            w.put_u32(v);
        }
    } else {
        w.put_u8(2);
        w.put_u8(static_cast<std::uint8_t>(name.size()));
        w.put_raw(name);
    }
}

inline std::vector<std::uint8_t> encode_fcnw(std::span<const Layer> layers) {
    ByteWriter w;
    w.put_raw(std::string(kFcnwMagic, 4));
    w.put_u32(kFcnwVersion);
    w.put_u32(static_cast<std::uint32_t>(layers.size()));
    for (const auto& layer : layers) encode_layer(w, layer);
    w.put_u32(crc32_of(w.bytes()));
    return std::move(w.bytes());
}

inline std::vector<std::uint8_t> encode_fcnw(const NetworkSpec& net) { return encode_fcnw(net.layers); }

inline std::vector<Layer> decode_fcnw_layers(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>") {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kFcnwMagic, 4) != 0) {
        throw Error(ErrorCode::BadMagic, source + ": not an FCNW file");
    }
    if (bytes.size() < 16) throw Error(ErrorCode::Truncated, source + ": header truncated");
    ByteReader r(bytes.first(bytes.size() - 4));
    r.get_span(4);
    r.set_context(source + " header");
    const std::uint32_t version = r.get_u32();
    if (version != kFcnwVersion) {
        throw Error(ErrorCode::VersionMismatch, source + ": FCNW version " + std::to_string(version) + ", expected " +
                                                    std::to_string(kFcnwVersion));
    }
    const std::uint32_t count = r.get_u32();
    std::vector<Layer> layers;
    for (std::uint32_t i = 0; i < count; ++i) {
        r.set_context(source + " layer " + std::to_string(i));
        const std::uint8_t type = r.get_u8();
        const std::uint8_t name_len = r.get_u8();
        std::string name = r.get_string(name_len);
        r.set_context(source + " layer " + std::to_string(i) + " '" + name + "'");
        if (type == 0) {
            ConvLayerSpec conv;
            conv.name = std::move(name);
            conv.in_channels = r.get_u32();
            conv.out_channels = r.get_u32();
            conv.kernel_h = r.get_u32();
            conv.kernel_w = r.get_u32();
            conv.stride = r.get_u32();
            conv.padding = r.get_u32();
            conv.groups = r.get_u32();
            const std::uint32_t act = r.get_u32();
            if (act > 2) throw Error(ErrorCode::Decode, conv.name + ": unknown activation " + std::to_string(act));
            conv.activation = static_cast<Activation>(act);
            if (conv.groups == 0 || conv.in_channels % conv.groups != 0) {
                throw Error(ErrorCode::Decode, conv.name + ": invalid groups");
            }
            conv.weights = r.get_array<float>(conv.expected_weight_count());
            conv.biases = r.get_array<float>(conv.out_channels);
            layers.emplace_back(std::move(conv));
        } else if (type == 1) {
            PoolLayerSpec pool;
            pool.name = std::move(name);
            pool.window_h = r.get_u32();
            pool.window_w = r.get_u32();
            pool.stride = r.get_u32();
            const std::uint32_t mode = r.get_u32();
            if (mode > 1) throw Error(ErrorCode::Decode, pool.name + ": unknown pool mode " + std::to_string(mode));
            pool.mode = static_cast<PoolMode>(mode);
            layers.emplace_back(std::move(pool));
        } else if (type == 2) {
            layers.emplace_back(NoopLayerSpec{std::move(name)});
        } else {
            throw Error(ErrorCode::Decode, source + ": unknown layer type " + std::to_string(type));
        }
    }
    if (r.remaining() != 0) {
        throw Error(ErrorCode::Checksum, source + ": " + std::to_string(r.remaining()) + " unexpected trailing bytes");
    }
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
    if (stored != crc32_of(bytes.first(bytes.size() - 4))) {
        throw Error(ErrorCode::Checksum, source + ": CRC32 mismatch");
    }
    return layers;
}

inline NetworkSpec decode_fcnw(std::span<const std::uint8_t> bytes, const std::string& source = "<memory>") {
    NetworkSpec net{decode_fcnw_layers(bytes, source), 0};
    net.tap_index = net.layers.size();
    net.validate();
    return net;
}

inline void save_weights(const NetworkSpec& net, const std::filesystem::path& path) {
    write_file_bytes(path, encode_fcnw(net));
}

inline NetworkSpec load_weights(const std::filesystem::path& path) {
    return decode_fcnw(read_file_bytes(path), path.string());
}

} // namespace fcnad

#endif
