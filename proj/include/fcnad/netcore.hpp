#ifndef FCNAD_NETCORE_HPP
#define FCNAD_NETCORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "fcnad/error.hpp"
#include "fcnad/preproc.hpp"
#include "fcnad/random.hpp"
#include "fcnad/tensor.hpp"

namespace fcnad {

#ifdef FCNAD_ACCUMULATE_DOUBLE
using DefaultAccumulator = double;
#else
using DefaultAccumulator = float;
#endif

enum class Activation : std::uint32_t { None = 0, Relu = 1, Sigmoid = 2 };
enum class PoolMode : std::uint32_t { Mean = 0, Max = 1 };

struct ConvLayerSpec {
    std::string name;
    std::uint32_t in_channels = 0;
    std::uint32_t out_channels = 0;
    std::uint32_t kernel_h = 1;
    std::uint32_t kernel_w = 1;
    std::uint32_t stride = 1;
    std::uint32_t padding = 0;
    std::uint32_t groups = 1;
    Activation activation = Activation::None;
    /// out x (in/groups) x kh x kw
    std::vector<float> weights;
    std::vector<float> biases;

    std::size_t group_in() const noexcept { return in_channels / groups; }
    std::size_t group_out() const noexcept { return out_channels / groups; }
    std::size_t expected_weight_count() const noexcept {
        return static_cast<std::size_t>(out_channels) * group_in() * kernel_h * kernel_w;
    }

    void validate() const {
        if (groups == 0 || in_channels == 0 || out_channels == 0 || kernel_h == 0 || kernel_w == 0 ||
            stride == 0) {
            throw Error(ErrorCode::Shape, name + ": zero-sized hyperparameter");
        }
        if (in_channels % groups != 0 || out_channels % groups != 0) {
            throw Error(ErrorCode::Shape, name + ": channels not divisible by groups");
        }
        if (weights.size() != expected_weight_count()) {
            throw Error(ErrorCode::Shape, name + ": expected " + std::to_string(expected_weight_count()) +
                                              " weights, have " + std::to_string(weights.size()));
        }
        if (biases.size() != out_channels) throw Error(ErrorCode::Shape, name + ": bias count mismatch");
    }

    friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

struct PoolLayerSpec {
    std::string name;
    std::uint32_t window_h = 2;
    std::uint32_t window_w = 2;
    std::uint32_t stride = 2;
    PoolMode mode = PoolMode::Mean;

    void validate() const {
        if (window_h == 0 || window_w == 0 || stride == 0) {
            throw Error(ErrorCode::Shape, name + ": window and stride must be >= 1");
        }
    }

    friend bool operator==(const PoolLayerSpec&, const PoolLayerSpec&) = default;
};

/// Placeholder (e.g. an omitted LRN) that keeps imported layer indices aligned.
struct NoopLayerSpec {
    std::string name;
    friend bool operator==(const NoopLayerSpec&, const NoopLayerSpec&) = default;
};

using Layer = std::variant<ConvLayerSpec, PoolLayerSpec, NoopLayerSpec>;

inline const std::string& layer_name(const Layer& layer) {
    return std::visit([](const auto& l) -> const std::string& { return l.name; }, layer);
}

/// Ordered conv/pool stack; `tap_index` layers are applied to produce features.
struct NetworkSpec {
    std::vector<Layer> layers;
    std::size_t tap_index = 0;

    /// Index one past the named layer, i.e. the tap that ends at it.
    std::size_t tap_after(const std::string& name) const {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            if (layer_name(layers[i]) == name) return i + 1;
        }
        throw Error(ErrorCode::Config, "no layer named '" + name + "'");
    }

    /// Channel count after applying the first `count` layers to a 3-channel input.
    std::size_t channels_after(std::size_t count, std::size_t input_channels = 3) const {
        std::size_t channels = input_channels;
        for (std::size_t i = 0; i < count && i < layers.size(); ++i) {
            if (const auto* conv = std::get_if<ConvLayerSpec>(&layers[i])) channels = conv->out_channels;
        }
        return channels;
    }

    void validate(std::size_t input_channels = 3) const {
        if (tap_index > layers.size()) {
            throw Error(ErrorCode::Config, "tap index " + std::to_string(tap_index) + " exceeds layer count " +
                                               std::to_string(layers.size()));
        }
        std::size_t channels = input_channels;
        for (const auto& layer : layers) {
            if (const auto* conv = std::get_if<ConvLayerSpec>(&layer)) {
                conv->validate();
                if (conv->in_channels != channels) {
                    throw Error(ErrorCode::Shape, conv->name + ": expects " + std::to_string(conv->in_channels) +
                                                      " input channels, previous layer gives " +
                                                      std::to_string(channels));
                }
                channels = conv->out_channels;
            } else if (const auto* pool = std::get_if<PoolLayerSpec>(&layer)) {
                pool->validate();
            }
        }
    }

    friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Regional feature vectors f_k(i, j, 1:m_k) on the tap grid.
struct FeatureGrid {
    Tensor3 values;
    std::size_t tap_index = 0;
    std::int64_t frame_index = 0;

    std::size_t grid_height() const noexcept { return values.height(); }
    std::size_t grid_width() const noexcept { return values.width(); }
    std::size_t vector_length() const noexcept { return values.channels(); }

    /// Copies the m_k-vector at cell (i, j) (row i, column j).
    template <typename T = float>
    std::vector<T> cell(std::size_t i, std::size_t j) const {
        std::vector<T> v(values.channels());
        for (std::size_t c = 0; c < v.size(); ++c) v[c] = static_cast<T>(values(c, i, j));
        return v;
    }
};

/// floor((in + 2*pad - kernel) / stride) + 1, or 0 when the window does not fit.
inline std::size_t output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
    const std::size_t padded = in + 2 * pad;
    if (padded < kernel || stride == 0) return 0;
    return (padded - kernel) / stride + 1;
}

namespace detail {

template <typename T>
inline T activate(T v, Activation a) noexcept {
    switch (a) {
    case Activation::Relu: return v > T(0) ? v : T(0);
    case Activation::Sigmoid: return T(1) / (T(1) + std::exp(-v));
    case Activation::None: break;
    }
    return v;
}

} // namespace detail

/// Grouped 2-D convolution: window gather (im2col) then one GEMM per group.
template <typename Acc = DefaultAccumulator>
Tensor3 conv_forward(const Tensor3& input, const ConvLayerSpec& layer) {
    layer.validate();
    if (input.channels() != layer.in_channels) {
        throw Error(ErrorCode::Shape, layer.name + ": input has " + std::to_string(input.channels()) +
                                          " channels, layer expects " + std::to_string(layer.in_channels));
    }
    const std::size_t out_h = output_extent(input.height(), layer.kernel_h, layer.stride, layer.padding);
    const std::size_t out_w = output_extent(input.width(), layer.kernel_w, layer.stride, layer.padding);
    if (out_h == 0 || out_w == 0) {
        throw Error(ErrorCode::Shape, layer.name + ": input " + input.shape_string() + " smaller than kernel " +
                                          std::to_string(layer.kernel_h) + "x" + std::to_string(layer.kernel_w));
    }

    using Matrix = Eigen::Matrix<Acc, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const std::size_t gin = layer.group_in();
    const std::size_t gout = layer.group_out();
    const std::size_t kh = layer.kernel_h;
    const std::size_t kw = layer.kernel_w;
    const std::size_t patch = gin * kh * kw;
    const std::size_t cells = out_h * out_w;
    const auto pad = static_cast<std::ptrdiff_t>(layer.padding);
    const auto in_h = static_cast<std::ptrdiff_t>(input.height());
    const auto in_w = static_cast<std::ptrdiff_t>(input.width());

    Tensor3 output(layer.out_channels, out_h, out_w);
    Matrix columns(patch, cells);
    Matrix result(gout, cells);
    for (std::size_t g = 0; g < layer.groups; ++g) {
        for (std::size_t c = 0; c < gin; ++c) {
            const auto plane = input.plane(g * gin + c);
            for (std::size_t ky = 0; ky < kh; ++ky) {
                for (std::size_t kx = 0; kx < kw; ++kx) {
                    Acc* row = columns.row(static_cast<Eigen::Index>((c * kh + ky) * kw + kx)).data();
                    for (std::size_t oy = 0; oy < out_h; ++oy) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * layer.stride + ky) - pad;
                        Acc* dst = row + oy * out_w;
                        if (iy < 0 || iy >= in_h) {
                            std::fill(dst, dst + out_w, Acc(0));
                            continue;
                        }
                        const float* src = plane.data() + iy * in_w;
                        for (std::size_t ox = 0; ox < out_w; ++ox) {
                            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * layer.stride + kx) - pad;
                            dst[ox] = (ix < 0 || ix >= in_w) ? Acc(0) : static_cast<Acc>(src[ix]);
                        }
                    }
                }
            }
        }
        const Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> weights(
            layer.weights.data() + g * gout * patch, static_cast<Eigen::Index>(gout),
            static_cast<Eigen::Index>(patch));
        result.noalias() = weights.template cast<Acc>() * columns;
        for (std::size_t o = 0; o < gout; ++o) {
            const std::size_t oc = g * gout + o;
            const Acc bias = static_cast<Acc>(layer.biases[oc]);
            auto out_plane = output.plane(oc);
            const Acc* src = result.row(static_cast<Eigen::Index>(o)).data();
            for (std::size_t i = 0; i < cells; ++i) {
                out_plane[i] = static_cast<float>(detail::activate(src[i] + bias, layer.activation));
            }
        }
    }
    return output;
}

inline Tensor3 pool_forward(const Tensor3& input, const PoolLayerSpec& layer) {
    layer.validate();
    const std::size_t out_h = output_extent(input.height(), layer.window_h, layer.stride, 0);
    const std::size_t out_w = output_extent(input.width(), layer.window_w, layer.stride, 0);
    if (out_h == 0 || out_w == 0) {
        throw Error(ErrorCode::Shape, layer.name + ": input " + input.shape_string() + " smaller than window " +
                                          std::to_string(layer.window_h) + "x" + std::to_string(layer.window_w));
    }
    Tensor3 output(input.channels(), out_h, out_w);
    const float inv_area = 1.0f / static_cast<float>(layer.window_h * layer.window_w);
    for (std::size_t c = 0; c < input.channels(); ++c) {
        for (std::size_t oy = 0; oy < out_h; ++oy) {
            for (std::size_t ox = 0; ox < out_w; ++ox) {
                const std::size_t y0 = oy * layer.stride;
                const std::size_t x0 = ox * layer.stride;
                float acc = layer.mode == PoolMode::Max ? -std::numeric_limits<float>::infinity() : 0.0f;
                for (std::size_t y = y0; y < y0 + layer.window_h; ++y) {
                    for (std::size_t x = x0; x < x0 + layer.window_w; ++x) {
                        const float v = input(c, y, x);
                        acc = layer.mode == PoolMode::Max ? std::max(acc, v) : acc + v;
                    }
                }
                output(c, oy, ox) = layer.mode == PoolMode::Max ? acc : acc * inv_area;
            }
        }
    }
    return output;
}

inline Tensor3 apply_layer(const Tensor3& input, const Layer& layer) {
    return std::visit(
        [&](const auto& l) -> Tensor3 {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, ConvLayerSpec>) {
                return conv_forward(input, l);
            } else if constexpr (std::is_same_v<L, PoolLayerSpec>) {
                return pool_forward(input, l);
            } else {
                return input;
            }
        },
        layer);
}

/// Applies layers [first, last) to `input`; shape errors are annotated with the layer name.
inline Tensor3 forward_layers(const NetworkSpec& net, Tensor3 input, std::size_t first, std::size_t last) {
    if (last > net.layers.size() || first > last) {
        throw Error(ErrorCode::Config, "layer range [" + std::to_string(first) + ", " + std::to_string(last) +
                                           ") outside network of " + std::to_string(net.layers.size()));
    }
    for (std::size_t i = first; i < last; ++i) {
        try {
            input = apply_layer(input, net.layers[i]);
        } catch (const Error& e) {
            throw Error(e.code(), "layer " + std::to_string(i) + " '" + layer_name(net.layers[i]) + "': " + e.what());
        }
    }
    return input;
}

/// Runs the first `net.tap_index` layers. tap_index 0 returns the input unchanged.
inline FeatureGrid forward_to_tap(const NetworkSpec& net, const TemporalInput& input) {
    return FeatureGrid{forward_layers(net, input.tensor, 0, net.tap_index), net.tap_index, input.frame_index};
}

/// Grid dimensions produced at `tap` for an input of the given size (0 if too small).
inline std::pair<std::size_t, std::size_t> grid_dims(const NetworkSpec& net, std::size_t tap, std::size_t height,
                                                     std::size_t width) {
    for (std::size_t i = 0; i < tap && i < net.layers.size(); ++i) {
        if (const auto* conv = std::get_if<ConvLayerSpec>(&net.layers[i])) {
            height = output_extent(height, conv->kernel_h, conv->stride, conv->padding);
            width = output_extent(width, conv->kernel_w, conv->stride, conv->padding);
        } else if (const auto* pool = std::get_if<PoolLayerSpec>(&net.layers[i])) {
            height = output_extent(height, pool->window_h, pool->stride, 0);
            width = output_extent(width, pool->window_w, pool->stride, 0);
        }
        if (height == 0 || width == 0) return {0, 0};
    }
    return {height, width};
}

/// Conv layer with uniform(-r, r) weights, r = sqrt(3 / fan_in), and zero biases.
inline ConvLayerSpec random_conv(Rng& rng, std::string name, std::uint32_t in, std::uint32_t out, std::uint32_t kh,
                                 std::uint32_t kw, std::uint32_t stride, std::uint32_t pad, std::uint32_t groups,
                                 Activation act) {
    ConvLayerSpec layer{std::move(name), in, out, kh, kw, stride, pad, groups, act, {}, {}};
    layer.weights.resize(layer.expected_weight_count());
    const double r = std::sqrt(3.0 / static_cast<double>(layer.group_in() * kh * kw));
    for (auto& w : layer.weights) w = static_cast<float>(uniform(rng, -r, r));
    layer.biases.assign(out, 0.0f);
    return layer;
}

struct DefaultNetworkOptions {
    bool include_deep_layers = false;  ///< append S2 and C3
    PoolMode pool_mode = PoolMode::Mean;
    std::string tap = "C2";
};

/// Caffe-reference (AlexNet) shapes for C1, S1, C2 [, S2, C3] with seeded random weights.
inline NetworkSpec default_network(std::uint64_t seed, const DefaultNetworkOptions& options = {}) {
    Rng rng(seed);
    NetworkSpec net;
    net.layers.emplace_back(random_conv(rng, "C1", 3, 96, 11, 11, 4, 0, 1, Activation::Relu));
    net.layers.emplace_back(PoolLayerSpec{"S1", 3, 3, 2, options.pool_mode});
    net.layers.emplace_back(random_conv(rng, "C2", 96, 256, 5, 5, 1, 2, 2, Activation::Relu));
    if (options.include_deep_layers) {
        net.layers.emplace_back(PoolLayerSpec{"S2", 3, 3, 2, options.pool_mode});
        net.layers.emplace_back(random_conv(rng, "C3", 256, 384, 3, 3, 1, 1, 1, Activation::Relu));
    }
    net.tap_index = net.tap_after(options.tap);
    return net;
}

} // namespace fcnad

#endif
