#ifndef FCNAD_TENSOR_HPP
#define FCNAD_TENSOR_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "fcnad/error.hpp"

namespace fcnad {

/// Dense channels x height x width array, channel-major then row-major.
class Tensor3 {
public:
    Tensor3() = default;
    Tensor3(std::size_t channels, std::size_t height, std::size_t width, float fill = 0.0f)
        : channels_(channels), height_(height), width_(width),
          data_(channels * height * width, fill) {}
    Tensor3(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data)
        : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
        if (data_.size() != channels * height * width) {
            throw Error(ErrorCode::Shape, "tensor data length " + std::to_string(data_.size()) +
                                              " != " + std::to_string(channels * height * width));
        }
    }

    std::size_t channels() const noexcept { return channels_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t plane_size() const noexcept { return height_ * width_; }

    float& operator()(std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[(c * height_ + y) * width_ + x];
    }
    float operator()(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[(c * height_ + y) * width_ + x];
    }

    std::span<float> plane(std::size_t c) noexcept {
        return {data_.data() + c * plane_size(), plane_size()};
    }
    std::span<const float> plane(std::size_t c) const noexcept {
        return {data_.data() + c * plane_size(), plane_size()};
    }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }
    std::vector<float>& storage() noexcept { return data_; }

    std::string shape_string() const {
        return std::to_string(channels_) + "x" + std::to_string(height_) + "x" +
               std::to_string(width_);
    }

    bool same_shape(const Tensor3& other) const noexcept {
        return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
    }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> data_;
};

} // namespace fcnad

#endif
