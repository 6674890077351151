#pragma once

#include <cstdint>
#include <vector>

#include "gazekit/errors.hpp"

namespace gaze {

/// Row-major 2D pixel grid with interleaved channels.
template <typename T>
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels = 1, T fill = T{})
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<std::size_t>(height) * width * channels, fill) {
        if (height < 0 || width < 0 || channels < 1) {
            throw Error("image: invalid dimensions");
        }
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T& at(int y, int x, int c = 0) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    const T& at(int y, int x, int c = 0) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    bool contains(int y, int x) const {
        return y >= 0 && y < height_ && x >= 0 && x < width_;
    }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 1;
    std::vector<T> data_;
};

using ImageU8 = Image<std::uint8_t>;
using ImageU16 = Image<std::uint16_t>;
using ImageF64 = Image<double>;

/// Horizontal mirror (in place for a copy).
template <typename T>
Image<T> flip_horizontal(const Image<T>& img) {
    Image<T> out(img.height(), img.width(), img.channels());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            for (int c = 0; c < img.channels(); ++c) {
                out.at(y, x, c) = img.at(y, img.width() - 1 - x, c);
            }
        }
    }
    return out;
}

} // namespace gaze
