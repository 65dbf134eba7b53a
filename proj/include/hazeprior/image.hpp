#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hazeprior {

/// Height, width and channel count of a dense row-major pixel array.
struct Shape {
    int height = 0;
    int width = 0;
    int channels = 0;

    std::size_t size() const
    {
        return static_cast<std::size_t>(height) * static_cast<std::size_t>(width) *
               static_cast<std::size_t>(channels);
    }
    bool operator==(const Shape&) const = default;
};

/// Dense H x W x C array of reals with no range constraint. Used for raw model
/// outputs, noise, gradients and variance maps.
class Field {
public:
    Field() = default;
    Field(Shape shape, double fill = 0.0);
    Field(Shape shape, std::vector<double> data);

    const Shape& shape() const { return shape_; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    int channels() const { return shape_.channels; }
    bool empty() const { return data_.empty(); }

    std::size_t index(int y, int x, int c) const
    {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(shape_.width) +
                static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(shape_.channels) +
               static_cast<std::size_t>(c);
    }
    double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

private:
    Shape shape_{};
    std::vector<double> data_;
};

/// Pixel container with intensities in [0, 1], stored row-major with
/// interleaved channels. Channel count is 1 or 3.
///
/// Constructors reject out-of-range or non-finite intensities; writers going
/// through at() must keep values inside [0, 1].
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, double fill = 0.0);
    Image(Shape shape, std::vector<double> data);

    /// Builds an image from arbitrary values by clamping into [0, 1]. NaN maps to 0.
    static Image clamped(const Field& field);

    const Shape& shape() const { return shape_; }
    int height() const { return shape_.height; }
    int width() const { return shape_.width; }
    int channels() const { return shape_.channels; }
    bool empty() const { return data_.empty(); }

    std::size_t index(int y, int x, int c) const
    {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(shape_.width) +
                static_cast<std::size_t>(x)) *
                   static_cast<std::size_t>(shape_.channels) +
               static_cast<std::size_t>(c);
    }
    double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
    double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    Field to_field() const { return Field(shape_, data_); }

    bool operator==(const Image&) const = default;

private:
    Shape shape_{};
    std::vector<double> data_;
};

struct NormalizeResult {
    Image image;
    bool degenerate = false;  // max == min, image returned as all zeros
};

/// (x - min) / (max - min) computed jointly over every channel.
NormalizeResult minmax_normalize(const Image& image);

/// ITU-R BT.601 luma. Single-channel input is returned unchanged.
Image to_grayscale(const Image& image);

/// Population standard deviation of luminance, on a 0-255 scale.
double rms_contrast(const Image& image);

/// Bilinear resampling with half-pixel centers; an identity resize is exact.
Image resize_bilinear(const Image& image, int height, int width);

/// Copies the window [top, top+height) x [left, left+width).
Image crop(const Image& image, int top, int left, int height, int width);
Field crop(const Field& field, int top, int left, int height, int width);

/// Replicates or collapses channels: 1 -> 3 copies luma, 3 -> 1 uses to_grayscale.
Image convert_channels(const Image& image, int channels);

}  // namespace hazeprior
