#include "hazeprior/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace hazeprior {

namespace {

void check_shape(const Shape& shape, bool image)
{
    if (shape.height <= 0 || shape.width <= 0 || shape.channels <= 0) {
        throw std::invalid_argument("shape must have positive height, width and channels");
    }
    if (image && shape.channels != 1 && shape.channels != 3) {
        throw std::invalid_argument("image channel count must be 1 or 3, got " +
                                    std::to_string(shape.channels));
    }
}

}  // namespace

Field::Field(Shape shape, double fill) : shape_(shape)
{
    check_shape(shape_, false);
    data_.assign(shape_.size(), fill);
}

Field::Field(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data))
{
    check_shape(shape_, false);
    if (data_.size() != shape_.size()) {
        throw std::invalid_argument("field data length does not match its shape");
    }
}

Image::Image(int height, int width, int channels, double fill)
    : shape_{height, width, channels}
{
    check_shape(shape_, true);
    if (!(fill >= 0.0 && fill <= 1.0)) {
        throw std::invalid_argument("image fill value outside [0, 1]");
    }
    data_.assign(shape_.size(), fill);
}

Image::Image(Shape shape, std::vector<double> data) : shape_(shape), data_(std::move(data))
{
    check_shape(shape_, true);
    if (data_.size() != shape_.size()) {
        throw std::invalid_argument("image data length does not match its shape");
    }
    for (double v : data_) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("image intensity outside [0, 1]");
        }
    }
}

Image Image::clamped(const Field& field)
{
    std::vector<double> out(field.data().begin(), field.data().end());
    for (double& v : out) {
        v = std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
    }
    return Image(field.shape(), std::move(out));
}

NormalizeResult minmax_normalize(const Image& image)
{
    if (image.empty()) {
        throw std::invalid_argument("minmax_normalize: empty image");
    }
    const auto [lo_it, hi_it] = std::minmax_element(image.data().begin(), image.data().end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    if (range <= 0.0) {
        return {Image(image.height(), image.width(), image.channels(), 0.0), true};
    }
    std::vector<double> out(image.data().size());
    std::transform(image.data().begin(), image.data().end(), out.begin(),
                   [&](double v) { return std::clamp((v - lo) / range, 0.0, 1.0); });
    return {Image(image.shape(), std::move(out)), false};
}

Image to_grayscale(const Image& image)
{
    if (image.channels() == 1) {
        return image;
    }
    Image gray(image.height(), image.width(), 1);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const double luma = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) +
                                0.114 * image.at(y, x, 2);
            gray.at(y, x, 0) = std::clamp(luma, 0.0, 1.0);
        }
    }
    return gray;
}

double rms_contrast(const Image& image)
{
    const Image gray = to_grayscale(image);
    const auto values = gray.data();
    // Welford updates: a constant image gives exactly zero.
    double mean = 0.0;
    double ss = 0.0;
    std::size_t n = 0;
    for (double v : values) {
        ++n;
        const double delta = v - mean;
        mean += delta / static_cast<double>(n);
        ss += delta * (v - mean);
    }
    return std::sqrt(std::max(0.0, ss) / static_cast<double>(n)) * 255.0;
}

Image resize_bilinear(const Image& image, int height, int width)
{
    if (height <= 0 || width <= 0) {
        throw std::invalid_argument("resize_bilinear: target dims must be positive");
    }
    if (height == image.height() && width == image.width()) {
        return image;
    }
    Image out(height, width, image.channels());
    const double sy = static_cast<double>(image.height()) / height;
    const double sx = static_cast<double>(image.width()) / width;
    for (int y = 0; y < height; ++y) {
        const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double wy = fy - y0;
        for (int x = 0; x < width; ++x) {
            const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double wx = fx - x0;
            for (int c = 0; c < image.channels(); ++c) {
                const double top = image.at(y0, x0, c) * (1.0 - wx) + image.at(y0, x1, c) * wx;
                const double bot = image.at(y1, x0, c) * (1.0 - wx) + image.at(y1, x1, c) * wx;
                out.at(y, x, c) = std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0);
            }
        }
    }
    return out;
}

namespace {

template <typename T>
void check_window(const T& src, int top, int left, int height, int width)
{
    if (top < 0 || left < 0 || height <= 0 || width <= 0 || top + height > src.height() ||
        left + width > src.width()) {
        throw std::invalid_argument("crop window outside the source");
    }
}

template <typename T>
void copy_window(const T& src, T& dst, int top, int left)
{
    for (int y = 0; y < dst.height(); ++y) {
        for (int x = 0; x < dst.width(); ++x) {
            for (int c = 0; c < dst.channels(); ++c) {
                dst.at(y, x, c) = src.at(top + y, left + x, c);
            }
        }
    }
}

}  // namespace

Image crop(const Image& image, int top, int left, int height, int width)
{
    check_window(image, top, left, height, width);
    Image out(height, width, image.channels());
    copy_window(image, out, top, left);
    return out;
}

Field crop(const Field& field, int top, int left, int height, int width)
{
    check_window(field, top, left, height, width);
    Field out(Shape{height, width, field.channels()});
    copy_window(field, out, top, left);
    return out;
}

Image convert_channels(const Image& image, int channels)
{
    if (channels == image.channels()) {
        return image;
    }
    if (channels == 1) {
        return to_grayscale(image);
    }
    if (channels != 3 || image.channels() != 1) {
        throw std::invalid_argument("convert_channels: unsupported conversion");
    }
    Image out(image.height(), image.width(), 3);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = image.at(y, x, 0);
        }
    }
    return out;
}

}  // namespace hazeprior
