#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "hazeprior/image.hpp"

namespace hazeprior {

class ImageIoError : public std::runtime_error {
public:
    enum class Code { NotFound, UnsupportedFormat, CorruptHeader, CorruptData, Unwritable };

    ImageIoError(Code code, const std::string& message)
        : std::runtime_error(message), code_(code)
    {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Reads an 8-bit PNG (gray, gray+alpha, RGB, RGBA, palette) or a binary P6
/// PPM. Bytes map to [0, 1] by division by 255; alpha is dropped.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG, rounding each intensity to the nearest byte. Output
/// bytes depend only on the pixel values.
void save_image(const Image& image, const std::filesystem::path& path);

struct NamedImage {
    std::string id;  // file name within its directory
    Image image;
};

/// Image files (.png, .ppm) of a directory in lexicographic filename order.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

std::vector<NamedImage> load_directory(const std::filesystem::path& dir);

}  // namespace hazeprior
