#include "hazeprior/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

namespace hazeprior {

namespace fs = std::filesystem;

namespace {

using Code = ImageIoError::Code;

std::vector<unsigned char> read_bytes(const fs::path& path)
{
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
        throw ImageIoError(Code::NotFound, "image file not found: " + path.string());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ImageIoError(Code::NotFound, "cannot open image file: " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

constexpr std::array<unsigned char, 8> kPngSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

struct PngReadSource {
    const std::vector<unsigned char>* bytes;
    std::size_t offset;
};

void png_read_from_memory(png_structp png, png_bytep out, png_size_t length)
{
    auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
    if (src->offset + length > src->bytes->size()) {
        png_error(png, "unexpected end of data");
    }
    std::memcpy(out, src->bytes->data() + src->offset, length);
    src->offset += length;
}

// libpng reports failures through longjmp; errors are recorded here and
// translated to exceptions after setjmp returns.
struct PngErrorState {
    bool header_done = false;
    std::string message;
};

void png_error_handler(png_structp png, png_const_charp msg)
{
    auto* state = static_cast<PngErrorState*>(png_get_error_ptr(png));
    state->message = msg;
    png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

Image decode_png(const std::vector<unsigned char>& bytes, const fs::path& path)
{
    PngErrorState err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler,
                                             png_warning_handler);
    if (png == nullptr) {
        throw std::bad_alloc();
    }
    png_infop info = png_create_info_struct(png);
    PngReadSource src{&bytes, 0};
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int out_channels = 0;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        const Code code = err.header_done ? Code::CorruptData : Code::CorruptHeader;
        throw ImageIoError(code, "corrupt PNG " + path.string() + ": " + err.message);
    }

    png_set_read_fn(png, &src, png_read_from_memory);
    png_read_info(png, info);
    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    err.header_done = true;

    out_channels = png_get_channels(png, info);
    if (out_channels != 1 && out_channels != 3) {
        png_error(png, "unsupported channel layout");
    }
    const std::size_t stride = png_get_rowbytes(png, info);
    pixels.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image image(static_cast<int>(height), static_cast<int>(width), out_channels);
    auto data = image.data();
    for (png_uint_32 y = 0; y < height; ++y) {
        const unsigned char* row = rows[y];
        for (std::size_t i = 0; i < static_cast<std::size_t>(width) * out_channels; ++i) {
            data[y * static_cast<std::size_t>(width) * out_channels + i] = row[i] / 255.0;
        }
    }
    return image;
}

// Binary PPM: "P6" <ws> width <ws> height <ws> maxval <single ws> raster.
Image decode_ppm(const std::vector<unsigned char>& bytes, const fs::path& path)
{
    std::size_t pos = 2;
    auto corrupt = [&](const std::string& what) {
        return ImageIoError(Code::CorruptHeader, "corrupt PPM header in " + path.string() + ": " + what);
    };
    auto next_int = [&]() -> long {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
            throw corrupt("expected integer");
        }
        long value = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            value = value * 10 + (bytes[pos] - '0');
            if (value > (1L << 24)) throw corrupt("value too large");
            ++pos;
        }
        return value;
    };
    const long width = next_int();
    const long height = next_int();
    const long maxval = next_int();
    if (width <= 0 || height <= 0) throw corrupt("non-positive dimensions");
    if (maxval != 255) {
        throw ImageIoError(Code::UnsupportedFormat, "only 8-bit PPM is supported: " + path.string());
    }
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw corrupt("missing raster separator");
    ++pos;
    const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3;
    if (bytes.size() - pos < count) {
        throw ImageIoError(Code::CorruptData, "truncated PPM raster: " + path.string());
    }
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) data[i] = bytes[pos + i] / 255.0;
    return Image(Shape{static_cast<int>(height), static_cast<int>(width), 3}, std::move(data));
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

}  // namespace

Image load_image(const fs::path& path)
{
    const auto bytes = read_bytes(path);
    if (bytes.size() >= kPngSignature.size() &&
        std::equal(kPngSignature.begin(), kPngSignature.end(), bytes.begin())) {
        return decode_png(bytes, path);
    }
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
        return decode_ppm(bytes, path);
    }
    throw ImageIoError(Code::UnsupportedFormat, "unsupported image format: " + path.string());
}

void save_image(const Image& image, const fs::path& path)
{
    if (image.empty()) {
        throw std::invalid_argument("save_image: empty image");
    }
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
    if (!file) {
        throw ImageIoError(Code::Unwritable, "cannot write image: " + path.string());
    }
    const int channels = image.channels();
    const std::size_t row_len = static_cast<std::size_t>(image.width()) * channels;
    std::vector<unsigned char> bytes(row_len * image.height());
    const auto data = image.data();
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<unsigned char>(std::lround(std::clamp(data[i], 0.0, 1.0) * 255.0));
    }

    PngErrorState err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_handler,
                                              png_warning_handler);
    if (png == nullptr) {
        throw std::bad_alloc();
    }
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError(Code::Unwritable, "PNG encoding failed for " + path.string() + ": " + err.message);
    }
    png_init_io(png, file.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()),
                 static_cast<png_uint_32>(image.height()), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.height(); ++y) {
        png_write_row(png, bytes.data() + static_cast<std::size_t>(y) * row_len);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) {
        throw ImageIoError(Code::Unwritable, "cannot flush image: " + path.string());
    }
}

std::vector<fs::path> list_images(const fs::path& dir)
{
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) {
        throw ImageIoError(Code::NotFound, "not a directory: " + dir.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".png" || ext == ".ppm") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

std::vector<NamedImage> load_directory(const fs::path& dir)
{
    std::vector<NamedImage> images;
    for (const auto& path : list_images(dir)) {
        images.push_back({path.filename().string(), load_image(path)});
    }
    return images;
}

}  // namespace hazeprior
