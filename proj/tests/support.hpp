#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hazeprior/augment.hpp"
#include "hazeprior/image.hpp"
#include "hazeprior/rng.hpp"

namespace testsupport {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("hazeprior_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline hazeprior::Image random_image(hazeprior::RngStream& rng, int h, int w, int c)
{
    hazeprior::Image img(h, w, c);
    for (double& v : img.data()) v = rng.uniform();
    return img;
}

inline hazeprior::Field random_field(hazeprior::RngStream& rng, int h, int w, int c, double lo, double hi)
{
    hazeprior::Field f({h, w, c});
    for (double& v : f.data()) v = rng.uniform(lo, hi);
    return f;
}

inline void write_ppm(const fs::path& path, int w, int h, const std::vector<unsigned char>& rgb)
{
    std::ofstream out(path, std::ios::binary);
    out << "P6\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

inline std::vector<unsigned char> read_bytes(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Scalar reference for I = Wb*J + (1-Wb)*L + eps, written independently of the library.
inline std::vector<double> compose_oracle(const hazeprior::Image& j, const hazeprior::BlendMap& wb,
                                          const hazeprior::LightMap& l, const hazeprior::NoiseField& eps)
{
    std::vector<double> out;
    out.reserve(j.data().size());
    for (int y = 0; y < j.height(); ++y) {
        for (int x = 0; x < j.width(); ++x) {
            for (int c = 0; c < j.channels(); ++c) {
                const double b = wb.map.at(y, x, 0);
                out.push_back(b * j.at(y, x, c) + (1.0 - b) * l.image.at(y, x, c) + eps.map.at(y, x, c));
            }
        }
    }
    return out;
}

inline double psnr_oracle(const hazeprior::Image& a, const hazeprior::Image& b)
{
    double se = 0.0;
    std::size_t n = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            for (int c = 0; c < a.channels(); ++c) {
                const double d = a.at(y, x, c) - b.at(y, x, c);
                se += d * d;
                ++n;
            }
        }
    }
    return 10.0 * std::log10(1.0 / (se / static_cast<double>(n)));
}

// Population std of BT.601 luma on a 0..255 scale, by the two-pass textbook formula.
inline double contrast_oracle(const hazeprior::Image& img)
{
    std::vector<double> luma;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            if (img.channels() == 1) {
                luma.push_back(255.0 * img.at(y, x, 0));
            } else {
                luma.push_back(255.0 * (0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2)));
            }
        }
    }
    double mean = 0.0;
    for (double v : luma) mean += v;
    mean /= static_cast<double>(luma.size());
    double var = 0.0;
    for (double v : luma) var += (v - mean) * (v - mean);
    return std::sqrt(var / static_cast<double>(luma.size()));
}

}  // namespace testsupport
