#include "hazeprior/scenes.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace hazeprior {

namespace {

using Color = std::array<double, 3>;

void fill_rect(Field& f, int top, int left, int h, int w, const Color& color)
{
    for (int y = std::max(0, top); y < std::min(f.height(), top + h); ++y) {
        for (int x = std::max(0, left); x < std::min(f.width(), left + w); ++x) {
            for (int c = 0; c < 3; ++c) f.at(y, x, c) = color[static_cast<std::size_t>(c)];
        }
    }
}

Color jitter(const Color& base, double amount, RngStream& rng)
{
    Color out{};
    for (std::size_t c = 0; c < 3; ++c) out[c] = std::clamp(base[c] + rng.uniform(-amount, amount), 0.0, 1.0);
    return out;
}

}  // namespace

Image procedural_scene(int height, int width, RngStream& rng)
{
    Field f(Shape{height, width, 3});

    const Color sky_top = jitter({0.02, 0.03, 0.08}, 0.02, rng);
    const Color sky_low = jitter({0.10, 0.10, 0.18}, 0.04, rng);
    for (int y = 0; y < height; ++y) {
        const double a = static_cast<double>(y) / std::max(1, height - 1);
        for (int x = 0; x < width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                f.at(y, x, static_cast<int>(c)) = (1.0 - a) * sky_top[c] + a * sky_low[c];
            }
        }
    }

    const int horizon = static_cast<int>(height * rng.uniform(0.75, 0.85));
    int x = -static_cast<int>(rng.uniform_int(0, std::max(1, width / 8)));
    while (x < width) {
        const int bw = std::max(3, static_cast<int>(width * rng.uniform(0.10, 0.25)));
        const int bh = std::max(3, static_cast<int>(horizon * rng.uniform(0.30, 0.85)));
        const int top = horizon - bh;
        const Color wall = jitter({0.16, 0.14, 0.13}, 0.08, rng);
        fill_rect(f, top, x, bh, bw, wall);

        const int cell = std::max(3, width / 24);
        const Color lit = jitter({0.95, 0.82, 0.50}, 0.08, rng);
        const double lit_ratio = rng.uniform(0.25, 0.6);
        for (int wy = top + 1; wy + cell - 1 < horizon; wy += cell) {
            for (int wx = x + 1; wx + cell - 1 < x + bw; wx += cell) {
                if (rng.bernoulli(lit_ratio)) {
                    fill_rect(f, wy, wx, cell - 1, cell - 1, jitter(lit, 0.05, rng));
                } else {
                    fill_rect(f, wy, wx, cell - 1, cell - 1, jitter({0.04, 0.04, 0.05}, 0.02, rng));
                }
            }
        }
        x += bw + static_cast<int>(rng.uniform_int(0, std::max(1, width / 16)));
    }

    const Color road = jitter({0.22, 0.21, 0.20}, 0.04, rng);
    fill_rect(f, horizon, 0, height - horizon, width, road);
    const int stripe_h = std::max(1, height / 64);
    const int stripe_y = horizon + (height - horizon) / 2;
    for (int sx = 0; sx < width; sx += std::max(4, width / 8)) {
        fill_rect(f, stripe_y, sx, stripe_h, std::max(2, width / 16), {0.85, 0.85, 0.80});
    }

    const auto lamps = rng.uniform_int(1, 4);
    for (std::int64_t i = 0; i < lamps; ++i) {
        const int ly = static_cast<int>(rng.uniform_int(0, std::max(0, horizon - 1)));
        const int lx = static_cast<int>(rng.uniform_int(0, width - 1));
        const double radius = std::max(1.0, width * rng.uniform(0.01, 0.03));
        for (int y = std::max(0, ly - 3 * static_cast<int>(radius)); y < std::min(height, ly + 3 * static_cast<int>(radius) + 1); ++y) {
            for (int xx = std::max(0, lx - 3 * static_cast<int>(radius)); xx < std::min(width, lx + 3 * static_cast<int>(radius) + 1); ++xx) {
                const double d2 = (y - ly) * (y - ly) + (xx - lx) * (xx - lx);
                const double glow = std::exp(-d2 / (2.0 * radius * radius));
                for (int c = 0; c < 3; ++c) f.at(y, xx, c) += 0.8 * glow;
            }
        }
    }

    // Fine grain so that no region is perfectly flat.
    for (double& v : f.data()) v += rng.uniform(-0.015, 0.015);
    return Image::clamped(f);
}

}  // namespace hazeprior
