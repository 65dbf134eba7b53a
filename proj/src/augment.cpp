#include "hazeprior/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "hazeprior/error.hpp"

namespace hazeprior {

namespace {

// Upper clamp that keeps blend weights strictly below one.
constexpr double kBlendCeiling = 1.0 - 1e-9;
constexpr int kWavesPerChannel = 3;
constexpr double kMaxLightFrequency = 1.5;  // cycles per image side

void require(bool condition, const char* message)
{
    if (!condition) throw std::invalid_argument(message);
}

}  // namespace

void AugConfig::validate() const
{
    require(t_low > 0.0 && t_low < t_high && t_high < 1.0, "AugConfig: need 0 < t_low < t_high < 1");
    require(w_n >= 0.0 && non_severe_w_n >= 0.0, "AugConfig: noise weights must be non-negative");
    require(severity_ratio >= 0.0 && severity_ratio <= 1.0, "AugConfig: severity_ratio must be in [0, 1]");
    require(glow_regions_min >= 0 && glow_regions_min <= glow_regions_max,
            "AugConfig: invalid glow region range");
    require(glow_kernel_min >= 1 && glow_kernel_min <= glow_kernel_max, "AugConfig: invalid glow kernel range");
    require(blend_regions >= 0 && blend_region_size >= 1, "AugConfig: invalid blend regions");
    require(blend_perturb_max >= 0.0, "AugConfig: blend_perturb_max must be non-negative");
    require(non_severe_glow_scale >= 0.0, "AugConfig: non_severe_glow_scale must be non-negative");
    require(procedural_low >= 0.0 && procedural_low <= procedural_high && procedural_high <= 1.0,
            "AugConfig: invalid procedural light range");
}

void to_json(nlohmann::json& j, const AugConfig& c)
{
    j = nlohmann::json{{"t_low", c.t_low},
                       {"t_high", c.t_high},
                       {"w_n", c.w_n},
                       {"glow_regions_min", c.glow_regions_min},
                       {"glow_regions_max", c.glow_regions_max},
                       {"glow_kernel_min", c.glow_kernel_min},
                       {"glow_kernel_max", c.glow_kernel_max},
                       {"blend_regions", c.blend_regions},
                       {"blend_region_size", c.blend_region_size},
                       {"blend_perturb_max", c.blend_perturb_max},
                       {"severity_ratio", c.severity_ratio},
                       {"non_severe_w_n", c.non_severe_w_n},
                       {"non_severe_glow_scale", c.non_severe_glow_scale},
                       {"procedural_fallback", c.procedural_fallback},
                       {"procedural_low", c.procedural_low},
                       {"procedural_high", c.procedural_high}};
}

void from_json(const nlohmann::json& j, AugConfig& c)
{
    const AugConfig d = c;
    c.t_low = j.value("t_low", d.t_low);
    c.t_high = j.value("t_high", d.t_high);
    c.w_n = j.value("w_n", d.w_n);
    c.glow_regions_min = j.value("glow_regions_min", d.glow_regions_min);
    c.glow_regions_max = j.value("glow_regions_max", d.glow_regions_max);
    c.glow_kernel_min = j.value("glow_kernel_min", d.glow_kernel_min);
    c.glow_kernel_max = j.value("glow_kernel_max", d.glow_kernel_max);
    c.blend_regions = j.value("blend_regions", d.blend_regions);
    c.blend_region_size = j.value("blend_region_size", d.blend_region_size);
    c.blend_perturb_max = j.value("blend_perturb_max", d.blend_perturb_max);
    c.severity_ratio = j.value("severity_ratio", d.severity_ratio);
    c.non_severe_w_n = j.value("non_severe_w_n", d.non_severe_w_n);
    c.non_severe_glow_scale = j.value("non_severe_glow_scale", d.non_severe_glow_scale);
    c.procedural_fallback = j.value("procedural_fallback", d.procedural_fallback);
    c.procedural_low = j.value("procedural_low", d.procedural_low);
    c.procedural_high = j.value("procedural_high", d.procedural_high);
}

void to_json(nlohmann::json& j, const AugRecord& r)
{
    nlohmann::json waves = nlohmann::json::array();
    for (const auto& channel : r.light.waves) {
        nlohmann::json ch = nlohmann::json::array();
        for (const auto& w : channel) {
            ch.push_back({{"freq_x", w.freq_x}, {"freq_y", w.freq_y}, {"phase", w.phase}, {"weight", w.weight}});
        }
        waves.push_back(std::move(ch));
    }
    nlohmann::json glows = nlohmann::json::array();
    for (const auto& g : r.glows) {
        glows.push_back({{"center_y", g.center_y},
                         {"center_x", g.center_x},
                         {"kernel_size", g.kernel_size},
                         {"amplitude", g.amplitude}});
    }
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& reg : r.blend.regions) {
        regions.push_back({{"top", reg.top}, {"left", reg.left}, {"delta", reg.delta}});
    }
    j = nlohmann::json{
        {"severe", r.severe},
        {"height", r.height},
        {"width", r.width},
        {"channels", r.channels},
        {"t_low", r.t_low},
        {"t_high", r.t_high},
        {"w_n", r.w_n},
        {"light", {{"source_id", r.light.id}, {"waves", std::move(waves)}}},
        {"glows", std::move(glows)},
        {"blend",
         {{"base_t", r.blend.base_t},
          {"region_height", r.blend.region_height},
          {"region_width", r.blend.region_width},
          {"regions", std::move(regions)}}},
        {"noise", {{"seed", r.noise_seed}, {"sequence", r.noise_sequence}, {"weight", r.noise_weight}}},
    };
}

void from_json(const nlohmann::json& j, AugRecord& r)
{
    r.severe = j.at("severe").get<bool>();
    r.height = j.at("height").get<int>();
    r.width = j.at("width").get<int>();
    r.channels = j.at("channels").get<int>();
    r.t_low = j.at("t_low").get<double>();
    r.t_high = j.at("t_high").get<double>();
    r.w_n = j.at("w_n").get<double>();
    const auto& light = j.at("light");
    r.light.id = light.at("source_id").get<std::string>();
    r.light.waves.clear();
    for (const auto& ch : light.at("waves")) {
        std::vector<CosineWave> channel;
        for (const auto& w : ch) {
            channel.push_back({w.at("freq_x").get<double>(), w.at("freq_y").get<double>(),
                               w.at("phase").get<double>(), w.at("weight").get<double>()});
        }
        r.light.waves.push_back(std::move(channel));
    }
    r.glows.clear();
    for (const auto& g : j.at("glows")) {
        r.glows.push_back({g.at("center_y").get<int>(), g.at("center_x").get<int>(),
                           g.at("kernel_size").get<int>(), g.at("amplitude").get<double>()});
    }
    const auto& blend = j.at("blend");
    r.blend.base_t = blend.at("base_t").get<double>();
    r.blend.region_height = blend.at("region_height").get<int>();
    r.blend.region_width = blend.at("region_width").get<int>();
    r.blend.regions.clear();
    for (const auto& reg : blend.at("regions")) {
        r.blend.regions.push_back({reg.at("top").get<int>(), reg.at("left").get<int>(), reg.at("delta").get<double>()});
    }
    const auto& noise = j.at("noise");
    r.noise_seed = noise.at("seed").get<std::uint64_t>();
    r.noise_sequence = noise.at("sequence").get<std::uint64_t>();
    r.noise_weight = noise.at("weight").get<double>();
}

LightBank LightBank::from_directory(const std::filesystem::path& dir)
{
    return LightBank(load_directory(dir));
}

const NamedImage* LightBank::find(const std::string& id) const
{
    for (const auto& entry : entries_) {
        if (entry.id == id) return &entry;
    }
    return nullptr;
}

namespace {

LightSource draw_procedural_source(int channels, RngStream& rng)
{
    LightSource source;
    source.id = "procedural";
    source.waves.resize(static_cast<std::size_t>(channels));
    for (auto& channel : source.waves) {
        for (int k = 0; k < kWavesPerChannel; ++k) {
            CosineWave w;
            w.freq_x = rng.uniform(0.0, kMaxLightFrequency);
            w.freq_y = rng.uniform(0.0, kMaxLightFrequency);
            w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
            w.weight = rng.uniform(0.5, 1.0);
            channel.push_back(w);
        }
    }
    return source;
}

Image render_procedural(const Shape& dims, const LightSource& source, const AugConfig& cfg)
{
    if (static_cast<int>(source.waves.size()) != dims.channels) {
        throw DataError("procedural light source channel count does not match the target");
    }
    Field field(dims);
    for (int y = 0; y < dims.height; ++y) {
        for (int x = 0; x < dims.width; ++x) {
            for (int c = 0; c < dims.channels; ++c) {
                double v = 0.0;
                for (const auto& w : source.waves[static_cast<std::size_t>(c)]) {
                    v += w.weight * std::cos(2.0 * std::numbers::pi *
                                                 (w.freq_x * x / dims.width + w.freq_y * y / dims.height) +
                                             w.phase);
                }
                field.at(y, x, c) = v;
            }
        }
    }
    const auto [lo_it, hi_it] = std::minmax_element(field.data().begin(), field.data().end());
    const double lo = *lo_it;
    const double range = *hi_it - lo;
    for (double& v : field.data()) {
        const double unit = range > 0.0 ? (v - lo) / range : 0.5;
        v = cfg.procedural_low + (cfg.procedural_high - cfg.procedural_low) * unit;
    }
    return Image::clamped(field);
}

}  // namespace

LightMap render_light_map(const LightBank& bank, const Shape& dims, const LightSource& source,
                          const AugConfig& cfg)
{
    if (source.id == "procedural") {
        return {render_procedural(dims, source, cfg), "procedural"};
    }
    const NamedImage* entry = bank.find(source.id);
    if (entry == nullptr) {
        throw DataError("light map '" + source.id + "' is not in the bank");
    }
    Image resized = resize_bilinear(entry->image, dims.height, dims.width);
    return {convert_channels(resized, dims.channels), entry->id};
}

LightMap sample_light_map(const LightBank& bank, const Shape& dims, RngStream& rng, const AugConfig& cfg,
                          LightSource* source)
{
    LightSource drawn;
    if (!bank.empty()) {
        const auto index = rng.uniform_int(0, static_cast<std::int64_t>(bank.size()) - 1);
        drawn.id = bank.at(static_cast<std::size_t>(index)).id;
    } else if (cfg.procedural_fallback) {
        drawn = draw_procedural_source(dims.channels, rng);
    } else {
        throw DataError("light-map bank is empty and the procedural fallback is disabled");
    }
    LightMap map = render_light_map(bank, dims, drawn, cfg);
    if (source != nullptr) *source = std::move(drawn);
    return map;
}

std::vector<GlowBump> draw_glows(int height, int width, RngStream& rng, const AugConfig& cfg, double amp_scale)
{
    const auto count = rng.uniform_int(cfg.glow_regions_min, cfg.glow_regions_max);
    std::vector<GlowBump> glows;
    glows.reserve(static_cast<std::size_t>(count));
    for (std::int64_t i = 0; i < count; ++i) {
        GlowBump g;
        g.kernel_size = static_cast<int>(rng.uniform_int(cfg.glow_kernel_min, cfg.glow_kernel_max));
        g.center_y = static_cast<int>(rng.uniform_int(0, height - 1));
        g.center_x = static_cast<int>(rng.uniform_int(0, width - 1));
        g.amplitude = (1.0 - rng.uniform()) * amp_scale;  // (0, 1] before scaling
        glows.push_back(g);
    }
    return glows;
}

LightMap apply_glows(const LightMap& light, const std::vector<GlowBump>& glows)
{
    if (glows.empty()) {
        return light;
    }
    const Image& src = light.image;
    Field boosted = src.to_field();
    for (const auto& g : glows) {
        const double sigma = g.kernel_size / 4.0;
        const double inv_two_var = 1.0 / (2.0 * sigma * sigma);
        const int half = g.kernel_size / 2;
        const int y0 = std::max(0, g.center_y - half);
        const int y1 = std::min(src.height() - 1, g.center_y + half);
        const int x0 = std::max(0, g.center_x - half);
        const int x1 = std::min(src.width() - 1, g.center_x + half);
        for (int y = y0; y <= y1; ++y) {
            const double dy = y - g.center_y;
            for (int x = x0; x <= x1; ++x) {
                const double dx = x - g.center_x;
                const double bump = g.amplitude * std::exp(-(dy * dy + dx * dx) * inv_two_var);
                for (int c = 0; c < src.channels(); ++c) boosted.at(y, x, c) += bump;
            }
        }
    }
    return {Image::clamped(boosted), light.source_id};
}

LightMap add_glow(const LightMap& light, RngStream& rng, const AugConfig& cfg, double amp_scale,
                  std::vector<GlowBump>* drawn)
{
    auto glows = draw_glows(light.image.height(), light.image.width(), rng, cfg, amp_scale);
    LightMap out = apply_glows(light, glows);
    if (drawn != nullptr) *drawn = std::move(glows);
    return out;
}

BlendSpec draw_blend(int height, int width, RngStream& rng, const AugConfig& cfg)
{
    BlendSpec spec;
    spec.base_t = rng.uniform(cfg.t_low, cfg.t_high);
    spec.region_height = std::min(cfg.blend_region_size, height);
    spec.region_width = std::min(cfg.blend_region_size, width);
    for (int i = 0; i < cfg.blend_regions; ++i) {
        BlendRegion r;
        r.top = static_cast<int>(rng.uniform_int(0, height - spec.region_height));
        r.left = static_cast<int>(rng.uniform_int(0, width - spec.region_width));
        r.delta = rng.uniform(0.0, cfg.blend_perturb_max);
        spec.regions.push_back(r);
    }
    return spec;
}

BlendMap render_blend(int height, int width, const BlendSpec& spec)
{
    BlendMap blend{Field(Shape{height, width, 1}, spec.base_t), spec.base_t};
    // Regions overwrite rather than accumulate, so no value exceeds base_t + max delta.
    for (const auto& r : spec.regions) {
        const double value = spec.base_t + r.delta;
        for (int y = r.top; y < std::min(height, r.top + spec.region_height); ++y) {
            for (int x = r.left; x < std::min(width, r.left + spec.region_width); ++x) {
                blend.map.at(y, x, 0) = value;
            }
        }
    }
    for (double& v : blend.map.data()) v = std::min(v, kBlendCeiling);
    return blend;
}

BlendMap gen_blend_map(int height, int width, RngStream& rng, const AugConfig& cfg, BlendSpec* drawn)
{
    BlendSpec spec = draw_blend(height, width, rng, cfg);
    BlendMap blend = render_blend(height, width, spec);
    if (drawn != nullptr) *drawn = std::move(spec);
    return blend;
}

double noise_weight(const AugConfig& cfg, bool severe)
{
    return (severe ? cfg.w_n : cfg.non_severe_w_n) * cfg.t_high;
}

NoiseField gen_noise(const Shape& dims, RngStream& rng, double weight)
{
    NoiseField noise{Field(dims), weight};
    if (weight == 0.0) {
        return noise;
    }
    for (double& v : noise.map.data()) {
        double z = rng.normal();
        while (z < 0.0 || z > 3.0) z = rng.normal();
        v = weight * z;
    }
    return noise;
}

NoiseField gen_noise(const Shape& dims, RngStream& rng, const AugConfig& cfg, bool severe)
{
    return gen_noise(dims, rng, noise_weight(cfg, severe));
}

Field compose_unclamped(const Image& clear, const BlendMap& blend, const LightMap& light, const NoiseField& noise)
{
    const Shape& s = clear.shape();
    if (blend.map.height() != s.height || blend.map.width() != s.width || blend.map.channels() != 1 ||
        light.image.shape() != s || noise.map.shape() != s) {
        throw std::invalid_argument("compose: operand dimensions do not match");
    }
    Field out(s);
    for (int y = 0; y < s.height; ++y) {
        for (int x = 0; x < s.width; ++x) {
            const double w = blend.map.at(y, x, 0);
            for (int c = 0; c < s.channels; ++c) {
                out.at(y, x, c) = w * clear.at(y, x, c) + (1.0 - w) * light.image.at(y, x, c) + noise.map.at(y, x, c);
            }
        }
    }
    return out;
}

Image compose(const Image& clear, const BlendMap& blend, const LightMap& light, const NoiseField& noise)
{
    return Image::clamped(compose_unclamped(clear, blend, light, noise));
}

Augmented augment(const Image& clear, const AugConfig& cfg, RngStream& rng, const LightBank& bank)
{
    cfg.validate();
    const Image normalized = minmax_normalize(clear).image;
    const Shape& dims = normalized.shape();

    AugRecord rec;
    rec.height = dims.height;
    rec.width = dims.width;
    rec.channels = dims.channels;
    rec.t_low = cfg.t_low;
    rec.t_high = cfg.t_high;
    rec.w_n = cfg.w_n;
    rec.severe = rng.bernoulli(cfg.severity_ratio);

    const LightMap base = sample_light_map(bank, dims, rng, cfg, &rec.light);
    const LightMap light =
        add_glow(base, rng, cfg, rec.severe ? 1.0 : cfg.non_severe_glow_scale, &rec.glows);
    const BlendMap blend = gen_blend_map(dims.height, dims.width, rng, cfg, &rec.blend);

    rec.noise_seed = rng.seed();
    rec.noise_sequence = rng.next_u64();
    rec.noise_weight = noise_weight(cfg, rec.severe);
    RngStream noise_rng(rec.noise_seed, rec.noise_sequence);
    const NoiseField noise = gen_noise(dims, noise_rng, rec.noise_weight);

    return {compose(normalized, blend, light, noise), std::move(rec)};
}

Image replay(const AugRecord& rec, const Image& clear, const AugConfig& cfg, const LightBank& bank)
{
    const Image normalized = minmax_normalize(clear).image;
    const Shape& dims = normalized.shape();
    if (dims != Shape{rec.height, rec.width, rec.channels}) {
        throw std::invalid_argument("replay: record dimensions do not match the clear image");
    }
    const LightMap light = apply_glows(render_light_map(bank, dims, rec.light, cfg), rec.glows);
    const BlendMap blend = render_blend(dims.height, dims.width, rec.blend);
    RngStream noise_rng(rec.noise_seed, rec.noise_sequence);
    const NoiseField noise = gen_noise(dims, noise_rng, rec.noise_weight);
    return compose(normalized, blend, light, noise);
}

}  // namespace hazeprior
