#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hazeprior/image.hpp"
#include "hazeprior/image_io.hpp"
#include "hazeprior/rng.hpp"

namespace hazeprior {

/// Parameters of the degradation I = Wb * J + (1 - Wb) * L + eps.
///
/// Defaults are the full training values: t ~ U[0.001, 0.1], 2..10 glow
/// regions with kernel sizes 15..80, eight 64x64 blend regions perturbed by
/// U(0, 0.04), and noise weight W_n = 0.1.
struct AugConfig {
    double t_low = 0.001;
    double t_high = 0.1;
    double w_n = 0.1;

    int glow_regions_min = 2;
    int glow_regions_max = 10;
    int glow_kernel_min = 15;
    int glow_kernel_max = 80;

    int blend_regions = 8;
    int blend_region_size = 64;
    double blend_perturb_max = 0.04;

    /// Probability that an augmentation uses the severe noise and glow settings.
    double severity_ratio = 1.0;
    /// Noise weight used when the severe flag is off.
    double non_severe_w_n = 0.01;
    /// Glow amplitude multiplier used when the severe flag is off.
    double non_severe_glow_scale = 0.5;

    /// Synthesize a light map when the bank is empty or absent.
    bool procedural_fallback = true;
    /// Intensity range the procedural light field is mapped into.
    double procedural_low = 0.05;
    double procedural_high = 0.45;

    void validate() const;
};

void to_json(nlohmann::json& j, const AugConfig& cfg);
void from_json(const nlohmann::json& j, AugConfig& cfg);

/// One cosine component of a procedural light field.
struct CosineWave {
    double freq_x = 0.0;
    double freq_y = 0.0;
    double phase = 0.0;
    double weight = 0.0;
};

/// Where a light map came from: a bank entry (by file name) or a procedural
/// field described by three cosine waves per channel.
struct LightSource {
    std::string id = "procedural";
    std::vector<std::vector<CosineWave>> waves;  // [channel][wave], procedural only
};

struct LightMap {
    Image image;
    std::string source_id;
};

struct GlowBump {
    int center_y = 0;
    int center_x = 0;
    int kernel_size = 0;
    double amplitude = 0.0;
};

struct BlendRegion {
    int top = 0;
    int left = 0;
    double delta = 0.0;
};

/// Single-channel blending weights, broadcast across color channels.
struct BlendMap {
    Field map;  // H x W x 1, every value in (0, 1)
    double base_t = 0.0;
};

struct BlendSpec {
    double base_t = 0.0;
    int region_height = 0;
    int region_width = 0;
    std::vector<BlendRegion> regions;
};

struct NoiseField {
    Field map;  // H x W x C, every value in [0, 3 * weight]
    double weight = 0.0;
};

/// Everything drawn for one augmentation. Replaying it on the same clear
/// image reproduces the augmented image bit-exactly.
struct AugRecord {
    bool severe = true;
    LightSource light;
    std::vector<GlowBump> glows;
    BlendSpec blend;
    std::uint64_t noise_seed = 0;
    std::uint64_t noise_sequence = 0;
    double noise_weight = 0.0;
    int height = 0;
    int width = 0;
    int channels = 0;
    double t_low = 0.0;
    double t_high = 0.0;
    double w_n = 0.0;
};

void to_json(nlohmann::json& j, const AugRecord& rec);
void from_json(const nlohmann::json& j, AugRecord& rec);

/// Light-map bank: images kept in lexicographic filename order.
class LightBank {
public:
    LightBank() = default;
    explicit LightBank(std::vector<NamedImage> entries) : entries_(std::move(entries)) {}
    static LightBank from_directory(const std::filesystem::path& dir);

    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    const NamedImage& at(std::size_t i) const { return entries_.at(i); }
    const NamedImage* find(const std::string& id) const;

private:
    std::vector<NamedImage> entries_;
};

/// Picks a bank entry uniformly and resizes it to (height, width, channels),
/// or synthesizes a low-frequency field when the bank is empty.
LightMap sample_light_map(const LightBank& bank, const Shape& dims, RngStream& rng,
                          const AugConfig& cfg, LightSource* source = nullptr);

LightMap render_light_map(const LightBank& bank, const Shape& dims, const LightSource& source,
                          const AugConfig& cfg);

/// Draws glow bumps. Sizes follow cfg; amplitude is U(0, 1] times amp_scale.
std::vector<GlowBump> draw_glows(int height, int width, RngStream& rng, const AugConfig& cfg,
                                 double amp_scale = 1.0);

/// Adds isotropic Gaussian bumps (std = kernel/4, support kernel x kernel)
/// equally to every channel, then clamps to [0, 1].
LightMap apply_glows(const LightMap& light, const std::vector<GlowBump>& glows);

LightMap add_glow(const LightMap& light, RngStream& rng, const AugConfig& cfg, double amp_scale = 1.0,
                  std::vector<GlowBump>* drawn = nullptr);

BlendSpec draw_blend(int height, int width, RngStream& rng, const AugConfig& cfg);
BlendMap render_blend(int height, int width, const BlendSpec& spec);
BlendMap gen_blend_map(int height, int width, RngStream& rng, const AugConfig& cfg,
                       BlendSpec* drawn = nullptr);

/// Noise weight W_n * T_high (severe) or non_severe_w_n * T_high.
double noise_weight(const AugConfig& cfg, bool severe);

/// Half-normal noise truncated to [0, 3]: draws outside are resampled.
NoiseField gen_noise(const Shape& dims, RngStream& rng, double weight);
NoiseField gen_noise(const Shape& dims, RngStream& rng, const AugConfig& cfg, bool severe);

/// I = Wb * J + (1 - Wb) * L + eps, clamped to [0, 1].
Image compose(const Image& clear, const BlendMap& blend, const LightMap& light, const NoiseField& noise);

/// compose() before the final clamp.
Field compose_unclamped(const Image& clear, const BlendMap& blend, const LightMap& light,
                        const NoiseField& noise);

struct Augmented {
    Image image;
    AugRecord record;
};

/// Full pipeline: min-max normalize, draw severity, light map, glow, blend
/// map, noise, compose.
Augmented augment(const Image& clear, const AugConfig& cfg, RngStream& rng, const LightBank& bank = {});

/// Re-renders an augmentation from its record.
Image replay(const AugRecord& record, const Image& clear, const AugConfig& cfg, const LightBank& bank = {});

}  // namespace hazeprior
