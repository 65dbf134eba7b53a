#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "hazeprior/augment.hpp"
#include "hazeprior/prior_trainer.hpp"
#include "hazeprior/refiner.hpp"

namespace hazeprior {

/// Everything a command can be configured with. A config file is a JSON
/// object with optional "preset", "augment", "train", "refine" and
/// "light_bank" members; members override the preset, and command-line flags
/// override the file.
struct PipelineConfig {
    AugConfig augment;
    TrainConfig train;
    RefineConfig refine;
    std::optional<std::filesystem::path> light_bank;
};

/// "default", "full-prior" or "full-refine".
PipelineConfig preset_config(const std::string& name);

PipelineConfig config_from_json(const nlohmann::json& doc);
PipelineConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const PipelineConfig& cfg);

}  // namespace hazeprior
