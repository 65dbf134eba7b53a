#include "hazeprior/config.hpp"

#include <fstream>

#include "hazeprior/error.hpp"

namespace hazeprior {

PipelineConfig preset_config(const std::string& name)
{
    PipelineConfig cfg;
    if (name == "default") return cfg;
    if (name == "full-prior") {
        cfg.train = TrainConfig::full_scale();
        return cfg;
    }
    if (name == "full-refine") {
        cfg.refine = RefineConfig::full_scale();
        return cfg;
    }
    throw std::invalid_argument("unknown preset '" + name + "' (expected default, full-prior or full-refine)");
}

PipelineConfig config_from_json(const nlohmann::json& doc)
{
    if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
    PipelineConfig cfg = preset_config(doc.value("preset", std::string("default")));
    if (doc.contains("augment")) from_json(doc.at("augment"), cfg.augment);
    if (doc.contains("train")) from_json(doc.at("train"), cfg.train);
    if (doc.contains("refine")) from_json(doc.at("refine"), cfg.refine);
    if (doc.contains("light_bank")) cfg.light_bank = doc.at("light_bank").get<std::string>();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw DataError("cannot read config file: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("invalid config file " + path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

nlohmann::json config_to_json(const PipelineConfig& cfg)
{
    nlohmann::json doc{{"augment", cfg.augment}, {"train", cfg.train}, {"refine", cfg.refine}};
    if (cfg.light_bank) doc["light_bank"] = cfg.light_bank->string();
    return doc;
}

}  // namespace hazeprior
