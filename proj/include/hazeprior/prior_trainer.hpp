#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hazeprior/augment.hpp"
#include "hazeprior/image_io.hpp"
#include "hazeprior/losses.hpp"
#include "hazeprior/optim.hpp"
#include "hazeprior/restorer.hpp"

namespace hazeprior {

struct TrainConfig {
    int steps = 500;
    int batch = 8;
    double lr = 1e-3;
    AdamConfig adam{};
    LossKind loss = LossKind::MSE;
    int crop = 64;
    std::uint64_t seed = 0;
    /// Radius of the built-in LinearPatchRestorer when training from scratch.
    int model_radius = 2;

    void validate() const;

    /// 20,000 steps, batch 128, lr 1.5e-4, 224 x 224 inputs.
    static TrainConfig full_scale();
};

void to_json(nlohmann::json& j, const TrainConfig& cfg);
void from_json(const nlohmann::json& j, TrainConfig& cfg);

/// Gradient of reconstruction_loss(forward_raw(input), target) with respect
/// to the model parameters.
std::vector<double> loss_gradient(const RestorerModel& model, const Image& input, const Image& target,
                                  LossKind kind);

struct TrainResult {
    std::vector<double> loss_trace;  // mean batch loss per completed step
    bool aborted = false;
    std::string message;
};

/// Self-prior training: each step draws `batch` random crops from the clear
/// set, degrades them with `aug`, and takes one Adam step on the mean
/// reconstruction loss. The model is updated in place. A non-finite loss
/// stops training, leaves the parameters from the last good step, and sets
/// `aborted`.
TrainResult train_prior(const std::vector<NamedImage>& clear_set, const AugConfig& aug, const TrainConfig& cfg,
                        RestorerModel& model, const LightBank& bank = {});

TrainResult train_prior(const std::filesystem::path& clear_dir, const AugConfig& aug, const TrainConfig& cfg,
                        RestorerModel& model, const LightBank& bank = {});

/// "step,loss" CSV with round-trip precision.
void write_loss_csv(const std::vector<double>& trace, const std::filesystem::path& path);

}  // namespace hazeprior
