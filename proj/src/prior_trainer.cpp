#include "hazeprior/prior_trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "hazeprior/error.hpp"

namespace hazeprior {

void TrainConfig::validate() const
{
    if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be non-negative");
    if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be at least 1");
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
    if (crop < 1) throw std::invalid_argument("TrainConfig: crop must be positive");
    if (model_radius < 0) throw std::invalid_argument("TrainConfig: model_radius must be non-negative");
}

TrainConfig TrainConfig::full_scale()
{
    TrainConfig cfg;
    cfg.steps = 20000;
    cfg.batch = 128;
    cfg.lr = 1.5e-4;
    cfg.crop = 224;
    return cfg;
}

void to_json(nlohmann::json& j, const TrainConfig& c)
{
    j = nlohmann::json{{"steps", c.steps},
                       {"batch", c.batch},
                       {"lr", c.lr},
                       {"beta1", c.adam.beta1},
                       {"beta2", c.adam.beta2},
                       {"adam_epsilon", c.adam.epsilon},
                       {"loss", to_string(c.loss)},
                       {"crop", c.crop},
                       {"seed", c.seed},
                       {"model_radius", c.model_radius}};
}

void from_json(const nlohmann::json& j, TrainConfig& c)
{
    const TrainConfig d = c;
    c.steps = j.value("steps", d.steps);
    c.batch = j.value("batch", d.batch);
    c.lr = j.value("lr", d.lr);
    c.adam.beta1 = j.value("beta1", d.adam.beta1);
    c.adam.beta2 = j.value("beta2", d.adam.beta2);
    c.adam.epsilon = j.value("adam_epsilon", d.adam.epsilon);
    c.loss = parse_loss_kind(j.value("loss", to_string(d.loss)));
    c.crop = j.value("crop", d.crop);
    c.seed = j.value("seed", d.seed);
    c.model_radius = j.value("model_radius", d.model_radius);
}

std::vector<double> loss_gradient(const RestorerModel& model, const Image& input, const Image& target, LossKind kind)
{
    const Field pred = model.forward_raw(input);
    return model.backward(input, reconstruction_loss_grad(pred, target, kind));
}

namespace {

Image random_crop(const Image& image, int size, RngStream& rng)
{
    const int h = std::min(size, image.height());
    const int w = std::min(size, image.width());
    const int top = static_cast<int>(rng.uniform_int(0, image.height() - h));
    const int left = static_cast<int>(rng.uniform_int(0, image.width() - w));
    return crop(image, top, left, h, w);
}

}  // namespace

TrainResult train_prior(const std::vector<NamedImage>& clear_set, const AugConfig& aug, const TrainConfig& cfg,
                        RestorerModel& model, const LightBank& bank)
{
    cfg.validate();
    aug.validate();
    if (clear_set.empty()) {
        throw DataError("train_prior: clear image set is empty");
    }
    TrainResult result;
    result.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));

    RngStream rng(cfg.seed, 0);
    const std::size_t n_params = model.parameters().size();
    OptimState state(n_params);
    std::vector<double> params(model.parameters().begin(), model.parameters().end());

    for (int step = 0; step < cfg.steps; ++step) {
        std::vector<double> grad(n_params, 0.0);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const auto index = rng.uniform_int(0, static_cast<std::int64_t>(clear_set.size()) - 1);
            const Image& source = clear_set[static_cast<std::size_t>(index)].image;
            // The reconstruction target is the normalized clear crop that augment() degrades.
            const Image target = minmax_normalize(random_crop(source, cfg.crop, rng)).image;
            const Augmented degraded = augment(target, aug, rng, bank);

            const Field pred = model.forward_raw(degraded.image);
            batch_loss += reconstruction_loss(pred, target, cfg.loss);
            const auto g = model.backward(degraded.image, reconstruction_loss_grad(pred, target, cfg.loss));
            for (std::size_t i = 0; i < n_params; ++i) grad[i] += g[i];
        }
        batch_loss /= cfg.batch;
        for (double& g : grad) g /= cfg.batch;

        if (!std::isfinite(batch_loss)) {
            result.aborted = true;
            result.message = "non-finite loss at step " + std::to_string(step);
            return result;
        }
        try {
            adam_step(params, grad, state, cfg.lr, cfg.adam);
        } catch (const NumericError& e) {
            result.aborted = true;
            result.message = std::string(e.what()) + " at step " + std::to_string(step);
            return result;
        }
        model.set_parameters(params);
        result.loss_trace.push_back(batch_loss);
    }
    return result;
}

TrainResult train_prior(const std::filesystem::path& clear_dir, const AugConfig& aug, const TrainConfig& cfg,
                        RestorerModel& model, const LightBank& bank)
{
    return train_prior(load_directory(clear_dir), aug, cfg, model, bank);
}

void write_loss_csv(const std::vector<double>& trace, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write loss trace: " + path.string());
    out << "step,loss\n";
    char buf[64];
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, trace[i]);
        out << buf;
    }
}

}  // namespace hazeprior
