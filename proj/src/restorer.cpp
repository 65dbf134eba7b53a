#include "hazeprior/restorer.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "hazeprior/error.hpp"

namespace hazeprior {

LinearPatchRestorer::LinearPatchRestorer(int radius, int channels) : radius_(radius), channels_(channels)
{
    if (radius < 0) throw std::invalid_argument("LinearPatchRestorer: radius must be non-negative");
    if (channels != 1 && channels != 3) throw std::invalid_argument("LinearPatchRestorer: channels must be 1 or 3");
    params_.assign(params_per_channel() * static_cast<std::size_t>(channels_), 0.0);
}

LinearPatchRestorer LinearPatchRestorer::identity(int radius, int channels)
{
    LinearPatchRestorer model(radius, channels);
    const std::size_t center = static_cast<std::size_t>(model.taps() / 2);
    for (int c = 0; c < channels; ++c) {
        model.params_[static_cast<std::size_t>(c) * model.params_per_channel() + center] = 1.0;
    }
    return model;
}

std::string LinearPatchRestorer::architecture() const
{
    return "linear_patch r=" + std::to_string(radius_) + " c=" + std::to_string(channels_);
}

void LinearPatchRestorer::set_parameters(std::span<const double> params)
{
    if (params.size() != params_.size()) {
        throw std::invalid_argument("LinearPatchRestorer: parameter length mismatch");
    }
    std::copy(params.begin(), params.end(), params_.begin());
}

void LinearPatchRestorer::check_input(const Image& input) const
{
    if (input.channels() != channels_) {
        throw std::invalid_argument("LinearPatchRestorer: input has " + std::to_string(input.channels()) +
                                    " channels, model expects " + std::to_string(channels_));
    }
}

Field LinearPatchRestorer::forward_raw(const Image& input) const
{
    check_input(input);
    const int h = input.height();
    const int w = input.width();
    const int k = 2 * radius_ + 1;
    Field out(input.shape());
    for (int c = 0; c < channels_; ++c) {
        const double* weights = params_.data() + static_cast<std::size_t>(c) * params_per_channel();
        const double bias = weights[taps()];
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double acc = bias;
                for (int dy = -radius_; dy <= radius_; ++dy) {
                    const int sy = std::clamp(y + dy, 0, h - 1);
                    const double* row = weights + (dy + radius_) * k + radius_;
                    for (int dx = -radius_; dx <= radius_; ++dx) {
                        const int sx = std::clamp(x + dx, 0, w - 1);
                        acc += row[dx] * input.at(sy, sx, c);
                    }
                }
                out.at(y, x, c) = acc;
            }
        }
    }
    return out;
}

std::vector<double> LinearPatchRestorer::backward(const Image& input, const Field& grad_output) const
{
    check_input(input);
    if (grad_output.shape() != input.shape()) {
        throw std::invalid_argument("LinearPatchRestorer: gradient shape does not match the input");
    }
    const int h = input.height();
    const int w = input.width();
    const int k = 2 * radius_ + 1;
    std::vector<double> grad(params_.size(), 0.0);
    for (int c = 0; c < channels_; ++c) {
        double* g = grad.data() + static_cast<std::size_t>(c) * params_per_channel();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const double go = grad_output.at(y, x, c);
                if (go == 0.0) continue;
                g[taps()] += go;
                for (int dy = -radius_; dy <= radius_; ++dy) {
                    const int sy = std::clamp(y + dy, 0, h - 1);
                    double* row = g + (dy + radius_) * k + radius_;
                    for (int dx = -radius_; dx <= radius_; ++dx) {
                        const int sx = std::clamp(x + dx, 0, w - 1);
                        row[dx] += go * input.at(sy, sx, c);
                    }
                }
            }
        }
    }
    return grad;
}

std::unique_ptr<RestorerModel> LinearPatchRestorer::clone() const
{
    return std::make_unique<LinearPatchRestorer>(*this);
}

std::unique_ptr<RestorerModel> make_restorer(const std::string& architecture)
{
    std::istringstream in(architecture);
    std::string kind;
    std::string radius_tok;
    std::string channel_tok;
    in >> kind >> radius_tok >> channel_tok;
    if (kind == "linear_patch" && radius_tok.rfind("r=", 0) == 0 && channel_tok.rfind("c=", 0) == 0) {
        try {
            const int radius = std::stoi(radius_tok.substr(2));
            const int channels = std::stoi(channel_tok.substr(2));
            if (radius >= 0 && radius <= 64 && (channels == 1 || channels == 3)) {
                return std::make_unique<LinearPatchRestorer>(radius, channels);
            }
        } catch (const std::exception&) {
            // falls through to the error below
        }
    }
    throw DataError("unknown restorer architecture: '" + architecture + "'");
}

}  // namespace hazeprior
