#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hazeprior/image.hpp"

namespace hazeprior {

/// A restorer backed by a flat parameter vector.
///
/// forward_raw() is the differentiable path used for training; forward()
/// clamps it into a valid image. backward() maps dLoss/dOutput (same shape as
/// the raw output) to dLoss/dParameters.
class RestorerModel {
public:
    virtual ~RestorerModel() = default;

    virtual std::string architecture() const = 0;
    virtual std::span<const double> parameters() const = 0;
    /// Replaces the parameters; the length must equal parameters().size().
    virtual void set_parameters(std::span<const double> params) = 0;

    virtual Field forward_raw(const Image& input) const = 0;
    virtual std::vector<double> backward(const Image& input, const Field& grad_output) const = 0;
    virtual std::unique_ptr<RestorerModel> clone() const = 0;

    Image forward(const Image& input) const { return Image::clamped(forward_raw(input)); }
};

/// Per-channel affine filter over a (2r+1) x (2r+1) neighborhood with
/// edge-replicated borders:
///
///   out(y, x, c) = sum_{dy,dx} w_c(dy, dx) * in(y+dy, x+dx, c) + b_c
///
/// Parameters are laid out channel by channel, taps row-major followed by the
/// bias, so each channel owns (2r+1)^2 + 1 values.
class LinearPatchRestorer final : public RestorerModel {
public:
    LinearPatchRestorer(int radius, int channels);

    /// Center tap 1, all other taps and biases 0.
    static LinearPatchRestorer identity(int radius, int channels);

    int radius() const { return radius_; }
    int channels() const { return channels_; }
    int taps() const { return (2 * radius_ + 1) * (2 * radius_ + 1); }
    std::size_t params_per_channel() const { return static_cast<std::size_t>(taps()) + 1; }

    std::string architecture() const override;
    std::span<const double> parameters() const override { return params_; }
    void set_parameters(std::span<const double> params) override;

    Field forward_raw(const Image& input) const override;
    std::vector<double> backward(const Image& input, const Field& grad_output) const override;
    std::unique_ptr<RestorerModel> clone() const override;

private:
    void check_input(const Image& input) const;

    int radius_;
    int channels_;
    std::vector<double> params_;
};

/// Builds a zero-initialized model from an architecture descriptor such as
/// "linear_patch r=2 c=3". Throws DataError for unknown descriptors.
std::unique_ptr<RestorerModel> make_restorer(const std::string& architecture);

}  // namespace hazeprior
