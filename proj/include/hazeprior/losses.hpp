#pragma once

#include <string>

#include "hazeprior/image.hpp"

namespace hazeprior {

enum class LossKind { MSE, L1 };

LossKind parse_loss_kind(const std::string& name);
std::string to_string(LossKind kind);

/// Mean over all elements of (pred - target)^2 or |pred - target|.
double reconstruction_loss(const Field& pred, const Image& target, LossKind kind);
double reconstruction_loss(const Image& pred, const Image& target, LossKind kind);

/// d loss / d pred. The L1 subgradient at an exact tie is 0.
Field reconstruction_loss_grad(const Field& pred, const Image& target, LossKind kind);

/// 10 log10(1 / MSE) for unit-range images; infinite for identical images.
double psnr(const Image& a, const Image& b);

}  // namespace hazeprior
