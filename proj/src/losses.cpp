#include "hazeprior/losses.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace hazeprior {

LossKind parse_loss_kind(const std::string& name)
{
    if (name == "mse" || name == "MSE") return LossKind::MSE;
    if (name == "l1" || name == "L1") return LossKind::L1;
    throw std::invalid_argument("unknown loss kind '" + name + "' (expected mse or l1)");
}

std::string to_string(LossKind kind)
{
    return kind == LossKind::MSE ? "mse" : "l1";
}

namespace {

void check_same(const Shape& a, const Shape& b)
{
    if (a != b) throw std::invalid_argument("loss: prediction and target dimensions differ");
}

double sign(double v)
{
    return static_cast<double>((v > 0.0) - (v < 0.0));
}

}  // namespace

double reconstruction_loss(const Field& pred, const Image& target, LossKind kind)
{
    check_same(pred.shape(), target.shape());
    const auto p = pred.data();
    const auto t = target.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        acc += kind == LossKind::MSE ? d * d : std::abs(d);
    }
    return acc / static_cast<double>(p.size());
}

double reconstruction_loss(const Image& pred, const Image& target, LossKind kind)
{
    return reconstruction_loss(pred.to_field(), target, kind);
}

Field reconstruction_loss_grad(const Field& pred, const Image& target, LossKind kind)
{
    check_same(pred.shape(), target.shape());
    Field grad(pred.shape());
    const auto p = pred.data();
    const auto t = target.data();
    auto g = grad.data();
    const double inv_n = 1.0 / static_cast<double>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = p[i] - t[i];
        g[i] = (kind == LossKind::MSE ? 2.0 * d : sign(d)) * inv_n;
    }
    return grad;
}

double psnr(const Image& a, const Image& b)
{
    const double mse = reconstruction_loss(a, b, LossKind::MSE);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(1.0 / mse);
}

}  // namespace hazeprior
