#include "hazeprior/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "hazeprior/error.hpp"

namespace hazeprior {

void adam_step(std::span<double> params, std::span<const double> grad, OptimState& state, double lr,
               const AdamConfig& cfg)
{
    if (params.size() != grad.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: parameter, gradient and moment lengths differ");
    }
    for (double g : grad) {
        if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient, update rejected");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bias1 = 1.0 - std::pow(cfg.beta1, t);
    const double bias2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double m_hat = state.m[i] / bias1;
        const double v_hat = state.v[i] / bias2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
}

}  // namespace hazeprior
