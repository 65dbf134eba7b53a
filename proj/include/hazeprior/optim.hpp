#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace hazeprior {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;

    explicit OptimState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
    bool operator==(const OptimState&) const = default;
};

/// One bias-corrected Adam update applied in place. A gradient containing a
/// non-finite value leaves params and state untouched and throws NumericError.
void adam_step(std::span<double> params, std::span<const double> grad, OptimState& state, double lr,
               const AdamConfig& cfg = {});

}  // namespace hazeprior
