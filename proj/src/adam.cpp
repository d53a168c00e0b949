#include "smcl/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace smcl::optim {

bool adam_step(AdamState& s, std::span<double> params, std::span<const double> grad, double lr,
               const AdamConfig& cfg) {
    if (params.size() != grad.size() || s.m.size() != params.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    for (double g : grad)
        if (!std::isfinite(g)) {
            ++s.skipped;
            return false;
        }
    ++s.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * grad[i];
        s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = s.m[i] / c1;
        const double vhat = s.v[i] / c2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
    return true;
}

}  // namespace smcl::optim
