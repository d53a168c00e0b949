#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace smcl::optim {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m, v;
    std::uint64_t t = 0;
    std::size_t skipped = 0;

    explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One Adam step that *descends* `grad`. Callers maximizing a likelihood pass
/// the negated score. A gradient with a non-finite entry leaves state and
/// params untouched, bumps `skipped` and returns false.
bool adam_step(AdamState& state, std::span<double> params, std::span<const double> grad, double lr,
               const AdamConfig& cfg = {});

}  // namespace smcl::optim
