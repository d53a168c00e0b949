#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <string>

#include "smcl/simd.hpp"

namespace smcl::simd {
namespace {

bool cpu_has_avx2() {
#if defined(SMCL_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* pick_default() {
    if (const char* env = std::getenv("SMCL_SIMD"); env && std::string(env) == "scalar")
        return &detail::scalar_table;
#if defined(SMCL_BUILD_AVX2)
    if (cpu_has_avx2()) return &detail::avx2_table;
#endif
    return &detail::scalar_table;
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> t{pick_default()};
    return t;
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool available(Isa isa) {
    if (isa == Isa::scalar) return true;
    return cpu_has_avx2();
}

const KernelTable& table(Isa isa) {
    if (!available(isa)) throw std::runtime_error("SIMD kernels not available: " + std::string(isa_name(isa)));
#if defined(SMCL_BUILD_AVX2)
    if (isa == Isa::avx2) return detail::avx2_table;
#endif
    return detail::scalar_table;
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void set_active(Isa isa) { current().store(&table(isa), std::memory_order_relaxed); }

double normalize_log_weights(std::span<const double> logw, std::span<double> probs) {
    const KernelTable& k = active();
    const double m = k.max_value(logw.data(), logw.size());
    if (!std::isfinite(m)) return m == std::numeric_limits<double>::infinity() ? m : -std::numeric_limits<double>::infinity();
    const double s = k.exp_shift_sum(logw.data(), m, probs.data(), logw.size());
    const double inv = 1.0 / s;
    for (double& p : probs) p *= inv;
    return m + std::log(s);
}

}  // namespace smcl::simd
