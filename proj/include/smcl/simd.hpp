#pragma once

// Data-parallel kernels used by the particle engine. Every kernel has a scalar
// reference implementation; wider variants must agree with it to within the
// tolerances asserted in tests/test_simd.cpp.

#include <cstddef>
#include <span>
#include <string_view>

namespace smcl::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
    Isa isa;

    /// max over x; -inf for an empty input.
    double (*max_value)(const double* x, std::size_t n);

    /// out[i] = exp(x[i] - shift); returns the sum of out. exp(-inf) = 0.
    double (*exp_shift_sum)(const double* x, double shift, double* out, std::size_t n);

    /// out[j] = base[j] - 0.5 * sum_d (point[d] - means[d * stride + j])^2 * inv_var[d]
    /// for j < n. `means` is structure-of-arrays: one row of length `stride`
    /// per state coordinate. `base` may be null (treated as zeros).
    void (*gaussian_logkernel)(const double* base, const double* means, std::size_t stride,
                               std::size_t n, std::size_t dim, const double* point,
                               const double* inv_var, double* out);

    /// y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);

    double (*dot)(const double* x, const double* y, std::size_t n);
};

bool available(Isa isa);

/// Table for a specific ISA; throws std::runtime_error if unavailable.
const KernelTable& table(Isa isa);

/// The table in use. Chosen once: the widest available ISA, unless the
/// environment variable SMCL_SIMD=scalar forces the reference path.
const KernelTable& active();

/// Overrides the active table (tests and benchmarks).
void set_active(Isa isa);

// Convenience wrappers over active().

inline double max_value(std::span<const double> x) { return active().max_value(x.data(), x.size()); }

inline double exp_shift_sum(std::span<const double> x, double shift, std::span<double> out) {
    return active().exp_shift_sum(x.data(), shift, out.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active().axpy(a, x.data(), y.data(), x.size());
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    return active().dot(x.data(), y.data(), x.size());
}

/// Normalizes log-weights in place into probabilities and returns
/// log(sum exp(logw)). Uses max subtraction; all -inf input yields -inf and
/// leaves the output untouched.
double normalize_log_weights(std::span<const double> logw, std::span<double> probs);

namespace detail {
extern const KernelTable scalar_table;
#if defined(SMCL_BUILD_AVX2)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace smcl::simd
