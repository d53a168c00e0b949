#include <cmath>
#include <limits>

#include "smcl/simd.hpp"

namespace smcl::simd {
namespace {

double max_value(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

double exp_shift_sum(const double* x, double shift, double* out, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::exp(x[i] - shift);
        s += out[i];
    }
    return s;
}

void gaussian_logkernel(const double* base, const double* means, std::size_t stride, std::size_t n,
                        std::size_t dim, const double* point, const double* inv_var, double* out) {
    for (std::size_t j = 0; j < n; ++j) out[j] = base ? base[j] : 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        const double* row = means + d * stride;
        const double h = 0.5 * inv_var[d];
        for (std::size_t j = 0; j < n; ++j) {
            const double r = point[d] - row[j];
            out[j] -= h * r * r;
        }
    }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

}  // namespace

namespace detail {
const KernelTable scalar_table{Isa::scalar, max_value, exp_shift_sum, gaussian_logkernel, axpy, dot};
}

}  // namespace smcl::simd
