#include <immintrin.h>

#include <cmath>
#include <limits>

#include "smcl/simd.hpp"

namespace smcl::simd {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d m = _mm_max_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

// exp(x) by range reduction x = n ln2 + r, |r| <= ln2/2, and a degree-13
// Taylor polynomial in r. Inputs below -708 flush to zero (std::exp would
// return a value under 3.1e-308 there).
inline __m256d exp_pd(__m256d x) {
    const __m256d under = _mm256_cmp_pd(x, _mm256_set1_pd(-708.0), _CMP_LT_OQ);
    const __m256d over = _mm256_cmp_pd(x, _mm256_set1_pd(709.782712893384), _CMP_GT_OQ);
    x = _mm256_max_pd(_mm256_min_pd(x, _mm256_set1_pd(709.782712893384)), _mm256_set1_pd(-708.0));

    const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, _mm256_set1_pd(1.4426950408889634)),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93147180369123816490e-01), x);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.90821492927058770002e-10), r);

    static constexpr double inv_fact[] = {
        1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
        1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,     1.0 / 720.0,
        1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,        0.5,
        1.0,                1.0};
    __m256d p = _mm256_set1_pd(inv_fact[0]);
    for (int k = 1; k < 14; ++k) p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(inv_fact[k]));

    // 2^(n-1) built from exponent bits, then doubled, so n = 1024 stays finite.
    const __m128i n32 = _mm256_cvtpd_epi32(n);
    __m256i bits = _mm256_cvtepi32_epi64(n32);
    bits = _mm256_add_epi64(bits, _mm256_set1_epi64x(1023 - 1));
    bits = _mm256_slli_epi64(bits, 52);
    const __m256d scale = _mm256_castsi256_pd(bits);
    __m256d y = _mm256_mul_pd(_mm256_mul_pd(p, scale), _mm256_set1_pd(2.0));

    y = _mm256_andnot_pd(under, y);
    y = _mm256_blendv_pd(y, _mm256_set1_pd(std::numeric_limits<double>::infinity()), over);
    return y;
}

double max_value(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    if (n >= 4) {
        __m256d acc = _mm256_set1_pd(m);
        for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, _mm256_loadu_pd(x + i));
        m = hmax(acc);
    }
    for (; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

double exp_shift_sum(const double* x, double shift, double* out, std::size_t n) {
    const __m256d s = _mm256_set1_pd(shift);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d e = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x + i), s));
        _mm256_storeu_pd(out + i, e);
        acc = _mm256_add_pd(acc, e);
    }
    double total = hsum(acc);
    for (; i < n; ++i) {
        out[i] = std::exp(x[i] - shift);
        total += out[i];
    }
    return total;
}

void gaussian_logkernel(const double* base, const double* means, std::size_t stride, std::size_t n,
                        std::size_t dim, const double* point, const double* inv_var, double* out) {
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d acc = base ? _mm256_loadu_pd(base + j) : _mm256_setzero_pd();
        for (std::size_t d = 0; d < dim; ++d) {
            const __m256d r = _mm256_sub_pd(_mm256_set1_pd(point[d]), _mm256_loadu_pd(means + d * stride + j));
            const __m256d hr = _mm256_mul_pd(_mm256_set1_pd(0.5 * inv_var[d]), r);
            acc = _mm256_fnmadd_pd(hr, r, acc);
        }
        _mm256_storeu_pd(out + j, acc);
    }
    for (; j < n; ++j) {
        double acc = base ? base[j] : 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double r = point[d] - means[d * stride + j];
            acc -= 0.5 * inv_var[d] * r * r;
        }
        out[j] = acc;
    }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

}  // namespace

namespace detail {
const KernelTable avx2_table{Isa::avx2, max_value, exp_shift_sum, gaussian_logkernel, axpy, dot};
}

}  // namespace smcl::simd
