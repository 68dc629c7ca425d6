// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.
#include "cdyn/simd.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cdyn::simd::detail {
namespace {

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256d y0 = _mm256_loadu_pd(y + i);
        __m256d y1 = _mm256_loadu_pd(y + i + 4);
        y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
        y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
        _mm256_storeu_pd(y + i, y0);
        _mm256_storeu_pd(y + i + 4, y1);
    }
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void axpby_avx2(double a, const double* x, double b, const double* z, double* y,
                std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    const __m256d vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d bz = _mm256_mul_pd(vb, _mm256_loadu_pd(z + i));
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), bz));
    }
    for (; i < n; ++i) y[i] = std::fma(a, x[i], b * z[i]);
}

inline __m256d abs_pd(__m256d v) {
    return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

double max_scaled_error_avx2(const double* err, const double* y0, const double* y1,
                             std::size_t n, double atol, double rtol) {
    const __m256d va = _mm256_set1_pd(atol);
    const __m256d vr = _mm256_set1_pd(rtol);
    __m256d worst = _mm256_setzero_pd();
    __m256d unordered = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d mag = _mm256_max_pd(abs_pd(_mm256_loadu_pd(y0 + i)),
                                          abs_pd(_mm256_loadu_pd(y1 + i)));
        const __m256d scale = _mm256_fmadd_pd(vr, mag, va);
        const __m256d q = _mm256_div_pd(abs_pd(_mm256_loadu_pd(err + i)), scale);
        unordered = _mm256_or_pd(unordered, _mm256_cmp_pd(q, q, _CMP_UNORD_Q));
        worst = _mm256_max_pd(worst, q);
    }
    if (_mm256_movemask_pd(unordered) != 0) return std::numeric_limits<double>::quiet_NaN();
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, worst);
    double w = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    for (; i < n; ++i) {
        const double scale = std::fma(rtol, std::max(std::abs(y0[i]), std::abs(y1[i])), atol);
        const double q = std::abs(err[i]) / scale;
        if (std::isnan(q)) return q;
        w = std::max(w, q);
    }
    return w;
}

double min_value_avx2(const double* x, std::size_t n) {
    __m256d lo = _mm256_set1_pd(std::numeric_limits<double>::infinity());
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) lo = _mm256_min_pd(lo, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, lo);
    double m = std::min(std::min(lanes[0], lanes[1]), std::min(lanes[2], lanes[3]));
    for (; i < n; ++i) m = std::min(m, x[i]);
    return m;
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
    }
    acc0 = _mm256_add_pd(acc0, acc1);
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc0);
    double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
    for (; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

const KernelTable avx2_table{
    Isa::avx2, axpy_avx2, axpby_avx2, max_scaled_error_avx2, min_value_avx2, sum_avx2,
};

}  // namespace cdyn::simd::detail
