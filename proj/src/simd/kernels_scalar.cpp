#include "cdyn/simd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cdyn::simd::detail {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpby_scalar(double a, const double* x, double b, const double* z, double* y,
                  std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a * x[i] + b * z[i];
}

double max_scaled_error_scalar(const double* err, const double* y0, const double* y1,
                               std::size_t n, double atol, double rtol) {
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double scale = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double q = std::abs(err[i]) / scale;
        if (std::isnan(q)) return q;
        worst = std::max(worst, q);
    }
    return worst;
}

double min_value_scalar(const double* x, std::size_t n) {
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) lo = std::min(lo, x[i]);
    return lo;
}

double sum_scalar(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

}  // namespace

const KernelTable scalar_table{
    Isa::scalar, axpy_scalar, axpby_scalar, max_scaled_error_scalar, min_value_scalar, sum_scalar,
};

}  // namespace cdyn::simd::detail
