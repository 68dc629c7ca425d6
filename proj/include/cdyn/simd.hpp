#pragma once

// Runtime-dispatched arithmetic kernels for the grid inner loops.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2+FMA
// variant compiled in its own translation unit. The active table is chosen
// once, on first use, from the CPU feature bits; CDYN_SIMD=scalar forces the
// reference path.

#include <cstddef>
#include <string_view>

namespace cdyn::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
    Isa isa;

    // y[i] += a * x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);

    // y[i] = a * x[i] + b * z[i]
    void (*axpby)(double a, const double* x, double b, const double* z, double* y,
                  std::size_t n);

    // max_i |err[i]| / (atol + rtol * max(|y0[i]|, |y1[i]|))
    double (*max_scaled_error)(const double* err, const double* y0, const double* y1,
                               std::size_t n, double atol, double rtol);

    // min_i x[i]
    double (*min_value)(const double* x, std::size_t n);

    // sum_i x[i], fixed association order per ISA
    double (*sum)(const double* x, std::size_t n);
};

// Whether this process can execute the given variant.
bool supported(Isa isa);

// Table for a specific ISA; throws std::runtime_error if unsupported.
const KernelTable& kernels_for(Isa isa);

// The table selected for this process.
const KernelTable& kernels();

namespace detail {
extern const KernelTable scalar_table;
#if defined(CDYN_HAVE_AVX2)
extern const KernelTable avx2_table;
#endif
}  // namespace detail

}  // namespace cdyn::simd
