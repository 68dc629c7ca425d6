#include "cdyn/simd.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace cdyn::simd {

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "unknown";
}

bool supported(Isa isa) {
    switch (isa) {
        case Isa::scalar: return true;
        case Isa::avx2:
#if defined(CDYN_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& kernels_for(Isa isa) {
    if (!supported(isa)) {
        throw std::runtime_error("simd variant not available: " + std::string(isa_name(isa)));
    }
#if defined(CDYN_HAVE_AVX2)
    if (isa == Isa::avx2) return detail::avx2_table;
#endif
    return detail::scalar_table;
}

namespace {

const KernelTable& select() {
    const char* forced = std::getenv("CDYN_SIMD");
    if (forced != nullptr && std::string(forced) == "scalar") return detail::scalar_table;
    if (supported(Isa::avx2)) return kernels_for(Isa::avx2);
    return detail::scalar_table;
}

}  // namespace

const KernelTable& kernels() {
    static const KernelTable& active = select();
    return active;
}

}  // namespace cdyn::simd
