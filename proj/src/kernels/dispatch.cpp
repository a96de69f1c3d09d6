#include <cstdlib>
#include <string_view>

#include "facekey/kernels.hpp"

namespace facekey::kernels {

std::vector<Isa> available_isas() {
    std::vector<Isa> isas{Isa::Scalar};
#if defined(__x86_64__) || defined(_M_X64)
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2")) isas.push_back(Isa::Avx2);
#endif
#if defined(__aarch64__)
    isas.push_back(Isa::Neon);
#endif
    return isas;
}

Isa best_isa() { return available_isas().back(); }

KernelTable kernels_for(Isa isa) {
    switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
        case Isa::Avx2: return {Isa::Avx2, &avx2::match_frame, &avx2::match_batch};
#endif
#if defined(__aarch64__)
        case Isa::Neon: return {Isa::Neon, &neon::match_frame, &neon::match_batch};
#endif
        default: return {Isa::Scalar, &scalar::match_frame, &scalar::match_batch};
    }
}

const KernelTable& active_kernels() {
    static const KernelTable table = [] {
        if (const char* forced = std::getenv("FACEKEY_ISA"); forced && std::string_view(forced) == "scalar")
            return kernels_for(Isa::Scalar);
        return kernels_for(best_isa());
    }();
    return table;
}

}  // namespace facekey::kernels
