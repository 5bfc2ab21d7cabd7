#include <cstdlib>
#include <cstring>

#include "springverb/kernels.hpp"

namespace springverb {

namespace {

bool cpu_has_simd() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#elif defined(__aarch64__)
    return true;
#else
    return false;
#endif
}

const KernelTable& select() {
    const KernelTable* simd = simd_kernels();
    if (const char* env = std::getenv("SPRINGVERB_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return scalar_kernels();
        if (simd && std::strcmp(env, simd->name) == 0 && cpu_has_simd()) return *simd;
        // "auto" or anything unrecognized falls through to detection.
    }
    if (simd && cpu_has_simd()) return *simd;
    return scalar_kernels();
}

}  // namespace

#if !defined(__x86_64__) && !defined(_M_X64) && !defined(__aarch64__)
const KernelTable* simd_kernels() { return nullptr; }
#endif

const KernelTable& kernels() {
    static const KernelTable& active = select();
    return active;
}

}  // namespace springverb
