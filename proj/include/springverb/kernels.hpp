#pragma once

#include <cstddef>
#include <string>

#include "springverb/common.hpp"

namespace springverb {

// Flat array kernels behind the tensor arithmetic. Each entry has a scalar
// reference implementation and, where the platform supports it, a SIMD
// variant; the active table is chosen once at startup. SPRINGVERB_KERNELS
// (scalar | avx2 | neon | auto) overrides the auto-detected choice.
struct KernelTable {
    const char* name;

    void (*add)(real* dst, const real* a, const real* b, std::size_t n);
    void (*sub)(real* dst, const real* a, const real* b, std::size_t n);
    void (*mul)(real* dst, const real* a, const real* b, std::size_t n);
    void (*div)(real* dst, const real* a, const real* b, std::size_t n);
    // dst = a * s
    void (*scale)(real* dst, const real* a, real s, std::size_t n);
    // y += a * x
    void (*axpy)(real* y, const real* x, real a, std::size_t n);
    real (*dot)(const real* a, const real* b, std::size_t n);
    real (*sum)(const real* a, std::size_t n);
};

// Active table (dispatch decided on first call).
const KernelTable& kernels();

// Individual tables, for equivalence tests. simd_kernels() is null when the
// build has no SIMD variant for this platform.
const KernelTable& scalar_kernels();
const KernelTable* simd_kernels();

}  // namespace springverb
