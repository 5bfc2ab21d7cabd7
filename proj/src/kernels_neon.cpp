// NEON variants for aarch64. Same shapes as the AVX2 file; baseline NEON is
// mandatory on aarch64 so no per-file flags are needed.

#if defined(__aarch64__)

#include <arm_neon.h>

#include "springverb/kernels.hpp"

namespace springverb {
namespace {

#ifdef SPRINGVERB_REAL32

constexpr std::size_t kLanes = 4;
using vec = float32x4_t;
inline vec vload(const float* p) { return vld1q_f32(p); }
inline void vstore(float* p, vec v) { vst1q_f32(p, v); }
inline vec vset1(float s) { return vdupq_n_f32(s); }
inline vec vadd(vec a, vec b) { return vaddq_f32(a, b); }
inline vec vsub(vec a, vec b) { return vsubq_f32(a, b); }
inline vec vmul(vec a, vec b) { return vmulq_f32(a, b); }
inline vec vdiv(vec a, vec b) { return vdivq_f32(a, b); }
inline vec vfma(vec a, vec b, vec c) { return vfmaq_f32(c, a, b); }
inline vec vzero() { return vdupq_n_f32(0.0f); }
inline float hsum(vec v) { return vaddvq_f32(v); }

#else

constexpr std::size_t kLanes = 2;
using vec = float64x2_t;
inline vec vload(const double* p) { return vld1q_f64(p); }
inline void vstore(double* p, vec v) { vst1q_f64(p, v); }
inline vec vset1(double s) { return vdupq_n_f64(s); }
inline vec vadd(vec a, vec b) { return vaddq_f64(a, b); }
inline vec vsub(vec a, vec b) { return vsubq_f64(a, b); }
inline vec vmul(vec a, vec b) { return vmulq_f64(a, b); }
inline vec vdiv(vec a, vec b) { return vdivq_f64(a, b); }
inline vec vfma(vec a, vec b, vec c) { return vfmaq_f64(c, a, b); }
inline vec vzero() { return vdupq_n_f64(0.0); }
inline double hsum(vec v) { return vaddvq_f64(v); }

#endif

void add_v(real* dst, const real* a, const real* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) vstore(dst + i, vadd(vload(a + i), vload(b + i)));
    for (; i < n; ++i) dst[i] = a[i] + b[i];
}

void sub_v(real* dst, const real* a, const real* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) vstore(dst + i, vsub(vload(a + i), vload(b + i)));
    for (; i < n; ++i) dst[i] = a[i] - b[i];
}

void mul_v(real* dst, const real* a, const real* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) vstore(dst + i, vmul(vload(a + i), vload(b + i)));
    for (; i < n; ++i) dst[i] = a[i] * b[i];
}

void div_v(real* dst, const real* a, const real* b, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) vstore(dst + i, vdiv(vload(a + i), vload(b + i)));
    for (; i < n; ++i) dst[i] = a[i] / b[i];
}

void scale_v(real* dst, const real* a, real s, std::size_t n) {
    const vec vs = vset1(s);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) vstore(dst + i, vmul(vload(a + i), vs));
    for (; i < n; ++i) dst[i] = a[i] * s;
}

void axpy_v(real* y, const real* x, real a, std::size_t n) {
    const vec va = vset1(a);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes)
        vstore(y + i, vfma(va, vload(x + i), vload(y + i)));
    for (; i < n; ++i) y[i] += a * x[i];
}

real dot_v(const real* a, const real* b, std::size_t n) {
    vec acc0 = vzero();
    vec acc1 = vzero();
    std::size_t i = 0;
    for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
        acc0 = vfma(vload(a + i), vload(b + i), acc0);
        acc1 = vfma(vload(a + i + kLanes), vload(b + i + kLanes), acc1);
    }
    for (; i + kLanes <= n; i += kLanes) acc0 = vfma(vload(a + i), vload(b + i), acc0);
    real acc = hsum(vadd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

real sum_v(const real* a, std::size_t n) {
    vec acc0 = vzero();
    vec acc1 = vzero();
    std::size_t i = 0;
    for (; i + 2 * kLanes <= n; i += 2 * kLanes) {
        acc0 = vadd(acc0, vload(a + i));
        acc1 = vadd(acc1, vload(a + i + kLanes));
    }
    for (; i + kLanes <= n; i += kLanes) acc0 = vadd(acc0, vload(a + i));
    real acc = hsum(vadd(acc0, acc1));
    for (; i < n; ++i) acc += a[i];
    return acc;
}

}  // namespace

const KernelTable* simd_kernels() {
    static const KernelTable table{
        "neon", add_v, sub_v, mul_v, div_v, scale_v, axpy_v, dot_v, sum_v,
    };
    return &table;
}

}  // namespace springverb

#endif  // __aarch64__
