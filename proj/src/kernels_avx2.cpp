// AVX2+FMA variants of the flat array kernels. This translation unit is the
// only one compiled with -mavx2 -mfma; callers reach it through the runtime
// dispatch table so the binary still runs on pre-AVX2 hardware.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include "springverb/kernels.hpp"

namespace springverb {
namespace {

#ifdef SPRINGVERB_REAL32

constexpr std::size_t kLanes = 8;
using vec = __m256;
inline vec vload(const float* p) { return _mm256_loadu_ps(p); }
inline void vstore(float* p, vec v) { _mm256_storeu_ps(p, v); }
inline vec vset1(float s) { return _mm256_set1_ps(s); }
inline vec vadd(vec a, vec b) { return _mm256_add_ps(a, b); }
inline vec vsub(vec a, vec b) { return _mm256_sub_ps(a, b); }
inline vec vmul(vec a, vec b) { return _mm256_mul_ps(a, b); }
inline vec vdiv(vec a, vec b) { return _mm256_div_ps(a, b); }
inline vec vfma(vec a, vec b, vec c) { return _mm256_fmadd_ps(a, b, c); }
inline vec vzero() { return _mm256_setzero_ps(); }

inline float hsum(vec v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
}

#else

constexpr std::size_t kLanes = 4;
using vec = __m256d;
inline vec vload(const double* p) { return _mm256_loadu_pd(p); }
inline void vstore(double* p, vec v) { _mm256_storeu_pd(p, v); }
inline vec vset1(double s) { return _mm256_set1_pd(s); }
inline vec vadd(vec a, vec b) { return _mm256_add_pd(a, b); }
inline vec vsub(vec a, vec b) { return _mm256_sub_pd(a, b); }
inline vec vmul(vec a, vec b) { return _mm256_mul_pd(a, b); }
inline vec vdiv(vec a, vec b) { return _mm256_div_pd(a, b); }
inline vec vfma(vec a, vec b, vec c) { return _mm256_fmadd_pd(a, b, c); }
inline vec vzero() { return _mm256_setzero_pd(); }

inline double hsum(vec v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

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
        "avx2", add_v, sub_v, mul_v, div_v, scale_v, axpy_v, dot_v, sum_v,
    };
    return &table;
}

}  // namespace springverb

#endif  // x86_64
