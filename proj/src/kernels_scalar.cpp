#include "springverb/kernels.hpp"

namespace springverb {
namespace {

void add_s(real* dst, const real* a, const real* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] + b[i];
}

void sub_s(real* dst, const real* a, const real* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] - b[i];
}

void mul_s(real* dst, const real* a, const real* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * b[i];
}

void div_s(real* dst, const real* a, const real* b, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] / b[i];
}

void scale_s(real* dst, const real* a, real s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = a[i] * s;
}

void axpy_s(real* y, const real* x, real a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

real dot_s(const real* a, const real* b, std::size_t n) {
    real acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

real sum_s(const real* a, std::size_t n) {
    real acc = 0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i];
    return acc;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{
        "scalar", add_s, sub_s, mul_s, div_s, scale_s, axpy_s, dot_s, sum_s,
    };
    return table;
}

}  // namespace springverb
