#pragma once

// Shared helpers for op implementations.

#include <vector>

#include "springverb/tensor.hpp"

namespace springverb::detail {

// Common tape of the inputs (all tape-carrying inputs must agree).
inline Tape* joint_tape(std::initializer_list<const Tensor*> inputs) {
    Tape* tape = nullptr;
    for (const Tensor* t : inputs) {
        if (!t || !t->on_tape()) continue;
        if (tape && t->tape() != tape)
            throw std::logic_error("op inputs recorded on different tapes");
        tape = t->tape();
    }
    return tape;
}

// Leading-singleton broadcast: the smaller operand, after dropping leading
// 1-dims, must equal a trailing run of the output shape. Its flat data then
// tiles with period numel(small).
struct Broadcast {
    Shape out;
    std::int64_t n_out;
    std::int64_t na;
    std::int64_t nb;
};

inline bool suffix_compatible(const Shape& small, const Shape& out) {
    std::size_t start = 0;
    while (start < small.size() && small[start] == 1) ++start;
    const std::size_t core = small.size() - start;
    if (core > out.size()) return false;
    for (std::size_t i = 0; i < core; ++i) {
        if (small[start + i] != out[out.size() - core + i]) return false;
    }
    return true;
}

inline Broadcast broadcast_shapes(const Shape& a, const Shape& b) {
    const std::int64_t na = shape_numel(a), nb = shape_numel(b);
    const bool a_out = (na != nb) ? (na > nb) : (a.size() >= b.size());
    const Shape& out = a_out ? a : b;
    const Shape& small = a_out ? b : a;
    if (!suffix_compatible(small, out))
        throw ShapeError("shapes not broadcast-compatible: " + shape_str(a) + " vs " + shape_str(b));
    return {out, shape_numel(out), na, nb};
}

// grad_small[t] += sum over tiles of g[tile*n_small + t] (* factor when given)
inline void reduce_tiled(std::span<real> grad_small, std::span<const real> g,
                         std::span<const real> factor = {}) {
    const std::size_t ns = grad_small.size();
    const std::size_t tiles = g.size() / ns;
    for (std::size_t j = 0; j < tiles; ++j) {
        const real* gp = g.data() + j * ns;
        if (factor.empty()) {
            for (std::size_t t = 0; t < ns; ++t) grad_small[t] += gp[t];
        } else {
            const real* fp = factor.data() + j * ns;
            for (std::size_t t = 0; t < ns; ++t) grad_small[t] += gp[t] * fp[t];
        }
    }
}

}  // namespace springverb::detail
