#include <cmath>
#include <cstring>

#include "springverb/kernels.hpp"
#include "springverb/tensor.hpp"
#include "op_support.hpp"

namespace springverb {

using detail::broadcast_shapes;
using detail::joint_tape;
using detail::reduce_tiled;

namespace {

bool is_binary(EwKind k) {
    return k == EwKind::add || k == EwKind::sub || k == EwKind::mul || k == EwKind::div;
}

// df/da and df/db at (a, b) for the binary kinds
real dfda(EwKind k, real /*a*/, real b) {
    switch (k) {
        case EwKind::add: return 1;
        case EwKind::sub: return 1;
        case EwKind::mul: return b;
        case EwKind::div: return 1 / b;
        default: return 0;
    }
}

real dfdb(EwKind k, real a, real b) {
    switch (k) {
        case EwKind::add: return 1;
        case EwKind::sub: return -1;
        case EwKind::mul: return a;
        case EwKind::div: return -a / (b * b);
        default: return 0;
    }
}

Tensor binary_op(EwKind kind, const Tensor& a, const Tensor& b) {
    const auto bc = broadcast_shapes(a.shape(), b.shape());
    Tensor out = Tensor::zeros(bc.out);
    auto po = out.mut_data();
    const auto pa = a.data();
    const auto pb = b.data();
    const auto& k = kernels();

    if (bc.na == bc.n_out && bc.nb == bc.n_out) {
        switch (kind) {
            case EwKind::add: k.add(po.data(), pa.data(), pb.data(), po.size()); break;
            case EwKind::sub: k.sub(po.data(), pa.data(), pb.data(), po.size()); break;
            case EwKind::mul: k.mul(po.data(), pa.data(), pb.data(), po.size()); break;
            case EwKind::div: k.div(po.data(), pa.data(), pb.data(), po.size()); break;
            default: break;
        }
    } else {
        for (std::int64_t i = 0; i < bc.n_out; ++i) {
            const real x = pa[static_cast<std::size_t>(i % bc.na)];
            const real y = pb[static_cast<std::size_t>(i % bc.nb)];
            real v = 0;
            switch (kind) {
                case EwKind::add: v = x + y; break;
                case EwKind::sub: v = x - y; break;
                case EwKind::mul: v = x * y; break;
                case EwKind::div: v = x / y; break;
                default: break;
            }
            po[static_cast<std::size_t>(i)] = v;
        }
    }

    Tape* tape = joint_tape({&a, &b});
    if (!tape) return out;

    const Tensor av = a.detached();
    const Tensor bv = b.detached();
    const int an = a.node(), bn = b.node();
    return tape->emit(std::move(out), [kind, av, bv, an, bn, bc](Tape& t, int self) {
        const auto g = t.grad_buf(self);
        const auto pa2 = av.data();
        const auto pb2 = bv.data();
        if (an >= 0) {
            auto ga = t.grad_buf(an);
            if (kind == EwKind::add || kind == EwKind::sub) {
                if (bc.na == bc.n_out) {
                    kernels().axpy(ga.data(), g.data(), 1, ga.size());
                } else {
                    reduce_tiled(ga, g);
                }
            } else {
                std::vector<real> contrib(static_cast<std::size_t>(bc.n_out));
                for (std::int64_t i = 0; i < bc.n_out; ++i)
                    contrib[static_cast<std::size_t>(i)] =
                        g[static_cast<std::size_t>(i)] *
                        dfda(kind, pa2[static_cast<std::size_t>(i % bc.na)],
                             pb2[static_cast<std::size_t>(i % bc.nb)]);
                if (bc.na == bc.n_out) {
                    kernels().axpy(ga.data(), contrib.data(), 1, ga.size());
                } else {
                    reduce_tiled(ga, contrib);
                }
            }
        }
        if (bn >= 0) {
            auto gb = t.grad_buf(bn);
            std::vector<real> contrib(static_cast<std::size_t>(bc.n_out));
            for (std::int64_t i = 0; i < bc.n_out; ++i)
                contrib[static_cast<std::size_t>(i)] =
                    g[static_cast<std::size_t>(i)] *
                    dfdb(kind, pa2[static_cast<std::size_t>(i % bc.na)],
                         pb2[static_cast<std::size_t>(i % bc.nb)]);
            if (bc.nb == bc.n_out) {
                kernels().axpy(gb.data(), contrib.data(), 1, gb.size());
            } else {
                reduce_tiled(gb, contrib);
            }
        }
    });
}

constexpr real kLogFloor = static_cast<real>(1e-12);

Tensor unary_op(EwKind kind, const Tensor& a, real c) {
    Tensor out = Tensor::zeros(a.shape());
    auto po = out.mut_data();
    const auto pa = a.data();
    const std::size_t n = po.size();

    switch (kind) {
        case EwKind::tanh:
            for (std::size_t i = 0; i < n; ++i) po[i] = std::tanh(pa[i]);
            break;
        case EwKind::sigmoid:
            for (std::size_t i = 0; i < n; ++i) po[i] = 1 / (1 + std::exp(-pa[i]));
            break;
        case EwKind::relu:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] > 0 ? pa[i] : 0;
            break;
        case EwKind::abs:
            for (std::size_t i = 0; i < n; ++i) po[i] = std::fabs(pa[i]);
            break;
        case EwKind::square:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pa[i];
            break;
        case EwKind::log:
            for (std::size_t i = 0; i < n; ++i) po[i] = std::log(pa[i] < kLogFloor ? kLogFloor : pa[i]);
            break;
        case EwKind::exp:
            for (std::size_t i = 0; i < n; ++i) po[i] = std::exp(pa[i]);
            break;
        case EwKind::scale:
            kernels().scale(po.data(), pa.data(), c, n);
            break;
        case EwKind::sqrt:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] > 0 ? std::sqrt(pa[i]) : 0;
            break;
        case EwKind::clamp_min:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] < c ? c : pa[i];
            break;
        default:
            break;
    }

    Tape* tape = joint_tape({&a});
    if (!tape) return out;

    const Tensor av = a.detached();
    const Tensor ov = out.detached();
    const int an = a.node();
    return tape->emit(std::move(out), [kind, av, ov, an, c](Tape& t, int self) {
        if (an < 0) return;
        const auto g = t.grad_buf(self);
        auto ga = t.grad_buf(an);
        const auto x = av.data();
        const auto y = ov.data();
        const std::size_t n = ga.size();
        switch (kind) {
            case EwKind::tanh:
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * (1 - y[i] * y[i]);
                break;
            case EwKind::sigmoid:
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i] * (1 - y[i]);
                break;
            case EwKind::relu:
                for (std::size_t i = 0; i < n; ++i) ga[i] += x[i] > 0 ? g[i] : 0;
                break;
            case EwKind::abs:
                for (std::size_t i = 0; i < n; ++i)
                    ga[i] += x[i] > 0 ? g[i] : (x[i] < 0 ? -g[i] : 0);
                break;
            case EwKind::square:
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * 2 * x[i];
                break;
            case EwKind::log:
                for (std::size_t i = 0; i < n; ++i)
                    ga[i] += x[i] > kLogFloor ? g[i] / x[i] : 0;
                break;
            case EwKind::exp:
                for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * y[i];
                break;
            case EwKind::scale:
                kernels().axpy(ga.data(), g.data(), c, n);
                break;
            case EwKind::sqrt:
                for (std::size_t i = 0; i < n; ++i)
                    ga[i] += y[i] > 0 ? g[i] / (2 * y[i]) : 0;
                break;
            case EwKind::clamp_min:
                for (std::size_t i = 0; i < n; ++i) ga[i] += x[i] > c ? g[i] : 0;
                break;
            default:
                break;
        }
    });
}

}  // namespace

Tensor elementwise(EwKind kind, const Tensor& a, const Tensor* b, real c) {
    if (is_binary(kind)) {
        if (!b) throw std::logic_error("binary elementwise op requires two operands");
        return binary_op(kind, a, *b);
    }
    return unary_op(kind, a, c);
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(EwKind::add, a, &b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(EwKind::sub, a, &b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(EwKind::mul, a, &b); }
Tensor div(const Tensor& a, const Tensor& b) { return elementwise(EwKind::div, a, &b); }
Tensor tanh(const Tensor& a) { return elementwise(EwKind::tanh, a); }
Tensor sigmoid(const Tensor& a) { return elementwise(EwKind::sigmoid, a); }
Tensor relu(const Tensor& a) { return elementwise(EwKind::relu, a); }
Tensor abs(const Tensor& a) { return elementwise(EwKind::abs, a); }
Tensor square(const Tensor& a) { return elementwise(EwKind::square, a); }
Tensor log(const Tensor& a) { return elementwise(EwKind::log, a); }
Tensor exp(const Tensor& a) { return elementwise(EwKind::exp, a); }
Tensor sqrt(const Tensor& a) { return elementwise(EwKind::sqrt, a); }
Tensor scale(const Tensor& a, real s) { return elementwise(EwKind::scale, a, nullptr, s); }
Tensor clamp_min(const Tensor& a, real c) { return elementwise(EwKind::clamp_min, a, nullptr, c); }

// --- reductions -------------------------------------------------------------

namespace {

struct ReducePlan {
    Shape out_shape;          // reduced axes dropped ({1} when everything reduces)
    std::vector<std::int64_t> out_index;  // input flat -> output flat
    std::int64_t count;       // elements folded into each output
};

ReducePlan plan_reduce(const Shape& shape, std::vector<int> axes) {
    const int r = static_cast<int>(shape.size());
    std::vector<bool> reduced(static_cast<std::size_t>(r), false);
    if (axes.empty()) {
        reduced.assign(static_cast<std::size_t>(r), true);
    } else {
        for (int ax : axes) {
            if (ax < 0) ax += r;
            if (ax < 0 || ax >= r)
                throw ShapeError("reduce axis out of range for " + shape_str(shape));
            reduced[static_cast<std::size_t>(ax)] = true;
        }
    }

    ReducePlan plan;
    plan.count = 1;
    for (int i = 0; i < r; ++i) {
        if (reduced[static_cast<std::size_t>(i)]) {
            plan.count *= shape[static_cast<std::size_t>(i)];
        } else {
            plan.out_shape.push_back(shape[static_cast<std::size_t>(i)]);
        }
    }
    if (plan.out_shape.empty()) plan.out_shape = {1};

    const std::int64_t n = shape_numel(shape);
    plan.out_index.resize(static_cast<std::size_t>(n));
    std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
    for (std::int64_t flat = 0; flat < n; ++flat) {
        std::int64_t o = 0;
        for (int i = 0; i < r; ++i) {
            if (!reduced[static_cast<std::size_t>(i)])
                o = o * shape[static_cast<std::size_t>(i)] + idx[static_cast<std::size_t>(i)];
        }
        plan.out_index[static_cast<std::size_t>(flat)] = o;
        for (int i = r - 1; i >= 0; --i) {
            if (++idx[static_cast<std::size_t>(i)] < shape[static_cast<std::size_t>(i)]) break;
            idx[static_cast<std::size_t>(i)] = 0;
        }
    }
    return plan;
}

}  // namespace

Tensor reduce(ReduceKind kind, const Tensor& a, const std::vector<int>& axes) {
    if (a.numel() == 0) throw ShapeError("reduce over empty tensor");
    auto plan = plan_reduce(a.shape(), axes);
    Tensor out = Tensor::zeros(plan.out_shape);
    auto po = out.mut_data();
    const auto pa = a.data();
    const std::int64_t n = a.numel();

    std::shared_ptr<std::vector<std::int64_t>> argmax;
    if (kind == ReduceKind::max) {
        argmax = std::make_shared<std::vector<std::int64_t>>(po.size(), -1);
        for (std::int64_t i = 0; i < n; ++i) {
            const auto o = static_cast<std::size_t>(plan.out_index[static_cast<std::size_t>(i)]);
            if ((*argmax)[o] < 0 || pa[static_cast<std::size_t>(i)] > po[o]) {
                po[o] = pa[static_cast<std::size_t>(i)];
                (*argmax)[o] = i;
            }
        }
    } else {
        for (std::int64_t i = 0; i < n; ++i)
            po[static_cast<std::size_t>(plan.out_index[static_cast<std::size_t>(i)])] +=
                pa[static_cast<std::size_t>(i)];
        if (kind == ReduceKind::mean) {
            const real inv = 1 / static_cast<real>(plan.count);
            kernels().scale(po.data(), po.data(), inv, po.size());
        }
    }

    Tape* tape = joint_tape({&a});
    if (!tape) return out;

    const int an = a.node();
    auto out_index = std::make_shared<std::vector<std::int64_t>>(std::move(plan.out_index));
    const real inv_count = 1 / static_cast<real>(plan.count);
    return tape->emit(std::move(out), [kind, an, out_index, argmax, inv_count](Tape& t, int self) {
        if (an < 0) return;
        const auto g = t.grad_buf(self);
        auto ga = t.grad_buf(an);
        if (kind == ReduceKind::max) {
            for (std::size_t o = 0; o < g.size(); ++o)
                ga[static_cast<std::size_t>((*argmax)[o])] += g[o];
        } else {
            const real f = (kind == ReduceKind::mean) ? inv_count : 1;
            for (std::size_t i = 0; i < ga.size(); ++i)
                ga[i] += f * g[static_cast<std::size_t>((*out_index)[i])];
        }
    });
}

Tensor sum(const Tensor& a, const std::vector<int>& axes) { return reduce(ReduceKind::sum, a, axes); }
Tensor mean(const Tensor& a, const std::vector<int>& axes) { return reduce(ReduceKind::mean, a, axes); }
Tensor reduce_max(const Tensor& a, const std::vector<int>& axes) { return reduce(ReduceKind::max, a, axes); }

// --- matmul -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        throw ShapeError("matmul expects rank-2 tensors, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    const int m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2)
        throw ShapeError("matmul inner dimensions differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));

    Tensor out = Tensor::zeros({m, n});
    auto pc = out.mut_data();
    const auto pa = a.data();
    const auto pb = b.data();
    const auto& ker = kernels();
    for (int i = 0; i < m; ++i) {
        real* crow = pc.data() + static_cast<std::size_t>(i) * n;
        for (int p = 0; p < k; ++p)
            ker.axpy(crow, pb.data() + static_cast<std::size_t>(p) * n,
                     pa[static_cast<std::size_t>(i) * k + p], static_cast<std::size_t>(n));
    }

    Tape* tape = joint_tape({&a, &b});
    if (!tape) return out;

    const Tensor av = a.detached(), bv = b.detached();
    const int an = a.node(), bn = b.node();
    return tape->emit(std::move(out), [av, bv, an, bn, m, k, n](Tape& t, int self) {
        const auto g = t.grad_buf(self);
        const auto& ker = kernels();
        if (an >= 0) {  // dA = g . B^T
            auto ga = t.grad_buf(an);
            const auto pb2 = bv.data();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p)
                    ga[static_cast<std::size_t>(i) * k + p] +=
                        ker.dot(g.data() + static_cast<std::size_t>(i) * n,
                                pb2.data() + static_cast<std::size_t>(p) * n,
                                static_cast<std::size_t>(n));
        }
        if (bn >= 0) {  // dB = A^T . g
            auto gb = t.grad_buf(bn);
            const auto pa2 = av.data();
            for (int i = 0; i < m; ++i)
                for (int p = 0; p < k; ++p)
                    ker.axpy(gb.data() + static_cast<std::size_t>(p) * n,
                             g.data() + static_cast<std::size_t>(i) * n,
                             pa2[static_cast<std::size_t>(i) * k + p], static_cast<std::size_t>(n));
        }
    });
}

// --- shape ops ---------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
    // shares storage; only the shape differs
    Tensor reshaped = a.with_shape(std::move(shape));

    Tape* tape = joint_tape({&a});
    if (!tape) return reshaped;
    const int an = a.node();
    return tape->emit(std::move(reshaped), [an](Tape& t, int self) {
        if (an < 0) return;
        const auto g = t.grad_buf(self);
        auto ga = t.grad_buf(an);
        kernels().axpy(ga.data(), g.data(), 1, ga.size());
    });
}

namespace {

// outer/inner strides around one axis
struct AxisSplit {
    std::int64_t outer, axis, inner;
};

AxisSplit split_at(const Shape& s, int axis) {
    AxisSplit r{1, s[static_cast<std::size_t>(axis)], 1};
    for (int i = 0; i < axis; ++i) r.outer *= s[static_cast<std::size_t>(i)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < s.size(); ++i) r.inner *= s[i];
    return r;
}

}  // namespace

Tensor narrow(const Tensor& a, int axis, int start, int len) {
    if (axis < 0) axis += a.rank();
    if (axis < 0 || axis >= a.rank()) throw ShapeError("narrow axis out of range");
    const int d = a.dim(axis);
    if (start < 0 || len <= 0 || start + len > d)
        throw ShapeError("narrow window [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") exceeds axis of size " + std::to_string(d));

    Shape out_shape = a.shape();
    out_shape[static_cast<std::size_t>(axis)] = len;
    const auto sp = split_at(a.shape(), axis);
    Tensor out = Tensor::zeros(out_shape);
    auto po = out.mut_data();
    const auto pa = a.data();
    for (std::int64_t o = 0; o < sp.outer; ++o)
        std::memcpy(po.data() + o * len * sp.inner,
                    pa.data() + (o * sp.axis + start) * sp.inner,
                    static_cast<std::size_t>(len * sp.inner) * sizeof(real));

    Tape* tape = joint_tape({&a});
    if (!tape) return out;
    const int an = a.node();
    return tape->emit(std::move(out), [an, sp, start, len](Tape& t, int self) {
        if (an < 0) return;
        const auto g = t.grad_buf(self);
        auto ga = t.grad_buf(an);
        for (std::int64_t o = 0; o < sp.outer; ++o)
            kernels().axpy(ga.data() + (o * sp.axis + start) * sp.inner,
                           g.data() + o * len * sp.inner, 1,
                           static_cast<std::size_t>(len * sp.inner));
    });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat of zero tensors");
    const int r = parts[0].rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("concat axis out of range");
    Shape out_shape = parts[0].shape();
    int total = 0;
    for (const auto& p : parts) {
        if (p.rank() != r) throw ShapeError("concat rank mismatch");
        for (int i = 0; i < r; ++i)
            if (i != axis && p.dim(i) != out_shape[static_cast<std::size_t>(i)])
                throw ShapeError("concat shape mismatch: " + shape_str(p.shape()));
        total += p.dim(axis);
    }
    out_shape[static_cast<std::size_t>(axis)] = total;

    Tensor out = Tensor::zeros(out_shape);
    auto po = out.mut_data();
    const auto sp = split_at(out_shape, axis);
    std::int64_t offset = 0;
    for (const auto& p : parts) {
        const auto pp = p.data();
        const std::int64_t alen = p.dim(axis);
        for (std::int64_t o = 0; o < sp.outer; ++o)
            std::memcpy(po.data() + (o * sp.axis + offset) * sp.inner,
                        pp.data() + o * alen * sp.inner,
                        static_cast<std::size_t>(alen * sp.inner) * sizeof(real));
        offset += alen;
    }

    Tape* tape = nullptr;
    for (const auto& p : parts) {
        if (p.on_tape()) {
            if (tape && p.tape() != tape) throw std::logic_error("concat inputs on different tapes");
            tape = p.tape();
        }
    }
    if (!tape) return out;

    std::vector<int> nodes;
    std::vector<std::int64_t> lens;
    nodes.reserve(parts.size());
    for (const auto& p : parts) {
        nodes.push_back(p.node());
        lens.push_back(p.dim(axis));
    }
    return tape->emit(std::move(out), [nodes, lens, sp](Tape& t, int self) {
        const auto g = t.grad_buf(self);
        std::int64_t offset = 0;
        for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
            const std::int64_t alen = lens[pi];
            if (nodes[pi] >= 0) {
                auto gp = t.grad_buf(nodes[pi]);
                for (std::int64_t o = 0; o < sp.outer; ++o)
                    kernels().axpy(gp.data() + o * alen * sp.inner,
                                   g.data() + (o * sp.axis + offset) * sp.inner, 1,
                                   static_cast<std::size_t>(alen * sp.inner));
            }
            offset += alen;
        }
    });
}

Tensor swap_axes_12(const Tensor& a) {
    if (a.rank() != 3) throw ShapeError("swap_axes_12 expects rank 3, got " + shape_str(a.shape()));
    const int B = a.dim(0), C = a.dim(1), T = a.dim(2);
    Tensor out = Tensor::zeros({B, T, C});
    auto po = out.mut_data();
    const auto pa = a.data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int t = 0; t < T; ++t)
                po[(static_cast<std::size_t>(b) * T + t) * C + c] =
                    pa[(static_cast<std::size_t>(b) * C + c) * T + t];

    Tape* tape = joint_tape({&a});
    if (!tape) return out;
    const int an = a.node();
    return tape->emit(std::move(out), [an, B, C, T](Tape& t, int self) {
        if (an < 0) return;
        const auto g = t.grad_buf(self);
        auto ga = t.grad_buf(an);
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c)
                for (int tt = 0; tt < T; ++tt)
                    ga[(static_cast<std::size_t>(b) * C + c) * T + tt] +=
                        g[(static_cast<std::size_t>(b) * T + tt) * C + c];
    });
}

Tensor stack_time(const std::vector<Tensor>& steps) {
    if (steps.empty()) throw ShapeError("stack_time of zero tensors");
    const int B = steps[0].dim(0), H = steps[0].dim(1);
    const int T = static_cast<int>(steps.size());
    Tensor out = Tensor::zeros({B, H, T});
    auto po = out.mut_data();
    for (int t = 0; t < T; ++t) {
        const auto ps = steps[static_cast<std::size_t>(t)].data();
        if (steps[static_cast<std::size_t>(t)].shape() != steps[0].shape())
            throw ShapeError("stack_time step shape mismatch");
        for (int bh = 0; bh < B * H; ++bh)
            po[static_cast<std::size_t>(bh) * T + t] = ps[static_cast<std::size_t>(bh)];
    }

    Tape* tape = nullptr;
    for (const auto& s : steps)
        if (s.on_tape()) tape = s.tape();
    if (!tape) return out;

    std::vector<int> nodes;
    nodes.reserve(steps.size());
    for (const auto& s : steps) nodes.push_back(s.node());
    return tape->emit(std::move(out), [nodes, B, H, T](Tape& t, int self) {
        const auto g = t.grad_buf(self);
        for (int tt = 0; tt < T; ++tt) {
            if (nodes[static_cast<std::size_t>(tt)] < 0) continue;
            auto gs = t.grad_buf(nodes[static_cast<std::size_t>(tt)]);
            for (int bh = 0; bh < B * H; ++bh)
                gs[static_cast<std::size_t>(bh)] += g[static_cast<std::size_t>(bh) * T + tt];
        }
    });
}

Tensor pad_time_left(const Tensor& a, int n) {
    if (a.rank() != 3) throw ShapeError("pad_time_left expects rank 3, got " + shape_str(a.shape()));
    if (n < 0) throw ShapeError("pad_time_left: negative pad");
    const int B = a.dim(0), C = a.dim(1), T = a.dim(2);
    Tensor out = Tensor::zeros({B, C, T + n});
    auto po = out.mut_data();
    const auto pa = a.data();
    for (int bc = 0; bc < B * C; ++bc)
        std::memcpy(po.data() + static_cast<std::size_t>(bc) * (T + n) + n,
                    pa.data() + static_cast<std::size_t>(bc) * T, static_cast<std::size_t>(T) * sizeof(real));

    Tape* tape = joint_tape({&a});
    if (!tape) return out;
    const int an = a.node();
    return tape->emit(std::move(out), [an, B, C, T, n](Tape& t, int self) {
        if (an < 0) return;
        const auto g = t.grad_buf(self);
        auto ga = t.grad_buf(an);
        for (int bc = 0; bc < B * C; ++bc)
            kernels().axpy(ga.data() + static_cast<std::size_t>(bc) * T,
                           g.data() + static_cast<std::size_t>(bc) * (T + n) + n, 1,
                           static_cast<std::size_t>(T));
    });
}

}  // namespace springverb
