#include <cmath>
#include <cstring>
#include <limits>

#include "springverb/kernels.hpp"
#include "springverb/tensor.hpp"
#include "op_support.hpp"

namespace springverb {

using detail::joint_tape;

// out[b,co,t] = bias[co] + sum_{ci,k} w[co,ci,k] * xpad[b,ci,t + (K-1-k)*dilation]
// with xpad = left_pad zeros prepended; tap k therefore reaches k*dilation
// samples into the past once left_pad = dilation*(K-1).
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int dilation, int left_pad) {
    if (x.rank() != 3 || w.rank() != 3)
        throw ShapeError("conv1d expects x[BxCinxT], w[CoutxCinxK]; got " + shape_str(x.shape()) +
                         ", " + shape_str(w.shape()));
    if (dilation < 1) throw ShapeError("conv1d: dilation must be >= 1");
    if (left_pad < 0) throw ShapeError("conv1d: left_pad must be >= 0");
    const int B = x.dim(0), Cin = x.dim(1), T = x.dim(2);
    const int Cout = w.dim(0), K = w.dim(2);
    if (w.dim(1) != Cin)
        throw ShapeError("conv1d channel mismatch: x " + shape_str(x.shape()) + " vs w " +
                         shape_str(w.shape()));
    if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != Cout))
        throw ShapeError("conv1d bias must be [Cout]");
    const int Tout = T + left_pad - dilation * (K - 1);
    if (Tout <= 0)
        throw ShapeError("conv1d: input shorter than receptive field (T=" + std::to_string(T) +
                         ", need > " + std::to_string(dilation * (K - 1) - left_pad) + ")");

    Tensor out = Tensor::zeros({B, Cout, Tout});
    auto po = out.mut_data();
    const auto px = x.data();
    const auto pw = w.data();
    const auto& ker = kernels();

    for (int b = 0; b < B; ++b) {
        for (int co = 0; co < Cout; ++co) {
            real* orow = po.data() + (static_cast<std::size_t>(b) * Cout + co) * Tout;
            if (bias.defined()) {
                const real bv = bias.data()[static_cast<std::size_t>(co)];
                for (int t = 0; t < Tout; ++t) orow[static_cast<std::size_t>(t)] = bv;
            }
            for (int ci = 0; ci < Cin; ++ci) {
                const real* xrow = px.data() + (static_cast<std::size_t>(b) * Cin + ci) * T;
                for (int k = 0; k < K; ++k) {
                    const real wv = pw[(static_cast<std::size_t>(co) * Cin + ci) * K + k];
                    if (wv == 0) continue;
                    // x index = t + (K-1-k)*dilation - left_pad
                    const int off = (K - 1 - k) * dilation - left_pad;
                    const int t0 = std::max(0, -off);
                    const int t1 = std::min(Tout, T - off);
                    if (t1 > t0)
                        ker.axpy(orow + t0, xrow + t0 + off, wv, static_cast<std::size_t>(t1 - t0));
                }
            }
        }
    }

    Tape* tape = joint_tape({&x, &w, &bias});
    if (!tape) return out;

    const Tensor xv = x.detached(), wv = w.detached();
    const int xn = x.node(), wn = w.node(), bn = bias.defined() ? bias.node() : -1;
    return tape->emit(std::move(out), [xv, wv, xn, wn, bn, B, Cin, Cout, T, Tout, K, dilation,
                                       left_pad](Tape& t, int self) {
        const auto g = t.grad_buf(self);
        const auto& ker = kernels();
        const auto px2 = xv.data();
        const auto pw2 = wv.data();
        if (bn >= 0) {
            auto gb = t.grad_buf(bn);
            for (int b = 0; b < B; ++b)
                for (int co = 0; co < Cout; ++co)
                    gb[static_cast<std::size_t>(co)] +=
                        ker.sum(g.data() + (static_cast<std::size_t>(b) * Cout + co) * Tout,
                                static_cast<std::size_t>(Tout));
        }
        for (int b = 0; b < B; ++b) {
            for (int co = 0; co < Cout; ++co) {
                const real* grow = g.data() + (static_cast<std::size_t>(b) * Cout + co) * Tout;
                for (int ci = 0; ci < Cin; ++ci) {
                    const int base = b * Cin + ci;
                    for (int k = 0; k < K; ++k) {
                        const int off = (K - 1 - k) * dilation - left_pad;
                        const int t0 = std::max(0, -off);
                        const int t1 = std::min(Tout, T - off);
                        if (t1 <= t0) continue;
                        const std::size_t wi = (static_cast<std::size_t>(co) * Cin + ci) * K + k;
                        if (wn >= 0) {
                            auto gw = t.grad_buf(wn);
                            gw[wi] += ker.dot(grow + t0,
                                              px2.data() + static_cast<std::size_t>(base) * T + t0 + off,
                                              static_cast<std::size_t>(t1 - t0));
                        }
                        if (xn >= 0) {
                            auto gx = t.grad_buf(xn);
                            ker.axpy(gx.data() + static_cast<std::size_t>(base) * T + t0 + off,
                                     grow + t0, pw2[wi], static_cast<std::size_t>(t1 - t0));
                        }
                    }
                }
            }
        }
    });
}

Tensor prelu(const Tensor& x, const Tensor& slope) {
    if (x.rank() != 3) throw ShapeError("prelu expects [BxCxT], got " + shape_str(x.shape()));
    const int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    if (slope.rank() != 1 || slope.dim(0) != C)
        throw ShapeError("prelu slope must be [C=" + std::to_string(C) + "]");

    Tensor out = Tensor::zeros({B, C, T});
    auto po = out.mut_data();
    const auto px = x.data();
    const auto ps = slope.data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const real s = ps[static_cast<std::size_t>(c)];
            const std::size_t base = (static_cast<std::size_t>(b) * C + c) * T;
            for (int t = 0; t < T; ++t) {
                const real v = px[base + static_cast<std::size_t>(t)];
                po[base + static_cast<std::size_t>(t)] = v >= 0 ? v : s * v;
            }
        }

    Tape* tape = joint_tape({&x, &slope});
    if (!tape) return out;
    const Tensor xv = x.detached(), sv = slope.detached();
    const int xn = x.node(), sn = slope.node();
    return tape->emit(std::move(out), [xv, sv, xn, sn, B, C, T](Tape& t, int self) {
        const auto g = t.grad_buf(self);
        const auto px2 = xv.data();
        const auto ps2 = sv.data();
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                const real s = ps2[static_cast<std::size_t>(c)];
                const std::size_t base = (static_cast<std::size_t>(b) * C + c) * T;
                for (int tt = 0; tt < T; ++tt) {
                    const real v = px2[base + static_cast<std::size_t>(tt)];
                    const real gv = g[base + static_cast<std::size_t>(tt)];
                    if (xn >= 0) t.grad_buf(xn)[base + static_cast<std::size_t>(tt)] += v >= 0 ? gv : s * gv;
                    if (sn >= 0 && v < 0) t.grad_buf(sn)[static_cast<std::size_t>(c)] += gv * v;
                }
            }
    });
}

Tensor max_pool1d(const Tensor& x, int kernel, int stride) {
    if (x.rank() != 3) throw ShapeError("max_pool1d expects [BxCxT], got " + shape_str(x.shape()));
    if (kernel < 1 || stride < 1) throw ShapeError("max_pool1d: kernel and stride must be >= 1");
    const int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    const int Tout = (T - 1) / stride + 1;  // == ceil(T/stride) with (kernel-1) left pad

    Tensor out = Tensor::zeros({B, C, Tout});
    auto po = out.mut_data();
    const auto px = x.data();
    auto argmax = std::make_shared<std::vector<std::int64_t>>(po.size(), -1);
    for (int bc = 0; bc < B * C; ++bc) {
        const std::size_t base = static_cast<std::size_t>(bc) * T;
        for (int to = 0; to < Tout; ++to) {
            const int hi = to * stride;            // window covers [hi-kernel+1, hi]
            const int lo = std::max(0, hi - kernel + 1);
            real best = -std::numeric_limits<real>::infinity();
            std::int64_t besti = -1;
            for (int ti = lo; ti <= hi; ++ti) {
                const real v = px[base + static_cast<std::size_t>(ti)];
                if (v > best) {
                    best = v;
                    besti = static_cast<std::int64_t>(base) + ti;
                }
            }
            po[static_cast<std::size_t>(bc) * Tout + to] = best;
            (*argmax)[static_cast<std::size_t>(bc) * Tout + to] = besti;
        }
    }

    Tape* tape = joint_tape({&x});
    if (!tape) return out;
    const int xn = x.node();
    return tape->emit(std::move(out), [xn, argmax](Tape& t, int self) {
        if (xn < 0) return;
        const auto g = t.grad_buf(self);
        auto gx = t.grad_buf(xn);
        for (std::size_t i = 0; i < g.size(); ++i)
            gx[static_cast<std::size_t>((*argmax)[i])] += g[i];
    });
}

Tensor scale_shift_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
    if (x.rank() != 3) throw ShapeError("scale_shift_channels expects [BxCxT]");
    const int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    if (gamma.rank() != 2 || gamma.dim(0) != B || gamma.dim(1) != C || gamma.shape() != beta.shape())
        throw ShapeError("scale_shift_channels: gamma/beta must be [BxC]; got " +
                         shape_str(gamma.shape()) + ", " + shape_str(beta.shape()));

    Tensor out = Tensor::zeros({B, C, T});
    auto po = out.mut_data();
    const auto px = x.data();
    const auto pg = gamma.data();
    const auto pb = beta.data();
    for (int bc = 0; bc < B * C; ++bc) {
        const real gm = pg[static_cast<std::size_t>(bc)];
        const real bt = pb[static_cast<std::size_t>(bc)];
        const std::size_t base = static_cast<std::size_t>(bc) * T;
        for (int t = 0; t < T; ++t)
            po[base + static_cast<std::size_t>(t)] = gm * px[base + static_cast<std::size_t>(t)] + bt;
    }

    Tape* tape = joint_tape({&x, &gamma, &beta});
    if (!tape) return out;
    const Tensor xv = x.detached(), gv = gamma.detached();
    const int xn = x.node(), gn = gamma.node(), btn = beta.node();
    return tape->emit(std::move(out), [xv, gv, xn, gn, btn, B, C, T](Tape& t, int self) {
        const auto g = t.grad_buf(self);
        const auto px2 = xv.data();
        const auto pg2 = gv.data();
        const auto& ker = kernels();
        for (int bc = 0; bc < B * C; ++bc) {
            const std::size_t base = static_cast<std::size_t>(bc) * T;
            if (xn >= 0)
                ker.axpy(t.grad_buf(xn).data() + base, g.data() + base,
                         pg2[static_cast<std::size_t>(bc)], static_cast<std::size_t>(T));
            if (gn >= 0)
                t.grad_buf(gn)[static_cast<std::size_t>(bc)] +=
                    ker.dot(g.data() + base, px2.data() + base, static_cast<std::size_t>(T));
            if (btn >= 0)
                t.grad_buf(btn)[static_cast<std::size_t>(bc)] +=
                    ker.sum(g.data() + base, static_cast<std::size_t>(T));
        }
    });
}

Tensor batchnorm1d(const Tensor& x, Tensor& running_mean, Tensor& running_var, bool training,
                   real momentum, real eps) {
    if (x.rank() != 3) throw ShapeError("batchnorm1d expects [BxCxT]");
    const int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    if (running_mean.numel() != C || running_var.numel() != C)
        throw ShapeError("batchnorm1d running stats must be [C]");
    const std::int64_t n = static_cast<std::int64_t>(B) * T;

    std::vector<real> mean_c(static_cast<std::size_t>(C)), invstd_c(static_cast<std::size_t>(C));
    const auto px = x.data();
    if (training) {
        for (int c = 0; c < C; ++c) {
            real s = 0;
            for (int b = 0; b < B; ++b)
                s += kernels().sum(px.data() + (static_cast<std::size_t>(b) * C + c) * T,
                                   static_cast<std::size_t>(T));
            const real mu = s / static_cast<real>(n);
            real sq = 0;
            for (int b = 0; b < B; ++b) {
                const real* row = px.data() + (static_cast<std::size_t>(b) * C + c) * T;
                for (int t = 0; t < T; ++t) sq += (row[t] - mu) * (row[t] - mu);
            }
            const real var_biased = sq / static_cast<real>(n);
            mean_c[static_cast<std::size_t>(c)] = mu;
            invstd_c[static_cast<std::size_t>(c)] = 1 / std::sqrt(var_biased + eps);
            // running estimate uses the unbiased variance
            const real var_unbiased = n > 1 ? sq / static_cast<real>(n - 1) : var_biased;
            auto rm = running_mean.mut_data();
            auto rv = running_var.mut_data();
            rm[static_cast<std::size_t>(c)] = (1 - momentum) * rm[static_cast<std::size_t>(c)] + momentum * mu;
            rv[static_cast<std::size_t>(c)] =
                (1 - momentum) * rv[static_cast<std::size_t>(c)] + momentum * var_unbiased;
        }
    } else {
        const auto rm = running_mean.data();
        const auto rv = running_var.data();
        for (int c = 0; c < C; ++c) {
            mean_c[static_cast<std::size_t>(c)] = rm[static_cast<std::size_t>(c)];
            invstd_c[static_cast<std::size_t>(c)] = 1 / std::sqrt(rv[static_cast<std::size_t>(c)] + eps);
        }
    }

    Tensor out = Tensor::zeros({B, C, T});
    auto po = out.mut_data();
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const std::size_t base = (static_cast<std::size_t>(b) * C + c) * T;
            const real mu = mean_c[static_cast<std::size_t>(c)];
            const real is = invstd_c[static_cast<std::size_t>(c)];
            for (int t = 0; t < T; ++t)
                po[base + static_cast<std::size_t>(t)] = (px[base + static_cast<std::size_t>(t)] - mu) * is;
        }

    Tape* tape = joint_tape({&x});
    if (!tape) return out;
    const Tensor ov = out.detached();
    const int xn = x.node();
    auto invstd = std::make_shared<std::vector<real>>(std::move(invstd_c));
    return tape->emit(std::move(out), [ov, xn, invstd, training, B, C, T, n](Tape& t, int self) {
        if (xn < 0) return;
        const auto g = t.grad_buf(self);
        auto gx = t.grad_buf(xn);
        const auto xhat = ov.data();
        for (int c = 0; c < C; ++c) {
            const real is = (*invstd)[static_cast<std::size_t>(c)];
            if (!training) {
                for (int b = 0; b < B; ++b) {
                    const std::size_t base = (static_cast<std::size_t>(b) * C + c) * T;
                    kernels().axpy(gx.data() + base, g.data() + base, is, static_cast<std::size_t>(T));
                }
                continue;
            }
            real gsum = 0, gdot = 0;
            for (int b = 0; b < B; ++b) {
                const std::size_t base = (static_cast<std::size_t>(b) * C + c) * T;
                gsum += kernels().sum(g.data() + base, static_cast<std::size_t>(T));
                gdot += kernels().dot(g.data() + base, xhat.data() + base, static_cast<std::size_t>(T));
            }
            const real gmean = gsum / static_cast<real>(n);
            const real gdmean = gdot / static_cast<real>(n);
            for (int b = 0; b < B; ++b) {
                const std::size_t base = (static_cast<std::size_t>(b) * C + c) * T;
                for (int tt = 0; tt < T; ++tt)
                    gx[base + static_cast<std::size_t>(tt)] +=
                        is * (g[base + static_cast<std::size_t>(tt)] - gmean -
                              xhat[base + static_cast<std::size_t>(tt)] * gdmean);
            }
        }
    });
}

}  // namespace springverb
