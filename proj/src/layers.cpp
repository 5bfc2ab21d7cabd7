#include "springverb/layers.hpp"

namespace springverb {

Tensor Ctx::use(const Tensor& param) {
    if (!tape_) return param;
    auto it = bound_.find(param.storage_id());
    if (it != bound_.end()) return it->second;
    Tensor leaf = tape_->leaf(param);
    bound_.emplace(param.storage_id(), leaf);
    return leaf;
}

std::vector<real> Ctx::grad_of(const Tensor& param) {
    auto it = bound_.find(param.storage_id());
    if (!tape_ || it == bound_.end())
        return std::vector<real>(static_cast<std::size_t>(param.numel()), real{0});
    const auto g = tape_->grad(it->second);
    return {g.begin(), g.end()};
}

Tensor CausalConv::forward(Ctx& ctx, const Tensor& x) const {
    const int left_pad = causal_pad ? dilation * (kernel() - 1) : 0;
    return conv1d(x, ctx.use(w), b.defined() ? ctx.use(b) : b, dilation, left_pad);
}

Tensor Film::forward(Ctx& ctx, const Tensor& x, const Tensor& cond) {
    if (cond.rank() != 2 || cond.dim(1) != cond_dim())
        throw ShapeError("film: cond must be [Bx" + std::to_string(cond_dim()) + "], got " +
                         shape_str(cond.shape()));
    const int C = channels();
    if (x.dim(1) != C)
        throw ShapeError("film: x has " + std::to_string(x.dim(1)) + " channels, generator expects " +
                         std::to_string(C));

    Tensor h = tanh(add(matmul(cond, ctx.use(w1)), ctx.use(b1)));
    Tensor gb = add(matmul(h, ctx.use(w2)), ctx.use(b2));
    Tensor gamma = narrow(gb, 1, 0, C);
    Tensor beta = narrow(gb, 1, C, C);

    Tensor xn = x;
    if (use_batchnorm) xn = batchnorm1d(x, bn_mean, bn_var, ctx.training());
    return scale_shift_channels(xn, gamma, beta);
}

Tensor Prelu::forward(Ctx& ctx, const Tensor& x) const {
    return prelu(x, ctx.use(slope));
}

Tensor gated_activation(const Tensor& x) {
    const int C2 = x.dim(1);
    if (C2 % 2 != 0)
        throw ShapeError("gated_activation needs an even channel count, got " + std::to_string(C2));
    Tensor a = narrow(x, 1, 0, C2 / 2);
    Tensor g = narrow(x, 1, C2 / 2, C2 / 2);
    return mul(tanh(a), sigmoid(g));
}

namespace {

// x[B x C x T] -> gate preactivations [B x T x G] in one matmul
Tensor time_major_matmul(Ctx& ctx, const Tensor& x, const Tensor& w, const Tensor& b) {
    const int B = x.dim(0), C = x.dim(1), T = x.dim(2);
    const int G = w.dim(1);
    Tensor xt = reshape(swap_axes_12(x), {B * T, C});
    Tensor g = add(matmul(xt, ctx.use(w)), ctx.use(b));
    return reshape(g, {B, T, G});
}

Tensor step_slice(const Tensor& seq, int t, int B, int G) {
    return reshape(narrow(seq, 1, t, 1), {B, G});
}

}  // namespace

Lstm::Out Lstm::forward(Ctx& ctx, const Tensor& x, const Tensor& h0, const Tensor& c0) const {
    const int B = x.dim(0), T = x.dim(2), H = hidden;
    Tensor xg = time_major_matmul(ctx, x, wx, b);  // [B x T x 4H]
    const Tensor whb = ctx.use(wh);

    Tensor h = h0.defined() ? h0 : Tensor::zeros({B, H});
    Tensor c = c0.defined() ? c0 : Tensor::zeros({B, H});
    std::vector<Tensor> ys;
    ys.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        Tensor gates = add(step_slice(xg, t, B, 4 * H), matmul(h, whb));
        Tensor i = sigmoid(narrow(gates, 1, 0, H));
        Tensor f = sigmoid(narrow(gates, 1, H, H));
        Tensor g = tanh(narrow(gates, 1, 2 * H, H));
        Tensor o = sigmoid(narrow(gates, 1, 3 * H, H));
        c = add(mul(f, c), mul(i, g));
        h = mul(o, tanh(c));
        ys.push_back(h);
    }
    return {stack_time(ys), h, c};
}

Gru::Out Gru::forward(Ctx& ctx, const Tensor& x, const Tensor& h0) const {
    const int B = x.dim(0), T = x.dim(2), H = hidden;
    Tensor xg = time_major_matmul(ctx, x, wx, b);  // [B x T x 3H]
    const Tensor whb = ctx.use(wh);

    Tensor h = h0.defined() ? h0 : Tensor::zeros({B, H});
    std::vector<Tensor> ys;
    ys.reserve(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        Tensor xt = step_slice(xg, t, B, 3 * H);
        Tensor hg = matmul(h, whb);
        Tensor z = sigmoid(add(narrow(xt, 1, 0, H), narrow(hg, 1, 0, H)));
        Tensor r = sigmoid(add(narrow(xt, 1, H, H), narrow(hg, 1, H, H)));
        Tensor n = tanh(add(narrow(xt, 1, 2 * H, H), mul(r, narrow(hg, 1, 2 * H, H))));
        // h' = (1-z).n + z.h
        h = add(sub(n, mul(z, n)), mul(z, h));
        ys.push_back(h);
    }
    return {stack_time(ys), h};
}

}  // namespace springverb
