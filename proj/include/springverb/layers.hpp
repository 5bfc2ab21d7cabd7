#pragma once

#include <unordered_map>

#include "springverb/tensor.hpp"

namespace springverb {

/// Per-forward context: carries the tape (null for inference) and binds each
/// parameter tensor to it exactly once, so gradients can be read back by
/// parameter identity after backward().
class Ctx {
public:
    explicit Ctx(Tape* tape = nullptr, bool training = false) : tape_(tape), training_(training) {}

    Tape* tape() const { return tape_; }
    bool training() const { return training_; }

    /// The tape-bound alias of a parameter (or the parameter itself when
    /// there is no tape).
    Tensor use(const Tensor& param);

    /// Gradient of a parameter after backward; zeros when the parameter was
    /// never reached.
    std::vector<real> grad_of(const Tensor& param);

private:
    Tape* tape_;
    bool training_;
    std::unordered_map<const void*, Tensor> bound_;
};

struct CausalConv {
    Tensor w;  // [Cout x Cin x K]
    Tensor b;  // [Cout], may be undefined
    int dilation = 1;
    bool causal_pad = true;  // false: valid convolution, caller re-pads

    int kernel() const { return w.dim(2); }
    int in_channels() const { return w.dim(1); }
    int out_channels() const { return w.dim(0); }
    Tensor forward(Ctx& ctx, const Tensor& x) const;
};

/// Feature-wise modulation: a two-layer generator (cond -> 16 -> 2C, tanh
/// hidden) produces per-channel gamma/beta applied to x, optionally after
/// per-channel batch normalization.
struct Film {
    Tensor w1, b1;  // [C_cond x 16], [16]
    Tensor w2, b2;  // [16 x 2C], [2C]
    bool use_batchnorm = false;
    Tensor bn_mean, bn_var;  // [C] running stats, used when use_batchnorm

    int cond_dim() const { return w1.dim(0); }
    int channels() const { return w2.dim(1) / 2; }
    Tensor forward(Ctx& ctx, const Tensor& x, const Tensor& cond);
};

struct Prelu {
    Tensor slope;  // [C]
    Tensor forward(Ctx& ctx, const Tensor& x) const;
};

/// tanh(first half of channels) * sigmoid(second half); channel count must
/// be even.
Tensor gated_activation(const Tensor& x);

/// LSTM over [B x C x T] with gate layout [i f g o]; returns the full hidden
/// sequence [B x H x T] plus final (h, c).
struct Lstm {
    Tensor wx;  // [C x 4H]
    Tensor wh;  // [H x 4H]
    Tensor b;   // [4H]
    int hidden = 0;

    struct Out {
        Tensor y;
        Tensor h;
        Tensor c;
    };
    Out forward(Ctx& ctx, const Tensor& x, const Tensor& h0 = {}, const Tensor& c0 = {}) const;
};

/// GRU with gate layout [z r n]; candidate n = tanh(Wn x + r . (Un h) + bn).
struct Gru {
    Tensor wx;  // [C x 3H]
    Tensor wh;  // [H x 3H]
    Tensor b;   // [3H]
    int hidden = 0;

    struct Out {
        Tensor y;
        Tensor h;
    };
    Out forward(Ctx& ctx, const Tensor& x, const Tensor& h0 = {}) const;
};

}  // namespace springverb
