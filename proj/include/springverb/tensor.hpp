#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "springverb/common.hpp"

namespace springverb {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
std::int64_t shape_numel(const Shape& s);

class Tape;

/// Dense row-major tensor. Storage is shared between copies; a tensor that
/// carries a tape node additionally participates in reverse-mode autodiff.
/// Shape is fixed at construction.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, real value);
    static Tensor scalar_value(real v);
    static Tensor from(Shape shape, std::vector<real> values);

    bool defined() const { return data_ != nullptr; }
    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const;
    std::int64_t numel() const;

    std::span<const real> data() const;
    // In-place access to the underlying buffer. Intended for leaves
    // (parameter updates, test setup); never for tensors already recorded
    // on a tape.
    std::span<real> mut_data();

    Tape* tape() const { return tape_; }
    int node() const { return node_; }
    bool on_tape() const { return tape_ != nullptr; }

    /// Same storage, no tape node.
    Tensor detached() const;

    /// Same storage under a different shape (element count preserved), detached.
    Tensor with_shape(Shape shape) const;

    /// Value of a one-element tensor.
    real item() const;
    real at(std::initializer_list<int> idx) const;

    const void* storage_id() const { return data_.get(); }

private:
    friend class Tape;
    std::shared_ptr<std::vector<real>> data_;
    Shape shape_;
    Tape* tape_ = nullptr;
    int node_ = -1;
};

/// Reverse-mode tape. Ops append nodes in forward order; backward() replays
/// the recorded closures once each, in reverse. A tape is single-threaded
/// and is rebuilt for every optimization step.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, int self)>;

    /// Register a detached tensor as a differentiable leaf.
    Tensor leaf(const Tensor& value);

    /// Bind `value` (detached storage) to a new node with the given backward
    /// closure. Building block for every differentiable op.
    Tensor emit(Tensor value, BackwardFn fn);

    /// Seed d(loss)/d(loss) = 1 and propagate. `loss` must be a scalar on
    /// this tape; a tape can run backward once.
    void backward(const Tensor& loss);

    /// Accumulated gradient of a tensor on this tape; zeros when the loss
    /// did not reach it.
    std::span<const real> grad(const Tensor& t);

    /// Gradient buffer for a node, allocated zeroed on first use.
    std::span<real> grad_buf(int node);
    bool grad_present(int node) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        std::int64_t numel;
        BackwardFn back;
    };
    std::vector<Node> nodes_;
    std::vector<std::vector<real>> grads_;
    bool ran_backward_ = false;
};

// --- elementwise -----------------------------------------------------------

enum class EwKind { add, sub, mul, div, tanh, sigmoid, relu, abs, square, log, exp, scale, sqrt, clamp_min };

/// Generic entry point; binary kinds take b, scalar-parameterized kinds
/// (scale, clamp_min) take c.
Tensor elementwise(EwKind kind, const Tensor& a, const Tensor* b = nullptr, real c = 0);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor log(const Tensor& a);   // input clamped below at 1e-12
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);  // gradient 0 at the origin
Tensor scale(const Tensor& a, real s);
Tensor clamp_min(const Tensor& a, real c);

// --- reductions -------------------------------------------------------------

enum class ReduceKind { sum, mean, max };

/// Reduce over `axes` (all axes when empty); reduced axes are dropped from
/// the shape. Max routes its gradient to the first argmax in flat order.
Tensor reduce(ReduceKind kind, const Tensor& a, const std::vector<int>& axes = {});

Tensor sum(const Tensor& a, const std::vector<int>& axes = {});
Tensor mean(const Tensor& a, const std::vector<int>& axes = {});
Tensor reduce_max(const Tensor& a, const std::vector<int>& axes = {});

// --- linear algebra ---------------------------------------------------------

/// [m x k] @ [k x n] -> [m x n]
Tensor matmul(const Tensor& a, const Tensor& b);

// --- shape ------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape);
Tensor narrow(const Tensor& a, int axis, int start, int len);
Tensor concat(const std::vector<Tensor>& parts, int axis);
/// [B x C x T] -> [B x T x C]
Tensor swap_axes_12(const Tensor& a);
/// Stack T tensors of shape [B x H] into [B x H x T].
Tensor stack_time(const std::vector<Tensor>& steps);
/// Prepend n zeros along the time axis of [B x C x T].
Tensor pad_time_left(const Tensor& a, int n);

// --- neural-net primitives ---------------------------------------------------

/// Dilated 1-D convolution, batch x channels x time. Kernel tap k reaches
/// k*dilation samples into the past of the left-padded input, so the output
/// is causal when left_pad = dilation*(K-1). T' = T + left_pad - dilation*(K-1).
/// `bias` may be undefined.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int dilation, int left_pad);

/// y = x >= 0 ? x : slope[c] * x, per channel of [B x C x T].
Tensor prelu(const Tensor& x, const Tensor& slope);

/// Causal sliding max over time with -inf left padding of (kernel-1);
/// output length ceil(T/stride). Gradient goes to the first argmax.
Tensor max_pool1d(const Tensor& x, int kernel, int stride);

/// y[b,c,t] = gamma[b,c] * x[b,c,t] + beta[b,c].
Tensor scale_shift_channels(const Tensor& x, const Tensor& gamma, const Tensor& beta);

/// Per-channel normalization of [B x C x T] without affine terms.
/// Training mode uses batch statistics over B*T and updates the running
/// buffers in place (momentum 0.1 convention, unbiased variance in the
/// running estimate); eval mode normalizes with the running buffers.
Tensor batchnorm1d(const Tensor& x, Tensor& running_mean, Tensor& running_var,
                   bool training, real momentum = static_cast<real>(0.1),
                   real eps = static_cast<real>(1e-5));

bool all_finite(std::span<const real> v);

}  // namespace springverb
