#include "springverb/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace springverb {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

std::int64_t shape_numel(const Shape& s) {
    std::int64_t n = 1;
    for (int d : s) n *= d;
    return n;
}

namespace {

// zero-length dims are allowed (empty audio clips); negative never
void check_shape(const Shape& s) {
    for (int d : s) {
        if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
    }
}

}  // namespace

Tensor Tensor::zeros(Shape shape) {
    check_shape(shape);
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<real>>(shape_numel(t.shape_), real{0});
    return t;
}

Tensor Tensor::full(Shape shape, real value) {
    Tensor t = zeros(std::move(shape));
    for (auto& v : *t.data_) v = value;
    return t;
}

Tensor Tensor::scalar_value(real v) {
    return from({1}, {v});
}

Tensor Tensor::from(Shape shape, std::vector<real> values) {
    check_shape(shape);
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
        throw ShapeError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(shape));
    Tensor t;
    t.shape_ = std::move(shape);
    t.data_ = std::make_shared<std::vector<real>>(std::move(values));
    return t;
}

int Tensor::dim(int i) const {
    int r = rank();
    if (i < 0) i += r;
    if (i < 0 || i >= r) throw ShapeError("axis out of range for " + shape_str(shape_));
    return shape_[static_cast<std::size_t>(i)];
}

std::int64_t Tensor::numel() const {
    return data_ ? static_cast<std::int64_t>(data_->size()) : 0;
}

std::span<const real> Tensor::data() const {
    if (!data_) throw std::logic_error("tensor is empty");
    return {data_->data(), data_->size()};
}

std::span<real> Tensor::mut_data() {
    if (!data_) throw std::logic_error("tensor is empty");
    return {data_->data(), data_->size()};
}

Tensor Tensor::detached() const {
    Tensor t = *this;
    t.tape_ = nullptr;
    t.node_ = -1;
    return t;
}

Tensor Tensor::with_shape(Shape shape) const {
    if (shape_numel(shape) != numel())
        throw ShapeError("with_shape " + shape_str(shape_) + " -> " + shape_str(shape) +
                         " changes element count");
    Tensor t = detached();
    t.shape_ = std::move(shape);
    return t;
}

real Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape_str(shape_));
    return (*data_)[0];
}

real Tensor::at(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank())
        throw ShapeError("index rank mismatch for " + shape_str(shape_));
    std::int64_t flat = 0;
    int axis = 0;
    for (int i : idx) {
        flat = flat * shape_[static_cast<std::size_t>(axis)] + i;
        ++axis;
    }
    return (*data_)[static_cast<std::size_t>(flat)];
}

// --- Tape --------------------------------------------------------------------

Tensor Tape::leaf(const Tensor& value) {
    if (value.on_tape()) throw std::logic_error("leaf() input is already on a tape");
    Tensor t = value;
    t.tape_ = this;
    t.node_ = static_cast<int>(nodes_.size());
    nodes_.push_back({t.numel(), nullptr});
    grads_.emplace_back();
    return t;
}

Tensor Tape::emit(Tensor value, BackwardFn fn) {
    value.tape_ = this;
    value.node_ = static_cast<int>(nodes_.size());
    nodes_.push_back({value.numel(), std::move(fn)});
    grads_.emplace_back();
    return value;
}

void Tape::backward(const Tensor& loss) {
    if (loss.tape() != this) throw std::logic_error("backward: loss is not on this tape");
    if (loss.numel() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    if (ran_backward_) throw std::logic_error("backward: tape already consumed");
    ran_backward_ = true;
    grad_buf(loss.node())[0] = 1;
    for (int i = loss.node(); i >= 0; --i) {
        if (grads_[static_cast<std::size_t>(i)].empty()) continue;  // loss never reached this node
        if (nodes_[static_cast<std::size_t>(i)].back) nodes_[static_cast<std::size_t>(i)].back(*this, i);
    }
}

std::span<const real> Tape::grad(const Tensor& t) {
    if (t.tape() != this) throw std::logic_error("grad: tensor is not on this tape");
    return grad_buf(t.node());
}

std::span<real> Tape::grad_buf(int node) {
    auto& g = grads_[static_cast<std::size_t>(node)];
    if (g.empty()) g.assign(static_cast<std::size_t>(nodes_[static_cast<std::size_t>(node)].numel), real{0});
    return {g.data(), g.size()};
}

bool Tape::grad_present(int node) const {
    return !grads_[static_cast<std::size_t>(node)].empty();
}

bool all_finite(std::span<const real> v) {
    for (real x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace springverb
