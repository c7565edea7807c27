#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "graphtrans/errors.hpp"
#include "graphtrans/rng.hpp"

namespace graphtrans {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

// Non-differentiable boolean tensor (padding masks, reachability masks).
struct BoolTensor {
    Shape shape;
    std::vector<std::uint8_t> v;

    BoolTensor() = default;
    BoolTensor(Shape s, std::uint8_t fill)
        : shape(std::move(s)), v(shape_numel(shape), fill) {}

    std::size_t numel() const { return v.size(); }
    bool at(std::size_t i) const { return v[i] != 0; }
};

namespace detail {

template <class Scalar>
struct TensorImpl {
    Shape shape;
    std::vector<Scalar> data;
    std::vector<Scalar> grad;  // empty until first touched
    bool requires_grad = false;
    const void* tape = nullptr;  // tape that recorded the producing op
};

}  // namespace detail

// Dense row-major tensor handle with reference semantics: copies alias the
// same buffer, so tape closures observe gradient accumulation in place.
template <class Scalar>
class Tensor {
public:
    using value_type = Scalar;

    Tensor() = default;

    explicit Tensor(Shape shape)
        : impl_(std::make_shared<detail::TensorImpl<Scalar>>()) {
        impl_->shape = std::move(shape);
        impl_->data.assign(shape_numel(impl_->shape), Scalar(0));
    }

    Tensor(Shape shape, std::vector<Scalar> data)
        : impl_(std::make_shared<detail::TensorImpl<Scalar>>()) {
        if (data.size() != shape_numel(shape)) {
            throw ShapeError("tensor data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        }
        impl_->shape = std::move(shape);
        impl_->data = std::move(data);
    }

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

    static Tensor full(Shape shape, Scalar value) {
        Tensor t(std::move(shape));
        for (auto& x : t.data()) x = value;
        return t;
    }

    static Tensor scalar(Scalar value) { return Tensor({1}, {value}); }

    static Tensor from(Shape shape, std::initializer_list<Scalar> vals) {
        return Tensor(std::move(shape), std::vector<Scalar>(vals));
    }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    std::size_t numel() const { return impl_->data.size(); }

    // Handles have reference semantics, so constness is shallow: a const
    // Tensor still exposes mutable storage, like a const shared_ptr.
    std::vector<Scalar>& data() const { return impl_->data; }
    Scalar* ptr() const { return impl_->data.data(); }

    Scalar value() const {
        if (numel() != 1) {
            throw ShapeError("value() requires a single-element tensor, got " +
                             shape_str(shape()));
        }
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool rg) {
        impl_->requires_grad = rg;
        return *this;
    }

    bool grad_allocated() const { return !impl_->grad.empty(); }

    // Lazily allocated, same shape as data.
    std::vector<Scalar>& grad() const {
        if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Scalar(0));
        return impl_->grad;
    }

    void zero_grad() const {
        if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Scalar(0));
    }

    // Value copy that shares nothing with the source and carries no history.
    Tensor detached_copy() const {
        Tensor t;
        t.impl_ = std::make_shared<detail::TensorImpl<Scalar>>();
        t.impl_->shape = impl_->shape;
        t.impl_->data = impl_->data;
        return t;
    }

    bool same_buffer(const Tensor& other) const { return impl_ == other.impl_; }

    const void* tape_owner() const { return impl_->tape; }
    void set_tape_owner(const void* t) { impl_->tape = t; }

private:
    std::shared_ptr<detail::TensorImpl<Scalar>> impl_;
};

// Recording tape for one forward/backward pass. Ops append their backward
// rules in execution order; backward() replays them in reverse, so every
// node sees its output gradient fully accumulated before it runs.
template <class Scalar>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape*& current() {
        thread_local Tape* cur = nullptr;
        return cur;
    }

    // RAII activation: ops record only while a scope is alive.
    struct Scope {
        explicit Scope(Tape& t) : prev_(current()) { current() = &t; }
        ~Scope() { current() = prev_; }
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        Tape* prev_;
    };

    void record(std::function<void()> backward_rule) {
        nodes_.push_back(std::move(backward_rule));
    }

    // Every op output is registered so backward() can reset intermediate
    // gradients; only leaf (parameter) gradients persist across calls.
    void register_output(Tensor<Scalar> t) { outputs_.push_back(std::move(t)); }

    std::size_t size() const { return nodes_.size(); }

    void backward(Tensor<Scalar> loss) {
        if (loss.numel() != 1) {
            throw ShapeError("backward() requires a scalar loss, got shape " +
                             shape_str(loss.shape()));
        }
        if (loss.tape_owner() != this) {
            throw ValueError("backward() loss was not produced on this tape");
        }
        for (auto& t : outputs_) t.zero_grad();
        loss.grad()[0] += Scalar(1);
        for (std::size_t i = nodes_.size(); i-- > 0;) {
            nodes_[i]();
        }
    }

private:
    std::vector<std::function<void()>> nodes_;
    std::vector<Tensor<Scalar>> outputs_;
};

namespace detail {

// An op output requires grad iff some input does and a tape is active.
template <class Scalar>
inline bool recording(std::initializer_list<const Tensor<Scalar>*> inputs) {
    if (Tape<Scalar>::current() == nullptr) return false;
    for (const Tensor<Scalar>* t : inputs) {
        if (t->defined() && t->requires_grad()) return true;
    }
    return false;
}

template <class Scalar>
inline void mark_output(Tensor<Scalar>& out) {
    out.set_requires_grad(true);
    out.set_tape_owner(Tape<Scalar>::current());
    Tape<Scalar>::current()->register_output(out);
}

}  // namespace detail

// --- parameter initialization ---

template <class Scalar>
Tensor<Scalar> glorot_uniform(int fan_in, int fan_out, Shape shape, Rng& rng) {
    Tensor<Scalar> t(std::move(shape));
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (auto& x : t.data()) x = static_cast<Scalar>(rng.uniform(-limit, limit));
    t.set_requires_grad(true);
    return t;
}

template <class Scalar>
Tensor<Scalar> normal_init(Shape shape, double stddev, Rng& rng) {
    Tensor<Scalar> t(std::move(shape));
    for (auto& x : t.data()) x = static_cast<Scalar>(rng.normal(0.0, stddev));
    t.set_requires_grad(true);
    return t;
}

template <class Scalar>
Tensor<Scalar> zeros_param(Shape shape) {
    Tensor<Scalar> t(std::move(shape));
    t.set_requires_grad(true);
    return t;
}

template <class Scalar>
Tensor<Scalar> ones_param(Shape shape) {
    auto t = Tensor<Scalar>::full(std::move(shape), Scalar(1));
    t.set_requires_grad(true);
    return t;
}

}  // namespace graphtrans
