#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "memroute/common.hpp"

namespace memroute {

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

template <typename T>
constexpr DType dtype_of() {
    if constexpr (sizeof(T) == 4) return DType::f32;
    return DType::f64;
}

// Live tensor byte counters, used by `bench-cost` to measure the transient
// footprint of attention at a given token count.
namespace alloc_stats {
std::uint64_t current_bytes();
std::uint64_t peak_bytes();
void reset_peak();
namespace detail {
void on_alloc(std::uint64_t bytes);
void on_free(std::uint64_t bytes);
}  // namespace detail
}  // namespace alloc_stats

namespace detail {

template <typename T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty unless gradients were accumulated
    bool requires_grad = false;
    std::uint64_t creator_tape = 0;  // unique id of the tape that recorded the producing op

    explicit TensorImpl(Shape s) : shape(std::move(s)), data(numel(shape), T(0)) {
        alloc_stats::detail::on_alloc(data.size() * sizeof(T));
    }
    TensorImpl(Shape s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        alloc_stats::detail::on_alloc(data.size() * sizeof(T));
    }
    ~TensorImpl() {
        alloc_stats::detail::on_free((data.size() + grad.size()) * sizeof(T));
    }
    TensorImpl(const TensorImpl&) = delete;
    TensorImpl& operator=(const TensorImpl&) = delete;
};

}  // namespace detail

// Dense row-major tensor. Copies of a Tensor share storage; contents are
// treated as immutable once a tensor has been consumed by an op. Gradients
// accumulate into the shared impl until zero_grad().
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(Shape shape) {
        return Tensor(std::make_shared<detail::TensorImpl<T>>(std::move(shape)));
    }
    static Tensor full(Shape shape, T value) {
        Tensor t = zeros(std::move(shape));
        for (T& v : t.impl_->data) v = value;
        return t;
    }
    static Tensor from(Shape shape, std::vector<T> values) {
        if (numel(shape) != values.size())
            throw ShapeError("tensor data length " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape));
        return Tensor(std::make_shared<detail::TensorImpl<T>>(std::move(shape),
                                                              std::move(values)));
    }
    static Tensor scalar(T value) { return from({}, {value}); }

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t ndim() const { return impl_->shape.size(); }
    std::size_t size() const { return impl_->data.size(); }
    std::size_t dim(std::size_t i) const { return impl_->shape[i]; }
    DType dtype() const { return dtype_of<T>(); }

    // Handle semantics: const on the handle is shallow, mutators below act on
    // the shared impl (backward closures capture handles by value).
    std::span<const T> data() const { return impl_->data; }
    std::span<T> mut_data() const { return impl_->data; }
    T item() const {
        if (size() != 1)
            throw ShapeError("item() requires a scalar, got shape " + shape_str(shape()));
        return impl_->data[0];
    }
    T at(std::size_t flat_index) const { return impl_->data[flat_index]; }

    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    const Tensor& set_requires_grad(bool on = true) const {
        impl_->requires_grad = on;
        return *this;
    }

    bool has_grad() const { return impl_ && !impl_->grad.empty(); }
    std::span<const T> grad() const { return impl_->grad; }
    Tensor grad_tensor() const {
        if (!has_grad()) return Tensor::zeros(shape());
        return Tensor::from(shape(), impl_->grad);
    }
    void zero_grad() const {
        if (impl_) {
            alloc_stats::detail::on_free(impl_->grad.size() * sizeof(T));
            impl_->grad.clear();
            impl_->grad.shrink_to_fit();
        }
    }
    // Lazily allocates the gradient buffer and returns it for accumulation.
    std::span<T> grad_buffer() const {
        if (impl_->grad.empty()) {
            impl_->grad.assign(impl_->data.size(), T(0));
            alloc_stats::detail::on_alloc(impl_->grad.size() * sizeof(T));
        }
        return impl_->grad;
    }

    std::uint64_t creator_tape() const { return impl_ ? impl_->creator_tape : 0; }
    void set_creator_tape(std::uint64_t tape_id) const { impl_->creator_tape = tape_id; }

    detail::TensorImpl<T>* impl() const { return impl_.get(); }

    // Deep copy of values only (no grad, no graph).
    Tensor clone() const {
        return Tensor::from(shape(), std::vector<T>(impl_->data.begin(), impl_->data.end()));
    }

private:
    explicit Tensor(std::shared_ptr<detail::TensorImpl<T>> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<detail::TensorImpl<T>> impl_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace memroute
