#pragma once

#include <cstddef>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tacl/common.hpp"

namespace tacl {

inline std::string shape_to_string(std::span<const size_t> shape) {
    std::string s = "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    s += ")";
    return s;
}

// Dense row-major tensor, value-semantics handle over shared storage.
// Rank 0 (empty shape) is a scalar with one element. Gradient buffers live
// next to the values and are filled by Graph::backward.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false) {
        Tensor t;
        t.s_ = std::make_shared<Storage>();
        t.s_->shape = std::move(shape);
        t.s_->values.assign(numel_of(t.s_->shape), T(0));
        t.s_->requires_grad = requires_grad;
        return t;
    }

    static Tensor from_data(std::vector<size_t> shape, std::vector<T> values,
                            bool requires_grad = false) {
        if (numel_of(shape) != values.size())
            throw ShapeError("Tensor: " + std::to_string(values.size()) + " values for shape " +
                             shape_to_string(shape));
        Tensor t;
        t.s_ = std::make_shared<Storage>();
        t.s_->shape = std::move(shape);
        t.s_->values = std::move(values);
        t.s_->requires_grad = requires_grad;
        return t;
    }

    static Tensor scalar(T v, bool requires_grad = false) {
        return from_data({}, {v}, requires_grad);
    }

    bool defined() const { return s_ != nullptr; }
    const std::vector<size_t>& shape() const { return s_->shape; }
    size_t rank() const { return s_->shape.size(); }
    size_t numel() const { return s_->values.size(); }
    size_t extent(size_t axis) const { return s_->shape.at(axis); }

    bool requires_grad() const { return s_->requires_grad; }
    void set_requires_grad(bool rg) { s_->requires_grad = rg; }

    std::span<T> data() { return {s_->values.data(), s_->values.size()}; }
    std::span<const T> data() const { return {s_->values.data(), s_->values.size()}; }

    T* ptr() { return s_->values.data(); }
    const T* ptr() const { return s_->values.data(); }

    T& at(size_t i) { return s_->values[i]; }
    T at(size_t i) const { return s_->values[i]; }
    T& at(size_t i, size_t j) { return s_->values[i * s_->shape[1] + j]; }
    T at(size_t i, size_t j) const { return s_->values[i * s_->shape[1] + j]; }

    T value() const {
        if (numel() != 1) throw ShapeError("Tensor::value: not a scalar");
        return s_->values[0];
    }

    // Gradient buffer, allocated and zeroed by Graph::backward for every
    // tensor that participates in the backward pass.
    bool has_grad() const { return defined() && s_->grad.size() == s_->values.size(); }
    std::span<T> grad() {
        ensure_grad();
        return {s_->grad.data(), s_->grad.size()};
    }
    std::span<const T> grad() const {
        if (!has_grad()) throw ValueError("Tensor::grad: no gradient buffer");
        return {s_->grad.data(), s_->grad.size()};
    }
    void ensure_grad() {
        if (s_->grad.size() != s_->values.size()) s_->grad.assign(s_->values.size(), T(0));
    }
    void zero_grad() { s_->grad.assign(s_->values.size(), T(0)); }
    void drop_grad() { s_->grad.clear(); }

    // Identity of the underlying storage; used as the tensor ref by Graph.
    const void* id() const { return s_.get(); }
    bool same_storage(const Tensor& other) const { return s_ == other.s_; }

    Tensor clone() const {
        Tensor t;
        t.s_ = std::make_shared<Storage>();
        t.s_->shape = s_->shape;
        t.s_->values = s_->values;
        t.s_->requires_grad = s_->requires_grad;
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> v(s_->values.size());
        for (size_t i = 0; i < v.size(); ++i) v[i] = static_cast<U>(s_->values[i]);
        return Tensor<U>::from_data(s_->shape, std::move(v), s_->requires_grad);
    }

    void check_finite(const char* where) const {
        for (T v : s_->values)
            if (!std::isfinite(static_cast<double>(v)))
                throw NumericError(std::string(where) + ": non-finite value in tensor " +
                                   shape_to_string(s_->shape));
    }

private:
    struct Storage {
        std::vector<size_t> shape;
        std::vector<T> values;
        std::vector<T> grad;
        bool requires_grad = false;
    };

    static size_t numel_of(const std::vector<size_t>& shape) {
        size_t n = 1;
        for (size_t e : shape) {
            if (e == 0) throw ShapeError("Tensor: zero extent in shape " + shape_to_string(shape));
            n *= e;
        }
        return n;
    }

    std::shared_ptr<Storage> s_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace tacl
