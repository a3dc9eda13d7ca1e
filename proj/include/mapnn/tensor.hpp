#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "mapnn/error.hpp"

namespace mapnn {

using Index = Eigen::Index;

/// Extents of a dense row-major tensor. Images and feature maps use
/// (batch, channels, height, width).
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<Index> dims) : dims_(dims) { validate(); }
    explicit Shape(std::vector<Index> dims) : dims_(std::move(dims)) { validate(); }

    int rank() const noexcept { return static_cast<int>(dims_.size()); }
    Index operator[](int i) const { return dims_.at(static_cast<std::size_t>(i)); }
    const std::vector<Index>& dims() const noexcept { return dims_; }

    Index numel() const noexcept {
        return std::accumulate(dims_.begin(), dims_.end(), Index{1}, std::multiplies<>());
    }

    bool operator==(const Shape& other) const noexcept { return dims_ == other.dims_; }
    bool operator!=(const Shape& other) const noexcept { return dims_ != other.dims_; }

    std::string str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

private:
    void validate() const {
        for (Index d : dims_) {
            if (d <= 0) throw ShapeError("Shape", "extents must be positive, got " + str());
        }
    }

    std::vector<Index> dims_;
};

/// Dense tensor of Scalar values with shape metadata. Storage is a
/// contiguous Eigen column array addressed in row-major (last index fastest)
/// order, so elementwise math can be written directly as Eigen expressions.
template <typename Scalar>
class Tensor {
public:
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(std::move(shape)), values_(Array::Zero(shape_.numel())) {}

    Tensor(Shape shape, Array values) : shape_(std::move(shape)), values_(std::move(values)) {
        if (values_.size() != shape_.numel()) {
            throw ShapeError("Tensor", "numel", shape_.numel(), values_.size());
        }
    }

    static Tensor zeros(const Shape& shape) { return Tensor(shape); }

    static Tensor constant(const Shape& shape, Scalar value) {
        return Tensor(shape, Array::Constant(shape.numel(), value));
    }

    static Tensor scalar(Scalar value) { return constant(Shape{1}, value); }

    const Shape& shape() const noexcept { return shape_; }
    Index dim(int i) const { return shape_[i]; }
    int rank() const noexcept { return shape_.rank(); }
    Index size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.size() == 0; }

    Array& array() noexcept { return values_; }
    const Array& array() const noexcept { return values_; }
    Scalar* data() noexcept { return values_.data(); }
    const Scalar* data() const noexcept { return values_.data(); }

    Scalar& operator[](Index i) { return values_[i]; }
    Scalar operator[](Index i) const { return values_[i]; }

    Scalar& at(Index b, Index c, Index h, Index w) { return values_[offset(b, c, h, w)]; }
    Scalar at(Index b, Index c, Index h, Index w) const { return values_[offset(b, c, h, w)]; }

    Scalar item() const {
        if (size() != 1) throw ShapeError("Tensor::item", "numel", 1, size());
        return values_[0];
    }

    /// Same values under a new shape with equal element count.
    Tensor reshaped(const Shape& shape) const {
        if (shape.numel() != size()) throw ShapeError("Tensor::reshaped", "numel", size(), shape.numel());
        return Tensor(shape, values_);
    }

    template <typename Other>
    Tensor<Other> cast() const {
        return Tensor<Other>(shape_, values_.template cast<Other>());
    }

    bool all_finite() const { return values_.isFinite().all(); }

private:
    Index offset(Index b, Index c, Index h, Index w) const {
        return ((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
    }

    Shape shape_;
    Array values_;
};

/// Bitwise equality of shape and every stored value.
template <typename Scalar>
bool identical(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    if (a.shape() != b.shape()) return false;
    return std::equal(a.data(), a.data() + a.size(), b.data(),
                      [](Scalar x, Scalar y) { return std::memcmp(&x, &y, sizeof(Scalar)) == 0; });
}

template <typename Scalar>
Scalar max_abs_diff(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
    if (a.shape() != b.shape()) throw ShapeError("max_abs_diff", "shapes differ: " + a.shape().str() + " vs " + b.shape().str());
    if (a.size() == 0) return Scalar(0);
    return (a.array() - b.array()).abs().maxCoeff();
}

}  // namespace mapnn
