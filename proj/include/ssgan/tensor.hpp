#pragma once

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <sstream>
#include <string>

#include "ssgan/errors.hpp"

namespace ssgan {

// Axis layout is NCHW with missing leading axes treated as 1, so a rank-2
// shape (a, b) reads as (1, 1, a, b) wherever an op needs all four axes.
class Shape {
public:
    Shape() = default;

    Shape(std::initializer_list<int> dims) {
        if (dims.size() < 1 || dims.size() > 4) {
            throw ShapeError("shape rank must be 1..4, got " + std::to_string(dims.size()));
        }
        rank_ = static_cast<int>(dims.size());
        int i = 0;
        for (int d : dims) {
            if (d <= 0) {
                throw ShapeError("shape axis " + std::to_string(i) +
                                 " must be positive, got " + std::to_string(d));
            }
            d_[i++] = d;
        }
    }

    int rank() const { return rank_; }
    int dim(int i) const { return d_[i]; }

    // Padded NCHW view.
    int n() const { return padded(0); }
    int c() const { return padded(1); }
    int h() const { return padded(2); }
    int w() const { return padded(3); }

    std::int64_t count() const {
        std::int64_t p = 1;
        for (int i = 0; i < rank_; ++i) p *= d_[i];
        return p;
    }

    bool operator==(const Shape& o) const {
        if (rank_ != o.rank_) return false;
        for (int i = 0; i < rank_; ++i)
            if (d_[i] != o.d_[i]) return false;
        return true;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        std::ostringstream os;
        os << '(';
        for (int i = 0; i < rank_; ++i) os << (i ? "," : "") << d_[i];
        os << ')';
        return os.str();
    }

private:
    int padded(int axis) const {
        int missing = 4 - rank_;
        return axis < missing ? 1 : d_[axis - missing];
    }

    std::array<int, 4> d_{1, 1, 1, 1};
    int rank_ = 0;
};

// Dense row-major value carrier (channel-major within each sample). Storage
// is a flat Eigen array so elementwise math stays expression-friendly.
template <typename S>
class Tensor {
public:
    using Scalar = S;
    using Storage = Eigen::Array<S, Eigen::Dynamic, 1>;

    Tensor() = default;

    explicit Tensor(Shape shape) : shape_(shape), data_(Storage::Zero(shape.count())) {}

    Tensor(Shape shape, Storage data) : shape_(shape), data_(std::move(data)) {
        if (data_.size() != shape_.count()) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_.str());
        }
    }

    Tensor(Shape shape, std::initializer_list<S> values) : shape_(shape) {
        if (static_cast<std::int64_t>(values.size()) != shape_.count()) {
            throw ShapeError("initializer length " + std::to_string(values.size()) +
                             " does not match shape " + shape_.str());
        }
        data_.resize(shape_.count());
        std::int64_t i = 0;
        for (S v : values) data_[i++] = v;
    }

    static Tensor zeros(Shape shape) { return Tensor(shape); }

    static Tensor full(Shape shape, S value) {
        Tensor t(shape);
        t.data_.setConstant(value);
        return t;
    }

    static Tensor scalar(S value) { return full(Shape{1}, value); }

    const Shape& shape() const { return shape_; }
    std::int64_t size() const { return data_.size(); }
    bool is_scalar() const { return shape_.count() == 1; }

    Storage& array() { return data_; }
    const Storage& array() const { return data_; }
    S* data() { return data_.data(); }
    const S* data() const { return data_.data(); }

    S& operator[](std::int64_t i) { return data_[i]; }
    S operator[](std::int64_t i) const { return data_[i]; }

    S& at(int n, int c, int h, int w) { return data_[offset(n, c, h, w)]; }
    S at(int n, int c, int h, int w) const { return data_[offset(n, c, h, w)]; }

    std::int64_t offset(int n, int c, int h, int w) const {
        const Shape& s = shape_;
        return ((static_cast<std::int64_t>(n) * s.c() + c) * s.h() + h) * s.w() + w;
    }

    // Row-major reinterpretation; element count must be unchanged.
    Tensor reshaped(Shape shape) const {
        if (shape.count() != shape_.count()) {
            throw ShapeError("reshape from " + shape_.str() + " to " + shape.str() +
                             " changes element count");
        }
        return Tensor(shape, data_);
    }

    bool all_finite() const { return data_.isFinite().all(); }

    // Validity check: every value finite. Asserted after forward passes in tests.
    void require_finite(const std::string& what) const {
        if (!all_finite()) {
            throw NumericError("non-finite values in " + what);
        }
    }

    template <typename T>
    Tensor<T> cast() const {
        return Tensor<T>(shape_, data_.template cast<T>());
    }

private:
    Shape shape_;
    Storage data_;
};

template <typename S>
void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape().str() +
                         " vs " + b.shape().str());
    }
}

} // namespace ssgan
