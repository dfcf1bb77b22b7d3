#pragma once

#include <cassert>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "aggronet/error.hpp"

namespace aggronet {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (int64_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << ',';
        os << s[i];
    }
    os << ']';
    return os.str();
}

// Dense n-dimensional array, row-major. Element type is float for the
// training path and double for the gradient-check harness.
template <typename T>
class TensorT {
public:
    TensorT() = default;

    explicit TensorT(Shape shape) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(static_cast<size_t>(shape_numel(shape_)), T{});
    }

    TensorT(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (shape_numel(shape_) != static_cast<int64_t>(data_.size()))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static TensorT full(Shape shape, T value) {
        TensorT t(std::move(shape));
        t.fill(value);
        return t;
    }

    const Shape& shape() const { return shape_; }
    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int64_t i) const { return shape_[static_cast<size_t>(i)]; }
    int64_t size() const { return static_cast<int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::span<T> span() { return {data_.data(), data_.size()}; }
    std::span<const T> span() const { return {data_.data(), data_.size()}; }

    T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    const T& operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

    template <typename... Idx>
    T& operator()(Idx... idx) {
        return data_[static_cast<size_t>(flat_index(idx...))];
    }
    template <typename... Idx>
    const T& operator()(Idx... idx) const {
        return data_[static_cast<size_t>(flat_index(idx...))];
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    // Same storage, new shape; element counts must agree.
    TensorT reshaped(Shape shape) const {
        if (shape_numel(shape) != size())
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(shape));
        TensorT out;
        out.shape_ = std::move(shape);
        out.data_ = data_;
        return out;
    }

    bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

    friend bool operator==(const TensorT& a, const TensorT& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void validate_shape() const {
        for (int64_t d : shape_)
            if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape_));
    }

    template <typename... Idx>
    int64_t flat_index(Idx... idx) const {
        assert(sizeof...(idx) == shape_.size());
        int64_t flat = 0;
        size_t axis = 0;
        ((flat = flat * shape_[axis++] + static_cast<int64_t>(idx)), ...);
        return flat;
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <typename U, typename T>
TensorT<U> cast(const TensorT<T>& t) {
    std::vector<U> data(t.span().begin(), t.span().end());
    return TensorT<U>(t.shape(), std::move(data));
}

}  // namespace aggronet
