#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dyenet/errors.hpp"

namespace dyenet {

// Dense shapes up to rank 4. Maps use (channels, height, width) order,
// conv weights (out, in, kh, kw).
struct Shape {
    std::array<int, 4> d{0, 0, 0, 0};
    int rank = 0;

    Shape() = default;
    Shape(std::initializer_list<int> dims) {
        require(dims.size() <= 4, "Shape: rank > 4");
        for (int v : dims) {
            require(v > 0, "Shape: non-positive extent");
            d[rank++] = v;
        }
    }

    static Shape scalar() { return Shape{1}; }

    int64_t numel() const {
        int64_t n = 1;
        for (int i = 0; i < rank; ++i) n *= d[i];
        return rank == 0 ? 0 : n;
    }

    int operator[](int i) const { return d[i]; }

    bool operator==(const Shape& o) const { return rank == o.rank && d == o.d; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        std::ostringstream ss;
        ss << "(";
        for (int i = 0; i < rank; ++i) ss << (i ? "x" : "") << d[i];
        ss << ")";
        return ss.str();
    }
};

// Value + optional gradient buffer, row-major. The scalar type is a template
// parameter; the pipeline runs float, gradient checks instantiate double.
template <typename T>
struct Tensor {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until a backward pass touches this tensor

    Tensor() = default;
    explicit Tensor(const Shape& s, T fill = T(0))
        : shape(s), data(static_cast<size_t>(s.numel()), fill) {}

    int64_t numel() const { return shape.numel(); }

    // rank-3 (c, h, w) accessors
    int channels() const { return shape[0]; }
    int height() const { return shape[1]; }
    int width() const { return shape[2]; }

    T& at3(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    T at3(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * shape[1] + y) * shape[2] + x];
    }

    T* plane(int c) { return data.data() + static_cast<size_t>(c) * shape[1] * shape[2]; }
    const T* plane(int c) const {
        return data.data() + static_cast<size_t>(c) * shape[1] * shape[2];
    }

    bool has_grad() const { return !grad.empty(); }

    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), T(0));
    }

    void clear_grad() { grad.clear(); }

    bool all_finite() const {
        for (T v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

template <typename T>
using TensorPtr = std::shared_ptr<Tensor<T>>;

template <typename T>
TensorPtr<T> make_tensor(const Shape& s, T fill = T(0)) {
    return std::make_shared<Tensor<T>>(s, fill);
}

template <typename T>
TensorPtr<T> make_tensor(const Shape& s, std::initializer_list<T> values) {
    auto t = std::make_shared<Tensor<T>>(s);
    require(static_cast<int64_t>(values.size()) == s.numel(), "make_tensor: value count mismatch");
    size_t i = 0;
    for (T v : values) t->data[i++] = v;
    return t;
}

template <typename U, typename T>
TensorPtr<U> cast_tensor(const Tensor<T>& t) {
    auto out = make_tensor<U>(t.shape);
    for (size_t i = 0; i < t.data.size(); ++i) out->data[i] = static_cast<U>(t.data[i]);
    return out;
}

using TensorF = Tensor<float>;
using TensorPtrF = TensorPtr<float>;

}  // namespace dyenet
