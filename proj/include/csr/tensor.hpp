#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csr {

// Dense row-major tensor. Shape is a list of positive extents; data length
// always equals the shape product.
template <class S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;

    explicit TensorT(std::vector<int> shp, S fill = S(0)) : shape(std::move(shp)) {
        data.assign(static_cast<size_t>(numel_of(shape)), fill);
    }

    TensorT(std::vector<int> shp, std::vector<S> values)
        : shape(std::move(shp)), data(std::move(values)) {
        if (static_cast<int64_t>(data.size()) != numel_of(shape))
            throw std::invalid_argument("tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
    }

    static int64_t numel_of(const std::vector<int>& shp) {
        int64_t n = 1;
        for (int d : shp) {
            if (d <= 0) throw std::invalid_argument("tensor: non-positive extent in shape " + shape_str(shp));
            n *= d;
        }
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }

    S& operator[](size_t i) { return data[i]; }
    const S& operator[](size_t i) const { return data[i]; }

    bool same_shape(const TensorT& other) const { return shape == other.shape; }

    bool all_finite() const {
        for (S v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    static std::string shape_str(const std::vector<int>& shp) {
        std::ostringstream os;
        os << '[';
        for (size_t i = 0; i < shp.size(); ++i) os << (i ? "," : "") << shp[i];
        os << ']';
        return os.str();
    }

    template <class T>
    TensorT<T> cast() const {
        TensorT<T> out;
        out.shape = shape;
        out.data.resize(data.size());
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T>(data[i]);
        return out;
    }
};

using Tensor = TensorT<float>;

template <class S>
S linf_norm(const TensorT<S>& t) {
    S m = 0;
    for (S v : t.data) m = std::max(m, std::abs(v));
    return m;
}

template <class S>
double l2_norm(const TensorT<S>& t) {
    double s = 0;
    for (S v : t.data) s += double(v) * double(v);
    return std::sqrt(s);
}

}  // namespace csr
