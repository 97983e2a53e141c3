#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "planoforge/errors.hpp"
#include "planoforge/rng.hpp"

namespace planoforge {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major tensor of doubles. Values are validated finite on checked
// construction; graph ops re-assert finiteness in debug builds. Tensors are
// treated as immutable once handed to a Graph and are safe to share
// read-only across threads.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != shape_size(shape))
            throw ShapeError("tensor: data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(shape));
        for (std::size_t d : shape)
            if (d == 0) throw ShapeError("tensor: zero dimension in shape " + shape_str(shape));
        for (double v : data)
            if (!std::isfinite(v)) throw ValueError("tensor: non-finite value at creation");
    }

    static Tensor zeros(Shape s) {
        Tensor t;
        t.shape = std::move(s);
        t.data.assign(shape_size(t.shape), 0.0);
        return t;
    }

    static Tensor full(Shape s, double v) {
        Tensor t = zeros(std::move(s));
        for (double& x : t.data) x = v;
        return t;
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor randn(Shape s, Rng& rng, double stddev = 1.0) {
        Tensor t = zeros(std::move(s));
        for (double& x : t.data) x = rng.gaussian() * stddev;
        return t;
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }

    double item() const {
        if (size() != 1) throw ShapeError("tensor: item() on non-scalar " + shape_str(shape));
        return data[0];
    }

    bool finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    // 3-D [C,H,W] accessors used by the grid codecs.
    double& at3(std::size_t c, std::size_t h, std::size_t w) {
        return data[(c * shape[1] + h) * shape[2] + w];
    }
    double at3(std::size_t c, std::size_t h, std::size_t w) const {
        return data[(c * shape[1] + h) * shape[2] + w];
    }
};

inline bool same_shape(const Tensor& a, const Tensor& b) { return a.shape == b.shape; }

}  // namespace planoforge
