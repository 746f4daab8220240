#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "f2r/core/errors.hpp"

namespace f2r {

// Dense row-major tensor, last dimension fastest. Frames are [Ch,H,W],
// flow fields [2,H,W] (channel 0 = dx, channel 1 = dy), conv weights
// [Cout,Cin,kh,kw].
template <class S>
struct TensorT {
    std::vector<int> shape;
    std::vector<S> data;

    TensorT() = default;
    explicit TensorT(std::vector<int> s) : shape(std::move(s)), data(numel_of(shape), S(0)) {}
    TensorT(std::vector<int> s, S fill) : shape(std::move(s)), data(numel_of(shape), fill) {}

    static std::size_t numel_of(const std::vector<int>& s) {
        std::size_t n = 1;
        for (int d : s) {
            if (d < 0) throw InputError("tensor: negative dimension");
            n *= static_cast<std::size_t>(d);
        }
        return n;
    }

    std::size_t numel() const { return data.size(); }
    bool empty() const { return data.empty(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(shape.size()); }

    S* ptr() { return data.data(); }
    const S* ptr() const { return data.data(); }

    S& operator[](std::size_t i) { return data[i]; }
    const S& operator[](std::size_t i) const { return data[i]; }

    // 3-D accessor, the common case for [C,H,W] maps.
    S& at(int c, int y, int x) {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    const S& at(int c, int y, int x) const {
        return data[(static_cast<std::size_t>(c) * shape[1] + y) * shape[2] + x];
    }
    // 4-D accessor for [Cout,Cin,kh,kw] weights.
    S& at(int o, int i, int y, int x) {
        return data[((static_cast<std::size_t>(o) * shape[1] + i) * shape[2] + y) * shape[3] + x];
    }
    const S& at(int o, int i, int y, int x) const {
        return data[((static_cast<std::size_t>(o) * shape[1] + i) * shape[2] + y) * shape[3] + x];
    }

    bool same_shape(const TensorT& o) const { return shape == o.shape; }

    void fill(S v) { std::fill(data.begin(), data.end(), v); }

    void add_(const TensorT& o) {
        assert(same_shape(o));
        for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    }
    void scale_(S a) {
        for (auto& v : data) v *= a;
    }

    template <class T2>
    TensorT<T2> cast() const {
        TensorT<T2> out(shape);
        for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<T2>(data[i]);
        return out;
    }

    bool all_finite() const {
        for (S v : data)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }

    static std::string shape_str(const std::vector<int>& s) {
        std::string r = "[";
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) r += ",";
            r += std::to_string(s[i]);
        }
        return r + "]";
    }
};

using Tensor = TensorT<float>;
using TensorD = TensorT<double>;

template <class S>
inline double max_abs_diff(const TensorT<S>& a, const TensorT<S>& b) {
    if (!a.same_shape(b)) throw InputError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
    return m;
}

template <class S>
inline bool bitwise_equal(const TensorT<S>& a, const TensorT<S>& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.ptr(), b.ptr(), a.numel() * sizeof(S)) == 0;
}

}  // namespace f2r
