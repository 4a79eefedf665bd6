#pragma once

#include <cstddef>
#include <vector>

namespace cf2net::nn {

// Dense NCHW float tensor.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_) { resize(n_, c_, h_, w_); }

    void resize(int n_, int c_, int h_, int w_) {
        n = n_;
        c = c_;
        h = h_;
        w = w_;
        v.resize(count());
    }
    size_t count() const {
        return static_cast<size_t>(n) * c * h * w;
    }
    size_t plane() const { return static_cast<size_t>(h) * w; }
    float* data() { return v.data(); }
    const float* data() const { return v.data(); }
    // Pointer to the (image, channel) plane.
    float* at(int in, int ic = 0) { return v.data() + (static_cast<size_t>(in) * c + ic) * plane(); }
    const float* at(int in, int ic = 0) const {
        return v.data() + (static_cast<size_t>(in) * c + ic) * plane();
    }
    void zero() { std::fill(v.begin(), v.end(), 0.f); }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

}  // namespace cf2net::nn
