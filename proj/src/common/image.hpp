#pragma once

#include <cstddef>
#include <vector>

namespace cf2net {

// Dense single-channel 2-D float image, row-major.
struct Plane {
    int h = 0;
    int w = 0;
    std::vector<float> v;

    Plane() = default;
    Plane(int height, int width, float fill = 0.f)
        : h(height), w(width), v(static_cast<size_t>(height) * width, fill) {}

    float& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    float at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return v.size(); }
    bool same_shape(const Plane& o) const { return h == o.h && w == o.w; }
};

Plane resize_bilinear(const Plane& src, int oh, int ow);
Plane resize_nearest(const Plane& src, int oh, int ow);

// Min-max scaling to [0, 1]. A constant plane maps to all zeros;
// returns false in that case so callers can warn.
bool minmax_normalize(Plane& p);

void threshold_binarize(Plane& p, float thr = 0.5f);
bool is_binary(const Plane& p);
long count_nonzero(const Plane& p);

Plane gaussian_blur(const Plane& src, float sigma);

// Mask pixels with at least one 4-neighbour outside the mask
// (out-of-frame counts as background).
std::vector<std::pair<int, int>> boundary_pixels(const Plane& mask);

}  // namespace cf2net
