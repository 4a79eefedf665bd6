#include "common/image.hpp"

#include <algorithm>
#include <cmath>

#include "common/errors.hpp"

namespace cf2net {

Plane resize_bilinear(const Plane& src, int oh, int ow) {
    if (src.h <= 0 || src.w <= 0) throw ShapeError("resize_bilinear: empty source");
    Plane out(oh, ow);
    const double sy = static_cast<double>(src.h) / oh;
    const double sx = static_cast<double>(src.w) / ow;
    for (int y = 0; y < oh; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, src.h - 1);
        int y1c = std::clamp(y0 + 1, 0, src.h - 1);
        for (int x = 0; x < ow; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, src.w - 1);
            int x1c = std::clamp(x0 + 1, 0, src.w - 1);
            double top = src.at(y0c, x0c) * (1.0 - wx) + src.at(y0c, x1c) * wx;
            double bot = src.at(y1c, x0c) * (1.0 - wx) + src.at(y1c, x1c) * wx;
            out.at(y, x) = static_cast<float>(top * (1.0 - wy) + bot * wy);
        }
    }
    return out;
}

Plane resize_nearest(const Plane& src, int oh, int ow) {
    if (src.h <= 0 || src.w <= 0) throw ShapeError("resize_nearest: empty source");
    Plane out(oh, ow);
    const double sy = static_cast<double>(src.h) / oh;
    const double sx = static_cast<double>(src.w) / ow;
    for (int y = 0; y < oh; ++y) {
        int yi = std::clamp(static_cast<int>((y + 0.5) * sy), 0, src.h - 1);
        for (int x = 0; x < ow; ++x) {
            int xi = std::clamp(static_cast<int>((x + 0.5) * sx), 0, src.w - 1);
            out.at(y, x) = src.at(yi, xi);
        }
    }
    return out;
}

bool minmax_normalize(Plane& p) {
    if (p.v.empty()) return false;
    auto [mn_it, mx_it] = std::minmax_element(p.v.begin(), p.v.end());
    float mn = *mn_it, mx = *mx_it;
    if (mx <= mn) {
        std::fill(p.v.begin(), p.v.end(), 0.f);
        return false;
    }
    float inv = 1.f / (mx - mn);
    for (float& x : p.v) x = (x - mn) * inv;
    return true;
}

void threshold_binarize(Plane& p, float thr) {
    for (float& x : p.v) x = x > thr ? 1.f : 0.f;
}

bool is_binary(const Plane& p) {
    for (float x : p.v)
        if (x != 0.f && x != 1.f) return false;
    return true;
}

long count_nonzero(const Plane& p) {
    long n = 0;
    for (float x : p.v) n += x != 0.f;
    return n;
}

Plane gaussian_blur(const Plane& src, float sigma) {
    if (sigma <= 0.f) return src;
    int radius = std::max(1, static_cast<int>(std::ceil(3.f * sigma)));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double k = std::exp(-0.5 * (i * i) / (sigma * sigma));
        kernel[i + radius] = static_cast<float>(k);
        sum += k;
    }
    for (float& k : kernel) k = static_cast<float>(k / sum);

    Plane tmp(src.h, src.w);
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                int xi = std::clamp(x + i, 0, src.w - 1);
                acc += kernel[i + radius] * src.at(y, xi);
            }
            tmp.at(y, x) = static_cast<float>(acc);
        }
    }
    Plane out(src.h, src.w);
    for (int y = 0; y < src.h; ++y) {
        for (int x = 0; x < src.w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                int yi = std::clamp(y + i, 0, src.h - 1);
                acc += kernel[i + radius] * tmp.at(yi, x);
            }
            out.at(y, x) = static_cast<float>(acc);
        }
    }
    return out;
}

std::vector<std::pair<int, int>> boundary_pixels(const Plane& mask) {
    std::vector<std::pair<int, int>> out;
    for (int y = 0; y < mask.h; ++y) {
        for (int x = 0; x < mask.w; ++x) {
            if (mask.at(y, x) == 0.f) continue;
            bool edge = (y == 0 || mask.at(y - 1, x) == 0.f) ||
                        (y == mask.h - 1 || mask.at(y + 1, x) == 0.f) ||
                        (x == 0 || mask.at(y, x - 1) == 0.f) ||
                        (x == mask.w - 1 || mask.at(y, x + 1) == 0.f);
            if (edge) out.emplace_back(y, x);
        }
    }
    return out;
}

}  // namespace cf2net
