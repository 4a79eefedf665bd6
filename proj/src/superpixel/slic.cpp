#include "superpixel/slic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "common/errors.hpp"

namespace cf2net {

namespace {

struct Center {
    double ci = 0;  // intensity
    double cy = 0;
    double cx = 0;
};

}  // namespace

LabelMap slic_segment(const Plane& image, int k, float compactness, int iterations,
                      int min_size) {
    const long n = static_cast<long>(image.size());
    if (k < 1) throw ConfigError("slic_segment: k must be >= 1");
    if (k > n) throw ConfigError("slic_segment: k exceeds the pixel count");
    if (compactness <= 0.f) throw ConfigError("slic_segment: compactness must be positive");

    const int h = image.h, w = image.w;
    const double step = std::sqrt(static_cast<double>(n) / k);

    // Seed grid: centers spaced `step` apart, offset by step/2.
    std::vector<Center> centers;
    for (double y = step / 2; y < h; y += step)
        for (double x = step / 2; x < w; x += step)
            centers.push_back({image.at(static_cast<int>(y), static_cast<int>(x)), y, x});
    if (centers.empty()) centers.push_back({image.at(h / 2, w / 2), h / 2.0, w / 2.0});

    const double m = compactness;
    const double spatial_norm = (m * m) / (step * step);
    const int window = std::max(1, static_cast<int>(std::lround(step)));

    std::vector<int> label(n, -1);
    std::vector<double> best(n);

    for (int it = 0; it < iterations; ++it) {
        std::fill(best.begin(), best.end(), std::numeric_limits<double>::max());
        for (size_t c = 0; c < centers.size(); ++c) {
            const Center& ct = centers[c];
            int y0 = std::max(0, static_cast<int>(ct.cy) - window);
            int y1 = std::min(h - 1, static_cast<int>(ct.cy) + window);
            int x0 = std::max(0, static_cast<int>(ct.cx) - window);
            int x1 = std::min(w - 1, static_cast<int>(ct.cx) + window);
            for (int y = y0; y <= y1; ++y) {
                const float* row = &image.v[static_cast<size_t>(y) * w];
                for (int x = x0; x <= x1; ++x) {
                    double dc = 255.0 * (row[x] - ct.ci);
                    double dy = y - ct.cy, dx = x - ct.cx;
                    double d = dc * dc + (dy * dy + dx * dx) * spatial_norm;
                    size_t idx = static_cast<size_t>(y) * w + x;
                    if (d < best[idx]) {
                        best[idx] = d;
                        label[idx] = static_cast<int>(c);
                    }
                }
            }
        }
        // Pixels outside every window (possible on extreme aspect ratios):
        // assign to the nearest center spatially.
        for (long i = 0; i < n; ++i) {
            if (label[i] >= 0) continue;
            int y = static_cast<int>(i / w), x = static_cast<int>(i % w);
            double bd = std::numeric_limits<double>::max();
            for (size_t c = 0; c < centers.size(); ++c) {
                double dy = y - centers[c].cy, dx = x - centers[c].cx;
                double d = dy * dy + dx * dx;
                if (d < bd) {
                    bd = d;
                    label[i] = static_cast<int>(c);
                }
            }
        }
        // Update step.
        std::vector<double> si(centers.size(), 0), sy(centers.size(), 0), sx(centers.size(), 0);
        std::vector<long> cnt(centers.size(), 0);
        for (long i = 0; i < n; ++i) {
            int c = label[i];
            si[c] += image.v[i];
            sy[c] += static_cast<double>(i / w);
            sx[c] += static_cast<double>(i % w);
            ++cnt[c];
        }
        for (size_t c = 0; c < centers.size(); ++c) {
            if (cnt[c] == 0) continue;  // empty cluster keeps its position
            centers[c].ci = si[c] / cnt[c];
            centers[c].cy = sy[c] / cnt[c];
            centers[c].cx = sx[c] / cnt[c];
        }
    }

    LabelMap raw;
    raw.h = h;
    raw.w = w;
    raw.labels = std::move(label);
    raw.region_count = static_cast<int>(centers.size());

    if (min_size <= 0) min_size = std::max(1, static_cast<int>(n / k / 4));
    return enforce_connectivity(raw, min_size);
}

LabelMap enforce_connectivity(const LabelMap& input, int min_size) {
    const int h = input.h, w = input.w;
    const long n = static_cast<long>(input.labels.size());
    LabelMap out;
    out.h = h;
    out.w = w;
    out.labels.assign(n, -1);

    const int dy4[4] = {-1, 1, 0, 0};
    const int dx4[4] = {0, 0, -1, 1};

    int next_label = 0;
    std::vector<long> component;
    component.reserve(256);

    for (long start = 0; start < n; ++start) {
        if (out.labels[start] >= 0) continue;
        const int src = input.labels[start];

        // Label of a previously processed neighbour, used as merge target.
        int adjacent = -1;
        component.clear();
        component.push_back(start);
        out.labels[start] = next_label;
        for (size_t head = 0; head < component.size(); ++head) {
            long cur = component[head];
            int y = static_cast<int>(cur / w), x = static_cast<int>(cur % w);
            for (int d = 0; d < 4; ++d) {
                int yy = y + dy4[d], xx = x + dx4[d];
                if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
                long ni = static_cast<long>(yy) * w + xx;
                if (out.labels[ni] < 0 && input.labels[ni] == src) {
                    out.labels[ni] = next_label;
                    component.push_back(ni);
                } else if (out.labels[ni] >= 0 && out.labels[ni] != next_label) {
                    adjacent = out.labels[ni];
                }
            }
        }

        if (static_cast<int>(component.size()) < min_size && adjacent >= 0) {
            for (long i : component) out.labels[i] = adjacent;
        } else {
            ++next_label;
        }
    }
    out.region_count = next_label;
    return out;
}

Plane render_superpixel_image(const Plane& image, const LabelMap& labels) {
    if (image.h != labels.h || image.w != labels.w)
        throw ShapeError("render_superpixel_image: shape mismatch");
    std::vector<double> sum(labels.region_count, 0.0);
    std::vector<long> cnt(labels.region_count, 0);
    for (size_t i = 0; i < image.size(); ++i) {
        sum[labels.labels[i]] += image.v[i];
        ++cnt[labels.labels[i]];
    }
    std::vector<float> mean(labels.region_count);
    for (int r = 0; r < labels.region_count; ++r)
        mean[r] = cnt[r] ? static_cast<float>(sum[r] / cnt[r]) : 0.f;
    Plane out(image.h, image.w);
    for (size_t i = 0; i < image.size(); ++i) out.v[i] = mean[labels.labels[i]];
    return out;
}

Plane superpixel_channel(const Plane& image, const SuperpixelParams& params) {
    LabelMap labels =
        slic_segment(image, params.k, params.compactness, params.iterations, params.min_size);
    return render_superpixel_image(image, labels);
}

}  // namespace cf2net
