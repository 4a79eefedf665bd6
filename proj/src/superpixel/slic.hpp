#pragma once

#include <cstdint>
#include <vector>

#include "common/image.hpp"

namespace cf2net {

struct LabelMap {
    int h = 0;
    int w = 0;
    std::vector<int> labels;  // contiguous region ids, 0..region_count-1
    int region_count = 0;

    int at(int y, int x) const { return labels[static_cast<size_t>(y) * w + x]; }
    int& at(int y, int x) { return labels[static_cast<size_t>(y) * w + x]; }
};

struct SuperpixelParams {
    int k = 2000;
    float compactness = 10.f;
    int iterations = 10;
    // Components smaller than this are absorbed into a neighbour;
    // <= 0 selects the default (N/k)/4.
    int min_size = 0;
};

// Grayscale SLIC: seeds on a regular grid with step s = sqrt(N/k), local
// k-means in (intensity, x, y) with D = sqrt(dc^2 + (ds/s)^2 m^2) where the
// intensity distance is scaled by 255, search window 2s x 2s, fixed
// iteration count, then connectivity enforcement. Deterministic.
LabelMap slic_segment(const Plane& image, int k, float compactness = 10.f,
                      int iterations = 10, int min_size = 0);

// Merges 4-connected components smaller than min_size into an adjacent
// region and relabels contiguously in first-appearance order.
LabelMap enforce_connectivity(const LabelMap& labels, int min_size);

// Replaces every pixel by the mean intensity of its region.
Plane render_superpixel_image(const Plane& image, const LabelMap& labels);

// slic_segment + render in one call.
Plane superpixel_channel(const Plane& image, const SuperpixelParams& params);

}  // namespace cf2net
