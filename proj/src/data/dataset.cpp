#include "data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "common/errors.hpp"
#include "common/rng.hpp"

namespace cf2net {

namespace fs = std::filesystem;

DatasetIndex load_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) throw IoError("dataset root not found: " + root.string());
    fs::path images_dir = root / "images";
    fs::path masks_dir = root / "masks";
    if (!fs::is_directory(images_dir) || !fs::is_directory(masks_dir))
        throw IoError("dataset root must contain images/ and masks/: " + root.string());

    std::map<std::string, fs::path> images, masks;
    for (const auto& e : fs::directory_iterator(images_dir))
        if (e.path().extension() == ".png") images[e.path().stem().string()] = e.path();
    for (const auto& e : fs::directory_iterator(masks_dir))
        if (e.path().extension() == ".png") masks[e.path().stem().string()] = e.path();

    DatasetIndex idx;
    idx.root = root;
    idx.source_tag = "real";
    for (const auto& [stem, path] : images) {
        auto it = masks.find(stem);
        if (it == masks.end()) {
            idx.orphans.push_back(stem + " (image without mask)");
            continue;
        }
        idx.entries.push_back({stem, path, it->second});
    }
    for (const auto& [stem, path] : masks)
        if (!images.count(stem)) idx.orphans.push_back(stem + " (mask without image)");

    if (idx.entries.empty()) throw ConfigError("no samples found in " + root.string());
    return idx;
}

Plane make_edge_target(const Plane& mask, int band_radius) {
    Plane band(mask.h, mask.w, 0.f);
    auto contour = boundary_pixels(mask);
    if (contour.empty()) return band;

    // Disk stamp: offsets with dx^2 + dy^2 <= r^2.
    std::vector<std::pair<int, int>> disk;
    for (int dy = -band_radius; dy <= band_radius; ++dy)
        for (int dx = -band_radius; dx <= band_radius; ++dx)
            if (dx * dx + dy * dy <= band_radius * band_radius) disk.emplace_back(dy, dx);

    for (auto [y, x] : contour) {
        for (auto [dy, dx] : disk) {
            int yy = y + dy, xx = x + dx;
            if (yy >= 0 && yy < mask.h && xx >= 0 && xx < mask.w) band.at(yy, xx) = 1.f;
        }
    }
    return band;
}

Sample preprocess_sample(const Plane& image, const Plane& mask, int target_size,
                         int edge_radius, bool* warned_constant) {
    if (!image.same_shape(mask)) throw ShapeError("preprocess_sample: image/mask shape mismatch");
    if (target_size <= 0 || target_size % 16 != 0)
        throw ConfigError("target size must be a positive multiple of 16");

    Sample s;
    s.size = target_size;
    s.image = resize_bilinear(image, target_size, target_size);
    bool ok = minmax_normalize(s.image);
    if (warned_constant) *warned_constant = !ok;

    s.mask = resize_nearest(mask, target_size, target_size);
    threshold_binarize(s.mask, 0.5f);
    s.edge = make_edge_target(s.mask, edge_radius);
    return s;
}

std::vector<size_t> FoldSplit::fold_indices(int fold) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == fold) out.push_back(i);
    return out;
}

std::vector<size_t> FoldSplit::train_indices(int fold) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] != fold) out.push_back(i);
    return out;
}

FoldSplit make_folds(size_t entry_count, int k, uint64_t seed) {
    if (k < 2) throw ConfigError("fold count must be >= 2");
    if (static_cast<size_t>(k) > entry_count)
        throw ConfigError("fold count exceeds the number of entries");

    std::vector<size_t> order(entry_count);
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng(Rng::derive(seed, 0x0F01D5));
    rng.shuffle(order);

    FoldSplit split;
    split.k = k;
    split.assignment.assign(entry_count, -1);
    for (size_t pos = 0; pos < order.size(); ++pos)
        split.assignment[order[pos]] = static_cast<int>(pos % k);
    return split;
}

std::string synthetic_id(uint64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "synth_%05llu", static_cast<unsigned long long>(index));
    return buf;
}

SyntheticPair synthetic_sample(int size, uint64_t seed, uint64_t index) {
    if (size <= 0) throw ConfigError("synthetic sample size must be positive");
    Rng rng(Rng::derive(seed, 0x5A17 + index * 2654435761ull));
    const double S = size;

    Plane mask(size, size, 0.f);
    double frac = 0.0;
    double cy = 0, cx = 0, ax = 0, ay = 0, theta = 0;
    // Redraw until the rasterized lesion fraction lands inside [0.005, 0.45];
    // discretization can shave a few pixels off the smallest ellipses.
    for (int attempt = 0; attempt < 64; ++attempt) {
        cy = rng.uniform(0.30, 0.70) * S;
        cx = rng.uniform(0.30, 0.70) * S;
        // Full axis lengths between 8% and 40% of the side.
        ax = rng.uniform(0.08, 0.40) * S * 0.5;  // semi-axes
        ay = rng.uniform(0.08, 0.40) * S * 0.5;
        theta = rng.uniform(0.0, 3.14159265358979323846);

        std::fill(mask.v.begin(), mask.v.end(), 0.f);
        const double ct = std::cos(theta), st = std::sin(theta);
        long area = 0;
        for (int y = 0; y < size; ++y) {
            for (int x = 0; x < size; ++x) {
                double dy = y + 0.5 - cy, dx = x + 0.5 - cx;
                double u = (dx * ct + dy * st) / ax;
                double v = (-dx * st + dy * ct) / ay;
                if (u * u + v * v <= 1.0) {
                    mask.at(y, x) = 1.f;
                    ++area;
                }
            }
        }
        frac = static_cast<double>(area) / (S * S);
        if (frac >= 0.005 && frac <= 0.45) break;
    }
    if (frac < 0.005 || frac > 0.45)
        throw NumericError("synthetic_sample: could not place a lesion in bounds");

    const float background = static_cast<float>(rng.uniform(0.55, 0.80));
    const float lesion = static_cast<float>(rng.uniform(0.10, 0.30));
    Plane img(size, size, background);
    for (size_t i = 0; i < mask.v.size(); ++i)
        if (mask.v[i] != 0.f) img.v[i] = lesion;

    const float sigma = static_cast<float>(rng.uniform(1.2, 2.5));
    img = gaussian_blur(img, sigma);

    const double speckle = rng.uniform(0.08, 0.18);
    for (float& x : img.v) {
        double noise = 1.0 + speckle * rng.normal();
        x = static_cast<float>(std::clamp(x * noise, 0.0, 1.0));
    }
    return {std::move(img), std::move(mask)};
}

}  // namespace cf2net
