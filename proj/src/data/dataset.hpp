#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "common/image.hpp"

namespace cf2net {

struct DatasetEntry {
    std::string id;                 // file stem, or synthetic id
    std::filesystem::path image;    // empty for in-memory synthetic entries
    std::filesystem::path mask;
};

struct DatasetIndex {
    std::vector<DatasetEntry> entries;
    std::vector<std::string> orphans;  // stems present on one side only
    std::string source_tag;            // "real" or "synthetic"
    std::filesystem::path root;
};

// Scans <root>/images/*.png and <root>/masks/*.png and pairs files by stem.
// Unmatched stems are reported in `orphans`. Throws IoError when the
// directory is missing and ConfigError when no pair is found.
DatasetIndex load_dataset(const std::filesystem::path& root);

// One fully preprocessed training example. All planes are size x size;
// mask and edge are binary. The superpixel plane is filled separately.
struct Sample {
    std::string id;
    Plane image;
    Plane superpixel;
    Plane mask;
    Plane edge;
    int size = 0;
};

// Band of pixels within Euclidean distance band_radius of the mask's
// boundary contour. Empty mask gives an empty band.
Plane make_edge_target(const Plane& mask, int band_radius = 5);

// Resize (bilinear for the image, nearest + threshold for the mask),
// min-max normalize and fill the edge plane. target_size must be a
// multiple of 16. `warned_constant` reports an all-constant input image.
Sample preprocess_sample(const Plane& image, const Plane& mask, int target_size,
                         int edge_radius = 5, bool* warned_constant = nullptr);

struct FoldSplit {
    int k = 0;
    std::vector<int> assignment;  // per-entry fold index in [0, k)

    std::vector<size_t> fold_indices(int fold) const;
    std::vector<size_t> train_indices(int fold) const;
};

// Seeded shuffle, then round-robin partition; fold sizes differ by at most 1.
FoldSplit make_folds(size_t entry_count, int k, uint64_t seed);

// Synthetic ultrasound-like sample: dark ellipse on a brighter background
// with blurred boundary and multiplicative speckle. Deterministic per
// (seed, index). The mask is the unblurred ellipse.
struct SyntheticPair {
    Plane image;
    Plane mask;
};
SyntheticPair synthetic_sample(int size, uint64_t seed, uint64_t index);

std::string synthetic_id(uint64_t index);

}  // namespace cf2net
