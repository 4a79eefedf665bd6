#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "json.hpp"
#include "superpixel/slic.hpp"

namespace cf2net {

struct PrepareOptions {
    std::string source = "synthetic";  // "synthetic" or "real"
    std::filesystem::path real_root;   // required for the real source
    std::filesystem::path out_dir;
    int count = 200;  // synthetic sample count
    int size = 256;
    uint64_t seed = 42;
    int edge_radius = 5;
    bool superpixels = true;
    SuperpixelParams spx;

    nlohmann::json to_json() const;
};

struct PrepareResult {
    std::filesystem::path dir;
    int count = 0;
    std::string param_hash;
    bool reused = false;  // manifest hash matched, nothing was rewritten
    std::vector<std::string> orphans;
    std::vector<std::string> warnings;
};

// Materializes resized images, masks, edge bands and superpixel channels as
// 8-bit PNGs under out_dir (images/, masks/, edges/, superpixels/) with a
// manifest.json carrying the parameter hash. Re-running with identical
// options is a no-op.
PrepareResult prepare_dataset(const PrepareOptions& options);

// Loads a prepared directory back into memory.
std::vector<Sample> load_prepared(const std::filesystem::path& dir);

nlohmann::json read_manifest(const std::filesystem::path& dir);

}  // namespace cf2net
