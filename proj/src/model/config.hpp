#pragma once

#include <string>
#include <vector>

#include "json.hpp"

namespace cf2net {

// Architectural hyperparameters. The unit toggles exist for the ablation
// grid; `backbone_skips` turns the backbone into a plain U-Net with
// encoder-to-decoder concatenation and only makes sense with use_fsp=false.
struct ModelConfig {
    int base_width = 64;    // encoder scale-1 channels
    int fsp_width = 64;     // working width of the fusion stream
    int em_channels = 32;   // edge feature maps per scale
    std::vector<int> aspp_rates{2, 4, 6};
    bool use_fsp = true;
    bool use_aspp = true;
    bool use_ec = true;
    bool use_superpixel = true;
    bool backbone_skips = false;
    int size = 256;  // canonical input side length S

    int input_channels() const { return use_superpixel ? 2 : 1; }

    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);

    bool operator==(const ModelConfig&) const = default;
};

}  // namespace cf2net
