#pragma once

#include <filesystem>

#include "superpixel/slic.hpp"
#include "train/checkpoint.hpp"

namespace cf2net {

struct PredictResult {
    Plane mask;        // binary S x S (fusion map thresholded at 0.5)
    Plane mask_prob;   // primary probability map
    Plane edge_prob;   // empty when the model has no edge head
    Plane overlay_r, overlay_g, overlay_b;
};

// Applies the checkpoint's own preprocessing (resize, normalize, superpixel
// channel when enabled), runs the model and draws the predicted contour on
// the input. Superpixel parameters come from the checkpoint metadata when
// present.
PredictResult predict_image(LoadedCheckpoint& checkpoint, const Plane& raw_image);

// Convenience wrapper writing mask.png / edge.png / overlay.png to out_dir.
void predict_to_files(LoadedCheckpoint& checkpoint, const std::filesystem::path& image_png,
                      const std::filesystem::path& out_dir);

}  // namespace cf2net
