#pragma once

#include <array>
#include <filesystem>

#include "common/image.hpp"

namespace cf2net {

// Reads any PNG as 8-bit grayscale, scaled to [0, 1].
Plane read_png_gray(const std::filesystem::path& path);

// Writes a [0, 1] plane as 8-bit grayscale (values clamped).
void write_png_gray(const std::filesystem::path& path, const Plane& img);

// Writes three [0, 1] planes as 8-bit RGB.
void write_png_rgb(const std::filesystem::path& path, const Plane& r, const Plane& g,
                   const Plane& b);

}  // namespace cf2net
