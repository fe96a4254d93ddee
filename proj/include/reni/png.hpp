#pragma once

#include "reni/hdrio.hpp"

#include <filesystem>

namespace reni {

// 8-bit PNG read as grayscale in [0, 1] (one channel).
FloatImage read_png_gray(const std::filesystem::path& path);

// x / (1 + x) followed by gamma 2.2, 8-bit sRGB-ish preview.
void write_png_preview(const FloatImage& image, const std::filesystem::path& path);

}  // namespace reni
