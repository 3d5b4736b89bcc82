#pragma once

#include "dipreg/tensor.hpp"

#include <filesystem>

namespace dipreg {

/// Loads an 8-bit grayscale image as a {1,H,W} tensor scaled to [0,1]
/// by /255. Binary PGM (P5) and non-interlaced 8-bit PNG are accepted;
/// color PNG is converted to Rec.601 luminance. Errors name the path and
/// the byte offset where the file went wrong.
Tensor load_image(const std::filesystem::path& path);

/// Saves a {1,H,W} tensor with values in [0,1] as 8-bit grayscale,
/// rounding to the nearest of 256 levels. The extension picks the format:
/// .pgm writes binary P5, .png writes an 8-bit grayscale PNG. The write
/// is atomic.
void save_image(const std::filesystem::path& path, const Tensor& image);

}  // namespace dipreg
