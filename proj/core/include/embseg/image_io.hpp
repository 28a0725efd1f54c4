#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "embseg/grid.hpp"

namespace embseg {

/// Interleaved PNG samples: 1 (gray) or 3 (RGB) channels at 8 or 16 bits.
struct PngImage {
  int width = 0;
  int height = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

void write_png(const std::filesystem::path& path, const PngImage& image);
/// Reads gray/RGB(A) PNGs; palettes are expanded, alpha dropped.
PngImage read_png(const std::filesystem::path& path);

/// 8-bit PNG from a (C, H, W) field in [0, 1] (C = 1 or 3); values are rounded.
PngImage to_png8(const Field<float>& image);
/// (C, H, W) field in [0, 1] from an 8- or 16-bit PNG.
Field<float> from_png(const PngImage& png);

/// 16-bit single-channel label image.
PngImage label_png16(GridShape shape, const std::vector<std::int32_t>& labels);
std::vector<std::int32_t> labels_from_png16(const PngImage& png);

}  // namespace embseg
