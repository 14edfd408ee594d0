#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace semsds {

struct FloatImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> values;  // H x W x C, row-major
};

/// 8-bit PNG preview; values are clamped to [0, 1]. Channels 1, 3 or 4.
void write_png(const std::filesystem::path& path, std::span<const double> values, int width,
               int height, int channels);

/// Lossless dump: "IMG1", u32 H, u32 W, u32 C, then H*W*C little-endian f32.
void write_float_image(const std::filesystem::path& path, std::span<const double> values,
                       int width, int height, int channels);
FloatImage read_float_image(const std::filesystem::path& path);

}  // namespace semsds
