#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "adtrack/tensor.hpp"

namespace adtrack {

/// 8-bit interleaved RGB image.
struct RgbImage {
  Index width = 0;
  Index height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  RgbImage() = default;
  RgbImage(Index w, Index h) : width(w), height(h), pixels(std::size_t(3 * w * h), 0) {}

  std::uint8_t& at(Index x, Index y, int c) { return pixels[std::size_t(3 * (y * width + x) + c)]; }
  std::uint8_t at(Index x, Index y, int c) const {
    return pixels[std::size_t(3 * (y * width + x) + c)];
  }

  /// [3,H,W] tensor with values in [0,1].
  Tensor to_tensor() const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Binary PPM (P6, maxval 255). Throws IngestionError naming the file.
RgbImage read_ppm(const std::filesystem::path& path);
void write_ppm(const RgbImage& image, const std::filesystem::path& path);

}  // namespace adtrack
