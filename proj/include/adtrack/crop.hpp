#pragma once

#include <array>

#include "adtrack/geometry.hpp"
#include "adtrack/image.hpp"

namespace adtrack {

struct KeyCrop {
  Tensor image;  // [3,128,128]
  CropGeometry geometry;
};

struct SearchCrop {
  Tensor image;  // [3,256,256]
  CropGeometry geometry;
};

/// Scale chosen so that 1.5 * max(w,h) source pixels span the 128-px crop,
/// centred on the box. Pixels beyond the frame take `pad_fill`.
KeyCrop crop_key(const RgbImage& frame, const BoxAA& box, const std::array<double, 3>& pad_fill);

/// 256-px crop at the key scale, centred on `prev_center`.
SearchCrop crop_search(const RgbImage& frame, Point prev_center, const CropGeometry& geometry);

/// Bilinear resampling of a square `size` crop whose top-left is `anchor`
/// (source px) with `scale` source px per crop px.
Tensor resample_crop(const RgbImage& frame, Point anchor, double scale, Index size,
                     const std::array<double, 3>& pad_fill);

}  // namespace adtrack
