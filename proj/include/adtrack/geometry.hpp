#pragma once

#include <array>

#include "adtrack/tensor.hpp"

namespace adtrack {

// Crop and map geometry shared by preprocessing, correlation and box
// prediction. Crop pixel i covers the continuous interval [i, i+1).
inline constexpr Index kKeyCrop = 128;
inline constexpr Index kSearchCrop = 256;
inline constexpr Index kSearchGrid = 16;
inline constexpr Index kKeyGrid = 8;
inline constexpr Index kMapExtent = kSearchGrid - kKeyGrid + 1;
inline constexpr double kCellPitch = double(kSearchCrop) / kSearchGrid;  // crop px per map cell
inline constexpr double kContextFactor = 1.5;

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned box: top-left corner and extents, in source pixels.
struct BoxAA {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  Point center() const { return {x + 0.5 * w, y + 0.5 * h}; }
  static BoxAA centered(Point c, double w, double h) { return {c.x - 0.5 * w, c.y - 0.5 * h, w, h}; }

  friend bool operator==(const BoxAA&, const BoxAA&) = default;
};

struct CropGeometry {
  double scale = 1.0;  // source px per crop px
  Point key_anchor;
  Point search_anchor;
  std::array<double, 3> pad_fill{0.5, 0.5, 0.5};

  Point search_to_source(Point crop) const {
    return {search_anchor.x + crop.x * scale, search_anchor.y + crop.y * scale};
  }
  Point source_to_search(Point src) const {
    return {(src.x - search_anchor.x) / scale, (src.y - search_anchor.y) / scale};
  }
  Point key_to_source(Point crop) const {
    return {key_anchor.x + crop.x * scale, key_anchor.y + crop.y * scale};
  }
};

// Search-crop position of the key window center for map cell (row, col).
inline Point map_cell_to_search(double row, double col) {
  return {(col + 0.5 * kKeyGrid) * kCellPitch, (row + 0.5 * kKeyGrid) * kCellPitch};
}

// Inverse of map_cell_to_search; returns (row, col) as a continuous point {x=col, y=row}.
inline Point search_to_map_cell(Point crop) {
  return {crop.x / kCellPitch - 0.5 * kKeyGrid, crop.y / kCellPitch - 0.5 * kKeyGrid};
}

}  // namespace adtrack
