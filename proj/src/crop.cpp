#include "adtrack/crop.hpp"

#include <algorithm>
#include <cmath>

namespace adtrack {

Tensor resample_crop(const RgbImage& frame, Point anchor, double scale, Index size,
                     const std::array<double, 3>& pad_fill) {
  require(scale > 0.0, "resample_crop: scale must be positive");
  Tensor out({3, size, size});
  const auto inside = [&](Index x, Index y) {
    return x >= 0 && y >= 0 && x < frame.width && y < frame.height;
  };
  for (Index i = 0; i < size; ++i) {
    // Source position of the crop pixel center, in pixel-center coordinates.
    const double v = anchor.y + (double(i) + 0.5) * scale - 0.5;
    const Index y0 = Index(std::floor(v));
    const double fy = v - double(y0);
    for (Index j = 0; j < size; ++j) {
      const double u = anchor.x + (double(j) + 0.5) * scale - 0.5;
      const Index x0 = Index(std::floor(u));
      const double fx = u - double(x0);
      const bool in00 = inside(x0, y0), in01 = inside(x0 + 1, y0);
      const bool in10 = inside(x0, y0 + 1), in11 = inside(x0 + 1, y0 + 1);
      if (!(in00 || in01 || in10 || in11)) {
        for (int c = 0; c < 3; ++c) out(c, i, j) = pad_fill[c];
        continue;
      }
      for (int c = 0; c < 3; ++c) {
        const auto sample = [&](bool in, Index x, Index y) {
          return in ? frame.at(x, y, c) / 255.0 : pad_fill[c];
        };
        const double top = (1.0 - fx) * sample(in00, x0, y0) + fx * sample(in01, x0 + 1, y0);
        const double bottom =
            (1.0 - fx) * sample(in10, x0, y0 + 1) + fx * sample(in11, x0 + 1, y0 + 1);
        out(c, i, j) = (1.0 - fy) * top + fy * bottom;
      }
    }
  }
  return out;
}

KeyCrop crop_key(const RgbImage& frame, const BoxAA& box, const std::array<double, 3>& pad_fill) {
  require(box.w > 0.0 && box.h > 0.0 && std::isfinite(box.x) && std::isfinite(box.y),
          "crop_key: degenerate box");
  KeyCrop crop;
  CropGeometry& g = crop.geometry;
  g.scale = kContextFactor * std::max(box.w, box.h) / double(kKeyCrop);
  g.pad_fill = pad_fill;
  const Point c = box.center();
  g.key_anchor = {c.x - 0.5 * kKeyCrop * g.scale, c.y - 0.5 * kKeyCrop * g.scale};
  g.search_anchor = {c.x - 0.5 * kSearchCrop * g.scale, c.y - 0.5 * kSearchCrop * g.scale};
  crop.image = resample_crop(frame, g.key_anchor, g.scale, kKeyCrop, pad_fill);
  return crop;
}

SearchCrop crop_search(const RgbImage& frame, Point prev_center, const CropGeometry& geometry) {
  SearchCrop crop;
  crop.geometry = geometry;
  crop.geometry.search_anchor = {prev_center.x - 0.5 * kSearchCrop * geometry.scale,
                                 prev_center.y - 0.5 * kSearchCrop * geometry.scale};
  crop.image = resample_crop(frame, crop.geometry.search_anchor, geometry.scale, kSearchCrop,
                             geometry.pad_fill);
  return crop;
}

}  // namespace adtrack
