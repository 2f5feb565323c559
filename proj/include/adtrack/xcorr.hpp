#pragma once

#include <span>

#include "adtrack/geometry.hpp"
#include "adtrack/tensor.hpp"

namespace adtrack {

/// Valid cross-correlation of a [C,hk,wk] key against a [C,hs,ws] search map:
/// out[y,x] = sum_{c,dy,dx} search[c,y+dy,x+dx] * key[c,dy,dx].
/// Shares the conv2d kernel (key as a single-output filter).
Tensor cross_correlate(const Tensor& key, const Tensor& search);

/// Similarity map at one depth. `map` is min-max rescaled to [0,1]; `raw`
/// keeps the pre-rescale correlation values the training loss consumes.
struct XcorrMap {
  int depth = 0;
  Index channels = 1;  // tap channels; sets the loss temperature
  Tensor map;
  Tensor raw;
  Index argmax_row = 0;
  Index argmax_col = 0;
};

// Constant maps rescale to 0.5 everywhere.
Tensor minmax_rescale(const Tensor& raw);

// First maximal cell in row-major order.
std::pair<Index, Index> argmax2d(const Tensor& map);

XcorrMap xcorr_map_from_raw(Tensor raw, int depth, Index channels = 1);

/// standardize -> downsample (search 16x16, key 8x8) -> correlate -> rescale.
/// Produces a 9x9 map.
XcorrMap make_xcorr_map(const Tensor& key_tap, const Tensor& search_tap, int depth);

/// Predicted box: argmax cell -> search crop -> source pixels, keeping the
/// key box extents (key and search crops share one scale).
BoxAA map_to_box(const XcorrMap& map, const BoxAA& key_box, const CropGeometry& geometry);

// Intermediates of make_xcorr_map kept for the reverse pass.
struct XcorrTrace {
  Tensor key_tap;
  Tensor search_tap;
  Tensor key_small;
  Tensor search_small;
  Tensor raw;
};

XcorrTrace xcorr_forward(const Tensor& key_tap, const Tensor& search_tap);

struct XcorrGrad {
  Tensor key_tap;
  Tensor search_tap;
};

/// Gradients of the raw correlation map with respect to both taps.
XcorrGrad xcorr_backward(const XcorrTrace& trace, const Tensor& grad_raw);

}  // namespace adtrack
