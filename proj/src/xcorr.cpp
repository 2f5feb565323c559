#include "adtrack/xcorr.hpp"

namespace adtrack {

namespace {

ConvSpec key_as_filter(const Tensor& key) {
  ConvSpec spec;
  spec.kernel = key.reshaped({1, key.extent(0), key.extent(1), key.extent(2)});
  return spec;
}

}  // namespace

Tensor cross_correlate(const Tensor& key, const Tensor& search) {
  require(key.rank() == 3 && search.rank() == 3, "cross_correlate: taps must be [C,H,W]");
  require(key.extent(0) == search.extent(0),
          "cross_correlate: channel mismatch " + shape_string(key.shape()) + " vs " +
              shape_string(search.shape()));
  require(key.extent(1) <= search.extent(1) && key.extent(2) <= search.extent(2),
          "cross_correlate: key larger than search");
  Tensor out = conv2d(search, key_as_filter(key));
  return out.reshaped({out.extent(1), out.extent(2)});
}

Tensor minmax_rescale(const Tensor& raw) {
  const double lo = raw.flat().minCoeff();
  const double hi = raw.flat().maxCoeff();
  if (hi - lo < kDegenerateVariance) return Tensor(raw.shape(), 0.5);
  return Tensor(raw.shape(), ((raw.flat().array() - lo) / (hi - lo)).matrix());
}

std::pair<Index, Index> argmax2d(const Tensor& map) {
  Index best = 0;
  for (Index i = 1; i < map.size(); ++i)
    if (map[i] > map[best]) best = i;
  const Index w = map.extent(map.rank() - 1);
  return {best / w, best % w};
}

XcorrMap xcorr_map_from_raw(Tensor raw, int depth, Index channels) {
  XcorrMap out;
  out.depth = depth;
  out.channels = channels;
  out.map = minmax_rescale(raw);
  std::tie(out.argmax_row, out.argmax_col) = argmax2d(out.map);
  out.raw = std::move(raw);
  return out;
}

XcorrTrace xcorr_forward(const Tensor& key_tap, const Tensor& search_tap) {
  require(key_tap.rank() == 3 && search_tap.rank() == 3, "make_xcorr_map: taps must be [C,H,W]");
  require(key_tap.extent(0) == search_tap.extent(0), "make_xcorr_map: tap channel mismatch");
  XcorrTrace trace;
  trace.key_tap = key_tap;
  trace.search_tap = search_tap;
  trace.key_small = avg_downsample(standardize_map(key_tap), kKeyGrid, kKeyGrid);
  trace.search_small = avg_downsample(standardize_map(search_tap), kSearchGrid, kSearchGrid);
  trace.raw = cross_correlate(trace.key_small, trace.search_small);
  return trace;
}

XcorrMap make_xcorr_map(const Tensor& key_tap, const Tensor& search_tap, int depth) {
  return xcorr_map_from_raw(xcorr_forward(key_tap, search_tap).raw, depth, key_tap.extent(0));
}

XcorrGrad xcorr_backward(const XcorrTrace& trace, const Tensor& grad_raw) {
  const Tensor g = grad_raw.reshaped({1, grad_raw.extent(0), grad_raw.extent(1)});
  ConvGrad cg = conv2d_backward(trace.search_small, key_as_filter(trace.key_small), g);
  const Tensor g_key_small = cg.kernel.reshaped(trace.key_small.shape());

  XcorrGrad grad;
  grad.search_tap = standardize_map_backward(
      trace.search_tap, avg_downsample_backward(trace.search_tap.shape(), cg.input));
  grad.key_tap =
      standardize_map_backward(trace.key_tap, avg_downsample_backward(trace.key_tap.shape(), g_key_small));
  return grad;
}

BoxAA map_to_box(const XcorrMap& map, const BoxAA& key_box, const CropGeometry& geometry) {
  const Point crop = map_cell_to_search(double(map.argmax_row), double(map.argmax_col));
  return BoxAA::centered(geometry.search_to_source(crop), key_box.w, key_box.h);
}

}  // namespace adtrack
