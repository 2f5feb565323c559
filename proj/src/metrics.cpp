#include "adtrack/metrics.hpp"

#include <algorithm>

#include "adtrack/error.hpp"

namespace adtrack {

double iou(const BoxAA& a, const BoxAA& b) {
  require(a.w > 0.0 && a.h > 0.0 && b.w > 0.0 && b.h > 0.0, "iou: boxes need positive extents");
  const double iw = std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x);
  const double ih = std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

double iou_at_k(std::span<const std::vector<double>> group_ious, int k) {
  require(k >= 1, "iou_at_k: k must be positive");
  double sum = 0.0;
  int groups = 0;
  for (const auto& g : group_ious) {
    if (g.empty()) continue;
    const std::size_t n = std::min(g.size(), std::size_t(k));
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += g[i];
    sum += s / double(n);
    ++groups;
  }
  require(groups > 0, "iou_at_k: no search frames");
  return sum / groups;
}

double iou_at_k(std::span<const std::vector<BoxAA>> pred, std::span<const std::vector<BoxAA>> gt, int k) {
  require(pred.size() == gt.size(), "iou_at_k: group count mismatch");
  std::vector<std::vector<double>> ious(pred.size());
  for (std::size_t g = 0; g < pred.size(); ++g) {
    require(pred[g].size() == gt[g].size(), "iou_at_k: frame count mismatch");
    for (std::size_t i = 0; i < pred[g].size(); ++i) ious[g].push_back(iou(pred[g][i], gt[g][i]));
  }
  return iou_at_k(ious, k);
}

}  // namespace adtrack
