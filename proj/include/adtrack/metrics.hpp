#pragma once

#include <span>
#include <vector>

#include "adtrack/geometry.hpp"

namespace adtrack {

/// Intersection over union of two axis-aligned boxes; 0 when disjoint.
/// Throws ContractViolation on non-positive extents.
double iou(const BoxAA& a, const BoxAA& b);

/// Mean IOU over the first min(k, n) search frames of each group, then the
/// mean over groups. Groups without search frames are skipped.
double iou_at_k(std::span<const std::vector<double>> group_ious, int k);
double iou_at_k(std::span<const std::vector<BoxAA>> pred, std::span<const std::vector<BoxAA>> gt, int k);

}  // namespace adtrack
