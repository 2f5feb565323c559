#pragma once

#include <array>
#include <span>
#include <string>

#include "adtrack/backbone.hpp"

namespace adtrack {

/// Analytic multiply counts for one key-search batch (1 key crop, `batch`
/// search crops). Only multiplications are counted; gate features are free.
///
/// conv layer: C_out * C_in * kH * kW * H_out * W_out per image
/// correlation: 9 * 9 * C * 8 * 8 per search crop (downsampled geometry)
struct CostModel {
  BackboneConfig config;
  Index key_res = 128;
  Index search_res = 256;
  Index batch = 25;

  std::array<double, kNumDepths> key_block{};     // per key image, per block
  std::array<double, kNumDepths> search_block{};  // per search image, per block
  std::array<double, kNumDepths> xcorr{};         // per search image, per depth

  static CostModel build(const BackboneConfig& config, Index key_res = 128, Index search_res = 256,
                         Index batch = 25);

  double key_pathway(int depth) const;     // charged once per batch
  double search_pathway(int depth) const;  // batch * search convs
  double correlation(int depth) const;     // batch * correlation at `depth`

  // Cost of the xcorr_d policy for a whole batch.
  double fixed_depth(int depth) const;
  // All five depths plus all five correlations.
  double soft_gating() const;

  double ratio(double flops) const { return flops / fixed_depth(1); }

  /// Table-style ratios rounded to two decimals and their successive
  /// differences with p_1 = 1; the defaults for the gate cost term.
  std::array<double, kNumDepths> rounded_ratios() const;
  std::array<double, kNumDepths> incremental_costs() const;
};

// Cost of one convolution layer for a single image at the given output size.
double conv_multiplies(Index c_out, Index c_in, Index k, Index out_h, Index out_w);

struct PolicyDescriptor {
  enum class Kind { Fixed, Soft, Hard };
  Kind kind = Kind::Fixed;
  int depth = 1;                   // Fixed
  std::span<const int> trace;      // Hard: depth used per frame
};

/// Mean FLOPs per key-search batch. Hard gating charges every frame the
/// fixed-depth batch cost at its realised depth and averages over the trace.
double flops(const BackboneConfig& config, const PolicyDescriptor& policy, Index key_res = 128,
             Index search_res = 256, Index batch = 25);

}  // namespace adtrack
