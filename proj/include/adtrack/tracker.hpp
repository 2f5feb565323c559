#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adtrack/backbone.hpp"
#include "adtrack/gating.hpp"
#include "adtrack/sequence.hpp"

namespace adtrack {

struct Policy {
  enum class Kind { Fixed, Soft, Hard };
  Kind kind = Kind::Fixed;
  int depth = kNumDepths;  // Fixed
  double threshold = kDefaultThreshold;  // Hard

  /// "fixed:<1-5>", "soft" or "hard". Throws ContractViolation otherwise.
  static Policy parse(std::string_view text, double threshold = kDefaultThreshold);
  std::string label() const;
  bool needs_gates() const { return kind != Kind::Fixed; }
};

struct TrackOptions {
  Index key_stride = 10;
  Index horizon = 25;
  Index batch = 25;  // costing unit
  std::array<double, 3> pad_fill{0.5, 0.5, 0.5};
};

struct FrameRecord {
  Index frame = 0;
  int depth_used = 0;
  double iou = 0.0;
  double flops = 0.0;
  BoxAA box;
  std::array<double, kNumDepths> budgeted;  // NaN where not computed
  XcorrMap map;
};

struct GroupRecord {
  Index key = 0;
  std::vector<FrameRecord> frames;
};

struct TrackResult {
  std::string sequence;
  std::vector<GroupRecord> groups;

  double iou_at(int k) const;
  double mean_flops() const;
  std::array<std::size_t, kNumDepths> depth_histogram() const;
};

/// Tracks every key-search group: the key crop comes from the key frame's
/// ground truth, each search crop is centred on the previous prediction.
TrackResult track_sequence(const BackboneWeights& weights, const GateParams* gates, const TrackSequence& seq,
                           const Policy& policy, const TrackOptions& options);

/// IOU@k over several tracked sequences (groups pooled).
double pooled_iou_at(std::span<const TrackResult> results, int k);
double pooled_mean_flops(std::span<const TrackResult> results);
std::array<std::size_t, kNumDepths> pooled_histogram(std::span<const TrackResult> results);

/// frame,depth_used,iou,flops,cx,cy,w,h,g1..g5
std::string track_csv(std::span<const TrackResult> results);

struct CurvePoint {
  std::string policy;  // fixed | soft | hard
  std::string param;   // depth, or lambda[/threshold]
  int k = 25;
  double iou = 0.0;
  double flops = 0.0;
  std::optional<double> lambda;
  std::optional<double> threshold;
  double seconds = 0.0;  // wall clock, informational
};

struct GateSet {
  double lambda = 0.0;
  GateParams params;
};

/// Five fixed-depth points, one soft point per gate set, and one hard point
/// per (gate set, threshold); sorted by FLOPs.
std::vector<CurvePoint> pareto_curve(const BackboneWeights& weights, std::span<const GateSet> gate_sets,
                                     std::span<const double> thresholds,
                                     std::span<const TrackSequence> sequences, const TrackOptions& options,
                                     int k);

/// policy,param,k,iou,flops (plus seconds when requested)
std::string curve_csv(std::span<const CurvePoint> points, bool wall_clock = false);

std::string format_real(double v);

}  // namespace adtrack
