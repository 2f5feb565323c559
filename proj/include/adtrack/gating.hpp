#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "adtrack/backbone.hpp"
#include "adtrack/cost_model.hpp"
#include "adtrack/xcorr.hpp"

namespace adtrack {

inline constexpr int kNumGates = kNumDepths - 1;  // depth 5 is the parameterless residual
inline constexpr int kNumGateFeatures = 12;
inline constexpr std::array<double, 3> kDefaultThresholds{0.25, 0.5, 0.75};
inline constexpr double kDefaultThreshold = 0.5;

using FeatureVector = Eigen::Matrix<double, kNumGateFeatures, 1>;
using GateWeights = Eigen::Matrix<double, kNumGateFeatures + 1, 1>;  // features + bias

/// Hand-crafted statistics of a rescaled correlation map.
struct GateFeatures {
  double kurtosis = 0.0;           // m4 / m2^2, 0 for flat maps
  double entropy = 0.0;            // nats, over the L1-normalised map
  std::array<double, 5> top5{};    // largest cell values, descending
  std::array<double, 5> moments{}; // mean, then central moments 2..5

  /// [kurtosis, entropy, top5..., moments...]
  FeatureVector vector() const;
};

struct GateParams {
  std::array<GateWeights, kNumGates> phi{GateWeights::Zero(), GateWeights::Zero(),
                                         GateWeights::Zero(), GateWeights::Zero()};
};

GateFeatures extract_gate_features(const XcorrMap& map);
GateFeatures extract_gate_features(const Tensor& values);

inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }

/// sigm([f, 1] . phi)
double gate_score(const GateFeatures& features, const GateWeights& phi);

/// g*_1 = g_1, g*_i = (1 - sum_{j<i} g*_j) g_i for i = 2..4, g*_5 = residual.
std::array<double, kNumDepths> budget_scores(const std::array<double, kNumGates>& raw);

// Online form of budget_scores: scores become available one depth at a time.
class BudgetAccumulator {
 public:
  double push(double raw) {
    const double scored = remaining_ * raw;
    remaining_ -= scored;
    return scored;
  }
  double residual() const { return remaining_; }

 private:
  double remaining_ = 1.0;
};

/// Everything needed to localise one search frame: the key taps (all five,
/// computed once per key frame), the search crop and the cost model.
struct FrameContext {
  const BackboneWeights& weights;
  std::span<const Tensor> key_taps;
  const Tensor& search;
  const CostModel& cost;
};

struct PolicyOutcome {
  int depth_used = 0;
  XcorrMap map;
  std::vector<double> budgeted_scores;  // g*_1..g*_depth_used (empty for fixed depth)
  double flops_charged = 0.0;
};

PolicyOutcome run_fixed_depth(const FrameContext& ctx, int depth);

/// All five maps mixed by their budgeted scores.
PolicyOutcome run_soft_gating(const FrameContext& ctx, const GateParams& params);

/// Deepens one block at a time and halts at the first gate i <= 4 with
/// g*_i >= threshold; otherwise uses depth 5.
PolicyOutcome run_hard_gating(const FrameContext& ctx, const GateParams& params, double threshold);

// sum_i weights[i] * maps[i], over both rescaled and raw values.
XcorrMap mix_maps(std::span<const XcorrMap> maps, std::span<const double> weights);

}  // namespace adtrack
