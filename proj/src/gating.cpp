#include "adtrack/gating.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace adtrack {

FeatureVector GateFeatures::vector() const {
  FeatureVector v;
  v << kurtosis, entropy, top5[0], top5[1], top5[2], top5[3], top5[4], moments[0], moments[1],
      moments[2], moments[3], moments[4];
  return v;
}

GateFeatures extract_gate_features(const Tensor& values) {
  const Vector& v = values.flat();
  const double n = double(v.size());
  GateFeatures f;

  const double mean = v.mean();
  const Eigen::ArrayXd centered = v.array() - mean;
  f.moments[0] = mean;
  for (int k = 2; k <= 5; ++k) f.moments[k - 1] = centered.pow(double(k)).sum() / n;

  const double m2 = f.moments[1];
  f.kurtosis = m2 < kDegenerateVariance ? 0.0 : f.moments[3] / (m2 * m2);

  const double total = v.sum();
  if (total >= kDegenerateVariance) {
    for (Index i = 0; i < v.size(); ++i) {
      const double p = v[i] / total;
      if (p > 0.0) f.entropy -= p * std::log(p);
    }
  }

  std::vector<double> sorted(v.data(), v.data() + v.size());
  const std::size_t k = std::min<std::size_t>(5, sorted.size());
  std::partial_sort(sorted.begin(), sorted.begin() + k, sorted.end(), std::greater<>());
  for (std::size_t i = 0; i < k; ++i) f.top5[i] = sorted[i];
  return f;
}

GateFeatures extract_gate_features(const XcorrMap& map) { return extract_gate_features(map.map); }

double gate_score(const GateFeatures& features, const GateWeights& phi) {
  return sigmoid(features.vector().dot(phi.head<kNumGateFeatures>()) + phi[kNumGateFeatures]);
}

std::array<double, kNumDepths> budget_scores(const std::array<double, kNumGates>& raw) {
  std::array<double, kNumDepths> out{};
  BudgetAccumulator acc;
  for (int i = 0; i < kNumGates; ++i) {
    require(raw[i] >= 0.0 && raw[i] <= 1.0, "budget_scores: raw scores must be in [0,1]");
    out[i] = acc.push(raw[i]);
  }
  out[kNumGates] = acc.residual();
  return out;
}

XcorrMap mix_maps(std::span<const XcorrMap> maps, std::span<const double> weights) {
  require(!maps.empty() && maps.size() == weights.size(), "mix_maps: one weight per map");
  Tensor map(maps[0].map.shape());
  Tensor raw(maps[0].raw.shape());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    map.flat() += weights[i] * maps[i].map.flat();
    raw.flat() += weights[i] * maps[i].raw.flat();
  }
  XcorrMap out;
  out.depth = maps.back().depth;
  out.channels = maps.back().channels;
  out.map = std::move(map);
  out.raw = std::move(raw);
  std::tie(out.argmax_row, out.argmax_col) = argmax2d(out.map);
  return out;
}

PolicyOutcome run_fixed_depth(const FrameContext& ctx, int depth) {
  require(depth >= 1 && depth <= kNumDepths, "run_fixed_depth: depth must be in [1,5]");
  require(static_cast<int>(ctx.key_taps.size()) >= depth, "run_fixed_depth: missing key taps");
  const auto taps = forward_taps(ctx.weights, ctx.search, depth);
  PolicyOutcome out;
  out.depth_used = depth;
  out.map = make_xcorr_map(ctx.key_taps[depth - 1], taps.back(), depth);
  out.flops_charged = ctx.cost.fixed_depth(depth);
  return out;
}

PolicyOutcome run_soft_gating(const FrameContext& ctx, const GateParams& params) {
  require(static_cast<int>(ctx.key_taps.size()) == kNumDepths, "run_soft_gating: need five key taps");
  const auto taps = forward_taps(ctx.weights, ctx.search, kNumDepths);
  std::vector<XcorrMap> maps;
  std::array<double, kNumGates> raw{};
  for (int d = 1; d <= kNumDepths; ++d) {
    maps.push_back(make_xcorr_map(ctx.key_taps[d - 1], taps[d - 1], d));
    if (d <= kNumGates) raw[d - 1] = gate_score(extract_gate_features(maps.back()), params.phi[d - 1]);
  }
  const auto budget = budget_scores(raw);
  PolicyOutcome out;
  out.depth_used = kNumDepths;
  out.map = mix_maps(maps, budget);
  out.budgeted_scores.assign(budget.begin(), budget.end());
  out.flops_charged = ctx.cost.soft_gating();
  return out;
}

PolicyOutcome run_hard_gating(const FrameContext& ctx, const GateParams& params, double threshold) {
  require(static_cast<int>(ctx.key_taps.size()) == kNumDepths, "run_hard_gating: need five key taps");
  BlockCache cache;
  BudgetAccumulator budget;
  PolicyOutcome out;
  for (int d = 1; d <= kNumDepths; ++d) {
    const Tensor tap = forward_taps_with_cache(ctx.weights, ctx.search, cache, d);
    XcorrMap map = make_xcorr_map(ctx.key_taps[d - 1], tap, d);
    if (d == kNumDepths) {
      out.budgeted_scores.push_back(budget.residual());
    } else {
      const double scored = budget.push(gate_score(extract_gate_features(map), params.phi[d - 1]));
      out.budgeted_scores.push_back(scored);
      if (scored < threshold) continue;
    }
    out.depth_used = d;
    out.map = std::move(map);
    break;
  }
  out.flops_charged = ctx.cost.fixed_depth(out.depth_used);
  return out;
}

}  // namespace adtrack
