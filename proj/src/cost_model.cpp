#include "adtrack/cost_model.hpp"

#include <cmath>

#include "adtrack/geometry.hpp"

namespace adtrack {

namespace {

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::array<double, kNumDepths> block_costs(const BackboneConfig& config, Index res) {
  std::array<double, kNumDepths> out{};
  Index c_in = config.input_channels;
  Index h = res;
  for (int b = 0; b < kNumDepths; ++b) {
    const BlockSpec& block = config.blocks[b];
    for (int l = 0; l < block.conv_count; ++l) {
      out[b] += conv_multiplies(block.channels, c_in, 3, h, h);
      c_in = block.channels;
    }
    if (block.followed_by_pool) h /= 2;
  }
  return out;
}

}  // namespace

double conv_multiplies(Index c_out, Index c_in, Index k, Index out_h, Index out_w) {
  return double(c_out) * double(c_in) * double(k * k) * double(out_h) * double(out_w);
}

CostModel CostModel::build(const BackboneConfig& config, Index key_res, Index search_res,
                           Index batch) {
  config.validate();
  require(key_res % 16 == 0 && search_res % 16 == 0 && key_res > 0 && search_res > 0,
          "cost model: resolutions must be positive multiples of 16");
  require(batch >= 1, "cost model: batch must be >= 1");
  CostModel m;
  m.config = config;
  m.key_res = key_res;
  m.search_res = search_res;
  m.batch = batch;
  m.key_block = block_costs(config, key_res);
  m.search_block = block_costs(config, search_res);
  for (int d = 0; d < kNumDepths; ++d)
    m.xcorr[d] = double(kMapExtent * kMapExtent) * double(config.blocks[d].channels) *
                 double(kKeyGrid * kKeyGrid);
  return m;
}

double CostModel::key_pathway(int depth) const {
  double total = 0.0;
  for (int b = 0; b < depth; ++b) total += key_block[b];
  return total;
}

double CostModel::search_pathway(int depth) const {
  double total = 0.0;
  for (int b = 0; b < depth; ++b) total += search_block[b];
  return double(batch) * total;
}

double CostModel::correlation(int depth) const { return double(batch) * xcorr[depth - 1]; }

double CostModel::fixed_depth(int depth) const {
  require(depth >= 1 && depth <= kNumDepths, "cost model: depth must be in [1,5]");
  return key_pathway(depth) + search_pathway(depth) + correlation(depth);
}

double CostModel::soft_gating() const {
  double total = key_pathway(kNumDepths) + search_pathway(kNumDepths);
  for (int d = 1; d <= kNumDepths; ++d) total += correlation(d);
  return total;
}

std::array<double, kNumDepths> CostModel::rounded_ratios() const {
  std::array<double, kNumDepths> out{};
  for (int d = 1; d <= kNumDepths; ++d) out[d - 1] = round2(ratio(fixed_depth(d)));
  return out;
}

std::array<double, kNumDepths> CostModel::incremental_costs() const {
  const auto r = rounded_ratios();
  std::array<double, kNumDepths> p{};
  p[0] = 1.0;
  for (int d = 1; d < kNumDepths; ++d) p[d] = round2(r[d] - r[d - 1]);
  return p;
}

double flops(const BackboneConfig& config, const PolicyDescriptor& policy, Index key_res,
             Index search_res, Index batch) {
  const CostModel model = CostModel::build(config, key_res, search_res, batch);
  switch (policy.kind) {
    case PolicyDescriptor::Kind::Fixed:
      return model.fixed_depth(policy.depth);
    case PolicyDescriptor::Kind::Soft:
      return model.soft_gating();
    case PolicyDescriptor::Kind::Hard: {
      require(!policy.trace.empty(), "flops: hard-gating trace is empty");
      double total = 0.0;
      for (int d : policy.trace) total += model.fixed_depth(d);
      return total / double(policy.trace.size());
    }
  }
  return 0.0;
}

}  // namespace adtrack
