#include <gtest/gtest.h>

#include <random>
#include <set>

#include "adtrack/cost_model.hpp"
#include "adtrack/metrics.hpp"
#include "adtrack/synthetic.hpp"
#include "adtrack/tracker.hpp"
#include "adtrack/training.hpp"

using namespace adtrack;

namespace {

// Unit cells covered by an integer box, counted one by one.
std::set<std::pair<int, int>> pixels(const BoxAA& b) {
  std::set<std::pair<int, int>> s;
  for (int y = int(b.y); y < int(b.y + b.h); ++y)
    for (int x = int(b.x); x < int(b.x + b.w); ++x) s.insert({x, y});
  return s;
}

}  // namespace

TEST(Iou, Examples) {
  const BoxAA a{0, 0, 2, 2};
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, {5, 5, 1, 1}), 0.0);
  EXPECT_EQ(iou(a, {2, 0, 2, 2}), 0.0);  // shared edge only
  EXPECT_DOUBLE_EQ(iou(a, {1, 0, 2, 2}), 1.0 / 3.0);
  EXPECT_THROW(iou(a, {0, 0, 0, 1}), ContractViolation);
  EXPECT_THROW(iou({0, 0, 1, -1}, a), ContractViolation);
}

TEST(Iou, MatchesPixelSetOracleAndIsSymmetric) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> pos(0, 12), ext(1, 8);
  for (int i = 0; i < 500; ++i) {
    const BoxAA a{double(pos(rng)), double(pos(rng)), double(ext(rng)), double(ext(rng))};
    const BoxAA b{double(pos(rng)), double(pos(rng)), double(ext(rng)), double(ext(rng))};
    const auto pa = pixels(a), pb = pixels(b);
    std::size_t inter = 0;
    for (const auto& p : pa) inter += pb.count(p);
    const double expected = double(inter) / double(pa.size() + pb.size() - inter);
    ASSERT_EQ(iou(a, b), expected) << i;
    ASSERT_EQ(iou(a, b), iou(b, a));
    ASSERT_EQ(iou(a, b) == 1.0, a == b);
  }
}

TEST(IouAtK, PerfectAndFirstFrame) {
  const std::vector<std::vector<BoxAA>> gt{{{0, 0, 4, 4}, {1, 1, 4, 4}}, {{2, 2, 3, 3}}};
  for (int k : {1, 5, 25}) EXPECT_EQ(iou_at_k(gt, gt, k), 1.0);

  const std::vector<std::vector<BoxAA>> pred{{{1, 0, 4, 4}, {9, 9, 1, 1}}, {{2, 2, 3, 1}}};
  const double first = 0.5 * (iou(pred[0][0], gt[0][0]) + iou(pred[1][0], gt[1][0]));
  EXPECT_DOUBLE_EQ(iou_at_k(pred, gt, 1), first);
}

TEST(IouAtK, NestedMeanByHand) {
  // Group A: 0.5, 0.25, 0.0 ; group B: 1.0.
  const std::vector<std::vector<double>> groups{{0.5, 0.25, 0.0}, {1.0}};
  EXPECT_DOUBLE_EQ(iou_at_k(groups, 1), 0.75);
  EXPECT_DOUBLE_EQ(iou_at_k(groups, 2), (0.375 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(iou_at_k(groups, 25), (0.25 + 1.0) / 2.0);
  const std::vector<std::vector<double>> with_empty{{}, {0.4}};
  EXPECT_DOUBLE_EQ(iou_at_k(with_empty, 5), 0.4);
  EXPECT_THROW(iou_at_k(std::vector<std::vector<double>>{{}}, 5), ContractViolation);
  EXPECT_THROW(iou_at_k(groups, 0), ContractViolation);
}

TEST(CostModel, VggRatiosMatchReferenceTable) {
  const CostModel m = CostModel::build(BackboneConfig::from_preset("vgg19-track"));
  const std::array<double, 5> table{1.00, 2.43, 5.78, 9.12, 10.07};
  for (int d = 1; d <= 5; ++d) EXPECT_NEAR(m.ratio(m.fixed_depth(d)), table[d - 1], 0.1 * table[d - 1]) << d;
  EXPECT_NEAR(m.ratio(m.soft_gating()), 10.08, 1.008);
}

TEST(CostModel, LayerCountFormula) {
  EXPECT_EQ(conv_multiplies(64, 3, 3, 128, 128), 64.0 * 3 * 9 * 128 * 128);
  const CostModel m = CostModel::build(BackboneConfig::from_preset("vgg19-track"));
  // Block 1 on the 128 key: two 3x3 convs at full resolution.
  EXPECT_EQ(m.key_block[0], conv_multiplies(64, 3, 3, 128, 128) + conv_multiplies(64, 64, 3, 128, 128));
  // Correlation: 9x9 positions, C channels, 8x8 key window.
  EXPECT_EQ(m.xcorr[2], 81.0 * 256 * 64);
}

TEST(CostModel, BatchLinearityAndMonotonicity) {
  for (const char* preset : {"vgg19-track", "toy"}) {
    const auto cfg = BackboneConfig::from_preset(preset);
    const CostModel a = CostModel::build(cfg, 128, 256, 25), b = CostModel::build(cfg, 128, 256, 50);
    for (int d = 1; d <= 5; ++d) {
      EXPECT_EQ(b.search_pathway(d), 2.0 * a.search_pathway(d));
      EXPECT_EQ(b.correlation(d), 2.0 * a.correlation(d));
      EXPECT_EQ(b.key_pathway(d), a.key_pathway(d));
      if (d > 1) {
        EXPECT_GT(a.fixed_depth(d), a.fixed_depth(d - 1));
      }
      EXPECT_EQ(a.fixed_depth(d), a.key_pathway(d) + a.search_pathway(d) + a.correlation(d));
    }
    double all = a.key_pathway(5) + a.search_pathway(5);
    for (int d = 1; d <= 5; ++d) all += a.correlation(d);
    EXPECT_DOUBLE_EQ(a.soft_gating(), all);
  }
  EXPECT_THROW(CostModel::build(BackboneConfig::from_preset("toy")).fixed_depth(6), ContractViolation);
}

TEST(CostModel, IncrementalCostsAreTheGateDefaults) {
  const CostModel m = CostModel::build(BackboneConfig::from_preset("vgg19-track"));
  EXPECT_EQ(m.incremental_costs(), kDefaultCosts);
  const auto r = m.rounded_ratios();
  EXPECT_EQ(r[0], 1.0);
  EXPECT_NEAR(r[1], 2.43, 1e-12);
}

TEST(Flops, HardGatingAveragesOverTrace) {
  const auto cfg = BackboneConfig::from_preset("vgg19-track");
  const CostModel m = CostModel::build(cfg);
  const std::vector<int> trace{1, 1, 2, 5, 3, 1, 4, 5, 5, 2};
  std::array<double, 5> frac{};
  for (int d : trace) frac[d - 1] += 1.0 / double(trace.size());
  double expected = 0.0;
  for (int d = 1; d <= 5; ++d) expected += frac[d - 1] * m.fixed_depth(d);
  const double got = flops(cfg, {PolicyDescriptor::Kind::Hard, 1, trace});
  EXPECT_NEAR(got, expected, 1e-9 * expected);
  EXPECT_LE(got, m.fixed_depth(5));
  EXPECT_EQ(flops(cfg, {PolicyDescriptor::Kind::Fixed, 3, {}}), m.fixed_depth(3));
  EXPECT_EQ(flops(cfg, {PolicyDescriptor::Kind::Soft, 1, {}}), m.soft_gating());
  EXPECT_THROW(flops(cfg, {PolicyDescriptor::Kind::Hard, 1, {}}), ContractViolation);
}

TEST(ParetoCurve, FixedPointsSortedAndHardBelowSoft) {
  const auto seqs = make_synthetic_dataset(SynthMix::Mixed, 2, 6, 3);
  const auto w = init_weights(BackboneConfig::from_preset("toy"), 3);
  GateSet set{0.75, {}};
  for (auto& phi : set.params.phi) phi[kNumGateFeatures] = 0.3;
  TrackOptions opt;
  opt.horizon = 3;
  const std::vector<double> thresholds{0.25, 0.75};
  const auto pts = pareto_curve(w, std::span(&set, 1), thresholds, seqs, opt, 25);
  ASSERT_EQ(pts.size(), 5u + 1u + 2u);
  const CostModel m = CostModel::build(w.config, kKeyCrop, kSearchCrop, opt.batch);
  int fixed = 0;
  double soft = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) {
      EXPECT_LE(pts[i - 1].flops, pts[i].flops);
    }
    EXPECT_GE(pts[i].iou, 0.0);
    EXPECT_LE(pts[i].iou, 1.0);
    if (pts[i].policy == "fixed") {
      ++fixed;
      EXPECT_EQ(pts[i].flops, m.fixed_depth(std::stoi(pts[i].param)));
    }
    if (pts[i].policy == "soft") soft = pts[i].flops;
  }
  EXPECT_EQ(fixed, 5);
  for (const auto& p : pts)
    if (p.policy == "hard") {
      EXPECT_LT(p.flops, soft);
      EXPECT_LE(p.flops, m.fixed_depth(5));
      EXPECT_EQ(p.param.rfind("lambda=0.75;threshold=", 0), 0u);
    }
  const std::string csv = curve_csv(pts, false);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "policy,param,k,iou,flops");
}

TEST(TrackSequence, HardAtZeroThresholdReproducesFixedOne) {
  const auto seqs = make_synthetic_dataset(SynthMix::Hard, 1, 8, 5);
  const auto w = init_weights(BackboneConfig::from_preset("toy"), 5);
  GateParams g;
  TrackOptions opt;
  opt.horizon = 4;
  const TrackResult hard = track_sequence(w, &g, seqs[0], Policy::parse("hard", 0.0), opt);
  const TrackResult fixed = track_sequence(w, nullptr, seqs[0], Policy::parse("fixed:1"), opt);
  const TrackResult soft = track_sequence(w, &g, seqs[0], Policy::parse("soft"), opt);
  ASSERT_EQ(hard.groups.size(), fixed.groups.size());
  for (std::size_t i = 0; i < hard.groups.size(); ++i)
    for (std::size_t j = 0; j < hard.groups[i].frames.size(); ++j) {
      EXPECT_EQ(hard.groups[i].frames[j].map.map, fixed.groups[i].frames[j].map.map);
      EXPECT_EQ(hard.groups[i].frames[j].box, fixed.groups[i].frames[j].box);
      EXPECT_EQ(soft.groups[i].frames[j].depth_used, 5);
    }
  EXPECT_EQ(hard.mean_flops(), fixed.mean_flops());
  EXPECT_THROW(track_sequence(w, nullptr, seqs[0], Policy::parse("soft"), opt), ContractViolation);
  EXPECT_THROW(Policy::parse("fixed:6"), ContractViolation);
  EXPECT_THROW(Policy::parse("medium"), ContractViolation);
}
