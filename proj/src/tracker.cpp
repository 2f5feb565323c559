#include "adtrack/tracker.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

#include "adtrack/crop.hpp"
#include "adtrack/metrics.hpp"

namespace adtrack {

Policy Policy::parse(std::string_view text, double threshold) {
  Policy p;
  p.threshold = threshold;
  if (text == "soft") {
    p.kind = Kind::Soft;
  } else if (text == "hard") {
    p.kind = Kind::Hard;
  } else if (text.starts_with("fixed:") && text.size() == 7 && text[6] >= '1' && text[6] <= '5') {
    p.kind = Kind::Fixed;
    p.depth = text[6] - '0';
  } else {
    throw ContractViolation("unknown policy '" + std::string(text) + "' (expected fixed:<1-5>, soft or hard)");
  }
  return p;
}

std::string Policy::label() const {
  switch (kind) {
    case Kind::Fixed: return "fixed:" + std::to_string(depth);
    case Kind::Soft: return "soft";
    case Kind::Hard: return "hard";
  }
  return {};
}

double TrackResult::iou_at(int k) const {
  std::vector<std::vector<double>> ious;
  for (const auto& g : groups) {
    ious.emplace_back();
    for (const auto& f : g.frames) ious.back().push_back(f.iou);
  }
  return iou_at_k(ious, k);
}

double TrackResult::mean_flops() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups)
    for (const auto& f : g.frames) {
      sum += f.flops;
      ++n;
    }
  require(n > 0, "mean_flops: no frames");
  return sum / double(n);
}

std::array<std::size_t, kNumDepths> TrackResult::depth_histogram() const {
  std::array<std::size_t, kNumDepths> h{};
  for (const auto& g : groups)
    for (const auto& f : g.frames) ++h[f.depth_used - 1];
  return h;
}

TrackResult track_sequence(const BackboneWeights& weights, const GateParams* gates, const TrackSequence& seq,
                           const Policy& policy, const TrackOptions& options) {
  require(!policy.needs_gates() || gates != nullptr, "track_sequence: policy " + policy.label() + " needs gates");
  require(!seq.frames.empty(), "track_sequence: empty sequence");
  const CostModel cost = CostModel::build(weights.config, kKeyCrop, kSearchCrop, options.batch);
  const int key_depth = policy.kind == Policy::Kind::Fixed ? policy.depth : kNumDepths;

  TrackResult result;
  result.sequence = seq.name;
  for (const KeySearchGroup& pair :
       make_key_search_pairs(Index(seq.frames.size()), options.key_stride, options.horizon)) {
    if (pair.search.empty()) continue;
    const BoxAA key_box = seq.gt[std::size_t(pair.key)];
    const KeyCrop key = crop_key(seq.frames[std::size_t(pair.key)], key_box, options.pad_fill);
    const std::vector<Tensor> key_taps = forward_taps(weights, key.image, key_depth);

    GroupRecord group{pair.key, {}};
    Point prev = key_box.center();
    for (Index f : pair.search) {
      const SearchCrop search = crop_search(seq.frames[std::size_t(f)], prev, key.geometry);
      const FrameContext ctx{weights, key_taps, search.image, cost};
      PolicyOutcome out;
      switch (policy.kind) {
        case Policy::Kind::Fixed: out = run_fixed_depth(ctx, policy.depth); break;
        case Policy::Kind::Soft: out = run_soft_gating(ctx, *gates); break;
        case Policy::Kind::Hard: out = run_hard_gating(ctx, *gates, policy.threshold); break;
      }
      FrameRecord rec;
      rec.frame = f;
      rec.depth_used = out.depth_used;
      rec.flops = out.flops_charged;
      rec.box = map_to_box(out.map, key_box, search.geometry);
      rec.iou = iou(rec.box, seq.gt[std::size_t(f)]);
      rec.budgeted.fill(std::numeric_limits<double>::quiet_NaN());
      std::copy(out.budgeted_scores.begin(), out.budgeted_scores.end(), rec.budgeted.begin());
      rec.map = std::move(out.map);
      prev = rec.box.center();
      group.frames.push_back(std::move(rec));
    }
    result.groups.push_back(std::move(group));
  }
  return result;
}

double pooled_iou_at(std::span<const TrackResult> results, int k) {
  std::vector<std::vector<double>> ious;
  for (const auto& r : results)
    for (const auto& g : r.groups) {
      ious.emplace_back();
      for (const auto& f : g.frames) ious.back().push_back(f.iou);
    }
  return iou_at_k(ious, k);
}

double pooled_mean_flops(std::span<const TrackResult> results) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : results)
    for (const auto& g : r.groups)
      for (const auto& f : g.frames) {
        sum += f.flops;
        ++n;
      }
  require(n > 0, "pooled_mean_flops: no frames");
  return sum / double(n);
}

std::array<std::size_t, kNumDepths> pooled_histogram(std::span<const TrackResult> results) {
  std::array<std::size_t, kNumDepths> h{};
  for (const auto& r : results) {
    const auto part = r.depth_histogram();
    for (int d = 0; d < kNumDepths; ++d) h[d] += part[d];
  }
  return h;
}

std::string format_real(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string track_csv(std::span<const TrackResult> results) {
  std::string out = "frame,depth_used,iou,flops,cx,cy,w,h,g1,g2,g3,g4,g5\n";
  for (const auto& r : results)
    for (const auto& g : r.groups)
      for (const auto& f : g.frames) {
        const Point c = f.box.center();
        out += std::to_string(f.frame) + "," + std::to_string(f.depth_used) + "," + format_real(f.iou) + "," +
               format_real(f.flops) + "," + format_real(c.x) + "," + format_real(c.y) + "," +
               format_real(f.box.w) + "," + format_real(f.box.h);
        for (double s : f.budgeted) out += "," + format_real(s);
        out += "\n";
      }
  return out;
}

namespace {

CurvePoint evaluate_point(const BackboneWeights& weights, const GateParams* gates, const Policy& policy,
                          std::span<const TrackSequence> sequences, const TrackOptions& options, int k) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<TrackResult> results;
  for (const auto& seq : sequences) results.push_back(track_sequence(weights, gates, seq, policy, options));
  CurvePoint p;
  p.k = k;
  p.iou = pooled_iou_at(results, k);
  p.flops = pooled_mean_flops(results);
  p.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return p;
}

}  // namespace

std::vector<CurvePoint> pareto_curve(const BackboneWeights& weights, std::span<const GateSet> gate_sets,
                                     std::span<const double> thresholds,
                                     std::span<const TrackSequence> sequences, const TrackOptions& options,
                                     int k) {
  TrackOptions opts = options;
  opts.horizon = std::max<Index>(opts.horizon, k);
  std::vector<CurvePoint> points;
  for (int d = 1; d <= kNumDepths; ++d) {
    Policy policy{Policy::Kind::Fixed, d, kDefaultThreshold};
    CurvePoint p = evaluate_point(weights, nullptr, policy, sequences, opts, k);
    p.policy = "fixed";
    p.param = std::to_string(d);
    points.push_back(p);
  }
  for (const GateSet& set : gate_sets) {
    CurvePoint soft = evaluate_point(weights, &set.params, Policy{Policy::Kind::Soft, kNumDepths, 0.0},
                                     sequences, opts, k);
    soft.policy = "soft";
    soft.param = "lambda=" + format_real(set.lambda);
    soft.lambda = set.lambda;
    points.push_back(soft);
    for (double t : thresholds) {
      CurvePoint hard = evaluate_point(weights, &set.params, Policy{Policy::Kind::Hard, kNumDepths, t},
                                       sequences, opts, k);
      hard.policy = "hard";
      hard.param = "lambda=" + format_real(set.lambda) + ";threshold=" + format_real(t);
      hard.lambda = set.lambda;
      hard.threshold = t;
      points.push_back(hard);
    }
  }
  std::stable_sort(points.begin(), points.end(),
                   [](const CurvePoint& a, const CurvePoint& b) { return a.flops < b.flops; });
  return points;
}

std::string curve_csv(std::span<const CurvePoint> points, bool wall_clock) {
  std::string out = wall_clock ? "policy,param,k,iou,flops,seconds\n" : "policy,param,k,iou,flops\n";
  for (const auto& p : points) {
    out += p.policy + "," + p.param + "," + std::to_string(p.k) + "," + format_real(p.iou) + "," +
           format_real(p.flops);
    if (wall_clock) out += "," + format_real(p.seconds);
    out += "\n";
  }
  return out;
}

}  // namespace adtrack
