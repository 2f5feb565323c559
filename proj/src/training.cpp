#include "adtrack/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "adtrack/crop.hpp"
#include "adtrack/synthetic.hpp"

namespace adtrack {

namespace {

void axpy(BackboneWeights& y, double a, const BackboneWeights& x) {
  for (int b = 0; b < kNumDepths; ++b)
    for (std::size_t l = 0; l < y.blocks[b].size(); ++l) {
      y.blocks[b][l].kernel.flat() += a * x.blocks[b][l].kernel.flat();
      *y.blocks[b][l].bias += a * *x.blocks[b][l].bias;
    }
}

double squared_norm(const BackboneWeights& w) {
  double s = 0.0;
  for (const auto& block : w.blocks)
    for (const auto& conv : block) s += conv.kernel.flat().squaredNorm() + conv.bias->squaredNorm();
  return s;
}

void scale(BackboneWeights& w, double a) {
  for (auto& block : w.blocks)
    for (auto& conv : block) {
      conv.kernel.flat() *= a;
      *conv.bias *= a;
    }
}

Tensor logits_of(const XcorrMap& map) { return Tensor(map.raw.shape(), map.raw.flat() / loss_temperature(map.channels)); }

bool supervised(Supervision mode, int depth) { return mode == Supervision::AllDepths || depth == kNumDepths; }

double raw_score(const FeatureVector& f, const GateWeights& phi) {
  return sigmoid(f.dot(phi.head<kNumGateFeatures>()) + phi[kNumGateFeatures]);
}

}  // namespace

GroundTruthMap gaussian_gt(double row, double col, double sigma) {
  require(sigma > 0.0, "gaussian_gt: sigma must be positive");
  const double hi = double(kMapExtent - 1);
  require(row >= 0.0 && row <= hi && col >= 0.0 && col <= hi, "gaussian_gt: center outside the map");
  GroundTruthMap gt{Tensor({kMapExtent, kMapExtent}), row, col, sigma};
  for (Index y = 0; y < kMapExtent; ++y)
    for (Index x = 0; x < kMapExtent; ++x) {
      const double dy = double(y) - row, dx = double(x) - col;
      gt.map(y, x) = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
    }
  gt.map.flat() /= gt.map.flat().sum();
  return gt;
}

double loss_temperature(Index channels) {
  require(channels > 0, "loss_temperature: channels must be positive");
  return std::sqrt(double(channels * kKeyGrid * kKeyGrid));
}

double cross_entropy(const Tensor& logits, const Tensor& target) {
  require(logits.shape() == target.shape(), "cross_entropy: shape mismatch");
  const double m = logits.flat().maxCoeff();
  const double lse = m + std::log((logits.flat().array() - m).exp().sum());
  return -(target.flat().array() * (logits.flat().array() - lse)).sum();
}

double tracking_loss(const XcorrMap& map, const GroundTruthMap& gt) {
  require(map.raw.shape() == gt.map.shape(), "tracking_loss: map extents differ from ground truth");
  return cross_entropy(logits_of(map), gt.map);
}

Supervision parse_supervision(std::string_view name) {
  if (name == "all-depths") return Supervision::AllDepths;
  if (name == "deepest-only") return Supervision::DeepestOnly;
  throw ContractViolation("unknown supervision mode '" + std::string(name) + "'");
}

std::string_view to_string(Supervision mode) {
  return mode == Supervision::AllDepths ? "all-depths" : "deepest-only";
}

double conv_loss(std::span<const XcorrMap> maps, const GroundTruthMap& gt, Supervision mode) {
  require(maps.size() == std::size_t(kNumDepths), "conv_loss: need five maps");
  if (mode == Supervision::DeepestOnly) return tracking_loss(maps.back(), gt);
  double total = 0.0;
  for (const auto& m : maps) total += tracking_loss(m, gt);
  return total;
}

std::vector<TrainingGroup> build_training_set(std::span<const TrackSequence> sequences,
                                              const TrainingSetSpec& spec, std::uint64_t seed) {
  require(spec.groups_per_sequence > 0 && spec.searches_per_group > 0, "build_training_set: empty spec");
  std::vector<TrainingGroup> out;
  for (std::size_t s = 0; s < sequences.size(); ++s) {
    std::mt19937_64 rng(derive_seed(seed, s));
    std::uniform_real_distribution<double> jitter(-spec.max_jitter_cells, spec.max_jitter_cells);
    auto pairs = make_key_search_pairs(Index(sequences[s].frames.size()), spec.key_stride, spec.horizon);
    std::erase_if(pairs, [](const KeySearchGroup& g) { return g.search.empty(); });
    std::shuffle(pairs.begin(), pairs.end(), rng);
    const std::size_t n = std::min<std::size_t>(pairs.size(), std::size_t(spec.groups_per_sequence));
    for (std::size_t g = 0; g < n; ++g) {
      TrainingGroup group{s, pairs[g].key, {}};
      std::uniform_int_distribution<std::size_t> pick(0, pairs[g].search.size() - 1);
      for (int k = 0; k < spec.searches_per_group; ++k) {
        const Index frame = pairs[g].search[pick(rng)];
        const double jx = jitter(rng);
        group.searches.push_back({frame, {jx, jitter(rng)}});
      }
      out.push_back(std::move(group));
    }
  }
  return out;
}

MaterializedGroup materialize(const TrainingGroup& group, std::span<const TrackSequence> sequences,
                              const std::array<double, 3>& pad_fill, double sigma) {
  require(group.sequence < sequences.size(), "materialize: sequence index out of range");
  const TrackSequence& seq = sequences[group.sequence];
  KeyCrop key = crop_key(seq.frames.at(std::size_t(group.key_frame)), seq.gt.at(std::size_t(group.key_frame)),
                         pad_fill);
  MaterializedGroup out;
  out.key = std::move(key.image);
  const double hi = double(kMapExtent - 1);
  for (const SearchSample& s : group.searches) {
    require(s.frame > 0, "materialize: search frame needs a predecessor");
    const Point prev = seq.gt.at(std::size_t(s.frame - 1)).center();
    const double step = kCellPitch * key.geometry.scale;
    const Point center{prev.x + s.jitter.x * step, prev.y + s.jitter.y * step};
    SearchCrop crop = crop_search(seq.frames.at(std::size_t(s.frame)), center, key.geometry);
    const Point cell = search_to_map_cell(crop.geometry.source_to_search(seq.gt[std::size_t(s.frame)].center()));
    out.searches.push_back(std::move(crop.image));
    out.targets.push_back(gaussian_gt(std::clamp(cell.y, 0.0, hi), std::clamp(cell.x, 0.0, hi), sigma));
  }
  return out;
}

GroupGradient group_gradient(const BackboneWeights& weights, const MaterializedGroup& group,
                             Supervision mode) {
  GroupGradient out;
  out.grad = weights.zeros_like();
  const BackboneTrace key = forward_trace(weights, group.key, kNumDepths);
  std::vector<Tensor> key_grads(kNumDepths);
  for (int d = 0; d < kNumDepths; ++d) key_grads[d] = Tensor(key.taps[d].shape());

  for (std::size_t s = 0; s < group.searches.size(); ++s) {
    const BackboneTrace search = forward_trace(weights, group.searches[s], kNumDepths);
    std::vector<Tensor> search_grads(kNumDepths);
    for (int d = 1; d <= kNumDepths; ++d) {
      if (!supervised(mode, d)) continue;
      const XcorrTrace xt = xcorr_forward(key.taps[d - 1], search.taps[d - 1]);
      const double tau = loss_temperature(key.taps[d - 1].extent(0));
      const Tensor logits(xt.raw.shape(), xt.raw.flat() / tau);
      const Tensor p = softmax_flat(logits);
      const double loss = cross_entropy(logits, group.targets[s].map);
      out.depth_loss[d - 1] += loss;
      out.loss += loss;
      const Tensor g_raw(xt.raw.shape(), (p.flat() - group.targets[s].map.flat()) / tau);
      XcorrGrad xg = xcorr_backward(xt, g_raw);
      key_grads[d - 1].flat() += xg.key_tap.flat();
      search_grads[d - 1] = std::move(xg.search_tap);
    }
    axpy(out.grad, 1.0, backward_taps(weights, search, search_grads));
  }
  axpy(out.grad, 1.0, backward_taps(weights, key, key_grads));
  return out;
}

BackboneTrainResult train_backbone(const BackboneConfig& config, std::span<const TrackSequence> sequences,
                                   std::span<const TrainingGroup> groups, Supervision mode,
                                   const BackboneHyper& hyper, const std::array<double, 3>& pad_fill) {
  return train_backbone_from(init_weights(config, hyper.seed), sequences, groups, mode, hyper, pad_fill);
}

BackboneTrainResult train_backbone_from(BackboneWeights init, std::span<const TrackSequence> sequences,
                                        std::span<const TrainingGroup> groups, Supervision mode,
                                        const BackboneHyper& hyper, const std::array<double, 3>& pad_fill) {
  require(!groups.empty(), "train_backbone: empty training set");
  require(hyper.groups_per_step > 0 && hyper.epochs >= 0, "train_backbone: bad hyperparameters");
  BackboneTrainResult result{std::move(init), {}};
  BackboneWeights& w = result.weights;
  BackboneWeights velocity = w.zeros_like();
  std::mt19937_64 rng(derive_seed(hyper.seed, 0x7472616e));
  std::vector<std::size_t> order(groups.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    std::array<double, kNumDepths> depth_sum{};
    double total_sum = 0.0;
    std::size_t samples = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(hyper.groups_per_step)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(hyper.groups_per_step));
      BackboneWeights grad = w.zeros_like();
      std::size_t step_samples = 0;
      for (std::size_t i = start; i < stop; ++i) {
        const MaterializedGroup mg = materialize(groups[order[i]], sequences, pad_fill, hyper.sigma);
        GroupGradient gg = group_gradient(w, mg, mode);
        if (!std::isfinite(gg.loss)) throw TrainingFailure("backbone loss is not finite", epoch);
        axpy(grad, 1.0, gg.grad);
        for (int d = 0; d < kNumDepths; ++d) depth_sum[d] += gg.depth_loss[d];
        total_sum += gg.loss;
        step_samples += mg.searches.size();
      }
      if (step_samples == 0) continue;
      samples += step_samples;
      scale(grad, 1.0 / double(step_samples));
      const double norm = std::sqrt(squared_norm(grad));
      if (!std::isfinite(norm)) throw TrainingFailure("backbone gradient is not finite", epoch);
      if (hyper.grad_clip > 0.0 && norm > hyper.grad_clip) scale(grad, hyper.grad_clip / norm);
      scale(velocity, hyper.momentum);
      axpy(velocity, 1.0, grad);
      axpy(w, -hyper.learning_rate, velocity);
    }
    EpochLosses row;
    row.epoch = epoch;
    const double n = double(std::max<std::size_t>(samples, 1));
    for (int d = 1; d <= kNumDepths; ++d)
      if (supervised(mode, d)) row.depth[d - 1] = depth_sum[d - 1] / n;
    row.total = total_sum / n;
    if (!std::isfinite(row.total)) throw TrainingFailure("backbone loss is not finite", epoch);
    result.trace.push_back(row);
    if (hyper.on_epoch) hyper.on_epoch(row, w);
  }
  return result;
}

std::array<double, kNumDepths> evaluate_depth_losses(const BackboneWeights& weights,
                                                     std::span<const TrackSequence> sequences,
                                                     std::span<const TrainingGroup> groups,
                                                     const std::array<double, 3>& pad_fill, double sigma) {
  std::array<double, kNumDepths> sum{};
  std::size_t n = 0;
  for (const TrainingGroup& g : groups) {
    const MaterializedGroup mg = materialize(g, sequences, pad_fill, sigma);
    const auto key = forward_taps(weights, mg.key, kNumDepths);
    for (std::size_t s = 0; s < mg.searches.size(); ++s) {
      const auto taps = forward_taps(weights, mg.searches[s], kNumDepths);
      for (int d = 1; d <= kNumDepths; ++d)
        sum[d - 1] += tracking_loss(make_xcorr_map(key[d - 1], taps[d - 1], d), mg.targets[s]);
      ++n;
    }
  }
  require(n > 0, "evaluate_depth_losses: no search samples");
  for (double& v : sum) v /= double(n);
  return sum;
}

GateSample make_gate_sample(std::span<const XcorrMap> maps, const GroundTruthMap& gt) {
  require(maps.size() == std::size_t(kNumDepths), "make_gate_sample: need five maps");
  GateSample s;
  for (int i = 0; i < kNumGates; ++i) s.features[i] = extract_gate_features(maps[i]).vector();
  for (int i = 0; i < kNumDepths; ++i) s.losses[i] = tracking_loss(maps[i], gt);
  return s;
}

std::array<double, kNumDepths> budgeted_scores(const GateSample& sample, const GateParams& params) {
  std::array<double, kNumGates> raw{};
  for (int i = 0; i < kNumGates; ++i) raw[i] = raw_score(sample.features[i], params.phi[i]);
  return budget_scores(raw);
}

GateLossTerms gate_loss(const GateSample& sample, const GateParams& params, const GateLossConfig& config) {
  const auto g = budgeted_scores(sample, params);
  GateLossTerms terms;
  for (int i = 0; i < kNumDepths; ++i) {
    terms.tracking += g[i] * sample.losses[i];
    terms.cost += config.lambda * config.costs[i] * g[i];
  }
  return terms;
}

GateLossTerms gate_loss(std::span<const XcorrMap> maps, const GroundTruthMap& gt, const GateParams& params,
                        const GateLossConfig& config) {
  return gate_loss(make_gate_sample(maps, gt), params, config);
}

GateParams gate_loss_gradient(const GateSample& sample, const GateParams& params,
                              const GateLossConfig& config) {
  // Loss = V_1 with V_5 = C_5, V_i = g_i C_i + (1 - g_i) V_{i+1}, C_i = L_i + lambda p_i.
  std::array<double, kNumGates> g{};
  for (int i = 0; i < kNumGates; ++i) g[i] = raw_score(sample.features[i], params.phi[i]);
  std::array<double, kNumDepths> c{};
  for (int i = 0; i < kNumDepths; ++i) c[i] = sample.losses[i] + config.lambda * config.costs[i];
  std::array<double, kNumDepths> v{};
  v[kNumGates] = c[kNumGates];
  for (int i = kNumGates - 1; i >= 0; --i) v[i] = g[i] * c[i] + (1.0 - g[i]) * v[i + 1];

  GateParams grad;
  double survive = 1.0;  // prod_{j<i} (1 - g_j)
  for (int i = 0; i < kNumGates; ++i) {
    const double d_a = survive * (c[i] - v[i + 1]) * g[i] * (1.0 - g[i]);
    grad.phi[i].head<kNumGateFeatures>() = d_a * sample.features[i];
    grad.phi[i][kNumGateFeatures] = d_a;
    survive *= 1.0 - g[i];
  }
  return grad;
}

GateTrainResult train_gates(std::span<const GateSample> samples, const GateLossConfig& config) {
  require(!samples.empty(), "train_gates: no samples");
  require(config.batch > 0 && config.epochs >= 0, "train_gates: bad hyperparameters");
  const double n = double(samples.size());

  std::array<FeatureVector, kNumGates> mean, stdev;
  for (int i = 0; i < kNumGates; ++i) {
    mean[i].setZero();
    stdev[i].setZero();
    for (const auto& s : samples) mean[i] += s.features[i];
    mean[i] /= n;
    for (const auto& s : samples) stdev[i].array() += (s.features[i] - mean[i]).array().square();
    stdev[i] = (stdev[i] / n).cwiseSqrt();
    for (int j = 0; j < kNumGateFeatures; ++j)
      if (stdev[i][j] < kDegenerateVariance) stdev[i][j] = 1.0;
  }
  std::vector<GateSample> norm(samples.begin(), samples.end());
  for (auto& s : norm)
    for (int i = 0; i < kNumGates; ++i)
      s.features[i] = ((s.features[i] - mean[i]).array() / stdev[i].array()).matrix();

  GateTrainResult result;
  GateParams& theta = result.params;
  std::mt19937_64 rng(derive_seed(config.seed, 0x67617465));
  std::vector<std::size_t> order(norm.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += std::size_t(config.batch)) {
      const std::size_t stop = std::min(order.size(), start + std::size_t(config.batch));
      GateParams step;
      for (std::size_t k = start; k < stop; ++k) {
        const GateParams g = gate_loss_gradient(norm[order[k]], theta, config);
        for (int i = 0; i < kNumGates; ++i) step.phi[i] += g.phi[i];
      }
      const double lr = config.learning_rate / double(stop - start);
      for (int i = 0; i < kNumGates; ++i) theta.phi[i] -= lr * step.phi[i];
    }
    GateEpoch row{epoch, 0.0, 0.0};
    for (const auto& s : norm) {
      const GateLossTerms t = gate_loss(s, theta, config);
      row.tracking += t.tracking / n;
      row.cost += t.cost / n;
    }
    if (!std::isfinite(row.tracking + row.cost)) throw TrainingFailure("gate loss is not finite", epoch);
    result.trace.push_back(row);
  }

  for (int i = 0; i < kNumGates; ++i) {
    GateWeights& phi = theta.phi[i];
    const FeatureVector w = (phi.head<kNumGateFeatures>().array() / stdev[i].array()).matrix();
    phi[kNumGateFeatures] -= w.dot(mean[i]);
    phi.head<kNumGateFeatures>() = w;
  }
  return result;
}

std::vector<GateSample> collect_gate_samples(const BackboneWeights& frozen,
                                             std::span<const TrackSequence> sequences,
                                             std::span<const TrainingGroup> groups,
                                             const std::array<double, 3>& pad_fill, double sigma) {
  std::vector<GateSample> out;
  for (const TrainingGroup& g : groups) {
    const MaterializedGroup mg = materialize(g, sequences, pad_fill, sigma);
    const auto key = forward_taps(frozen, mg.key, kNumDepths);
    for (std::size_t s = 0; s < mg.searches.size(); ++s) {
      const auto taps = forward_taps(frozen, mg.searches[s], kNumDepths);
      std::vector<XcorrMap> maps;
      for (int d = 1; d <= kNumDepths; ++d) maps.push_back(make_xcorr_map(key[d - 1], taps[d - 1], d));
      out.push_back(make_gate_sample(maps, mg.targets[s]));
    }
  }
  return out;
}

GateTrainResult train_gates(const BackboneWeights& frozen, std::span<const TrackSequence> sequences,
                            std::span<const TrainingGroup> groups, const std::array<double, 3>& pad_fill,
                            const GateLossConfig& config) {
  const auto samples = collect_gate_samples(frozen, sequences, groups, pad_fill);
  return train_gates(samples, config);
}

int hard_gate_depth(const GateSample& sample, const GateParams& params, double threshold) {
  BudgetAccumulator budget;
  for (int i = 0; i < kNumGates; ++i)
    if (budget.push(raw_score(sample.features[i], params.phi[i])) >= threshold) return i + 1;
  return kNumDepths;
}

}  // namespace adtrack
