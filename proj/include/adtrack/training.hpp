#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "adtrack/backbone.hpp"
#include "adtrack/gating.hpp"
#include "adtrack/sequence.hpp"
#include "adtrack/xcorr.hpp"

namespace adtrack {

// ---------------------------------------------------------------------------
// Losses

struct GroundTruthMap {
  Tensor map;  // 9x9, sums to 1
  double row = 0.0;
  double col = 0.0;
  double sigma = 1.0;
};

inline constexpr double kDefaultSigma = 1.0;

/// Normalised isotropic Gaussian on the 9x9 map grid (sigma in cells).
GroundTruthMap gaussian_gt(double row, double col, double sigma = kDefaultSigma);

// Logit temperature for C-channel taps: sqrt(C * 8 * 8).
double loss_temperature(Index channels);

// -sum G log softmax(logits).
double cross_entropy(const Tensor& logits, const Tensor& target);

/// Softmax cross-entropy between the map's logits (raw / temperature) and G.
double tracking_loss(const XcorrMap& map, const GroundTruthMap& gt);

enum class Supervision { AllDepths, DeepestOnly };

Supervision parse_supervision(std::string_view name);
std::string_view to_string(Supervision mode);

/// Sum of per-depth tracking losses (all five), or L_5 alone.
double conv_loss(std::span<const XcorrMap> maps, const GroundTruthMap& gt,
                 Supervision mode = Supervision::AllDepths);

// ---------------------------------------------------------------------------
// Training data
//
// Samples are descriptors into a set of sequences; crops are rendered on
// demand so that a training set costs no image memory of its own.

struct SearchSample {
  Index frame = 0;
  Point jitter;  // crop centre minus the previous frame's gt centre, in map cells
};

struct TrainingGroup {
  std::size_t sequence = 0;
  Index key_frame = 0;
  std::vector<SearchSample> searches;
};

struct TrainingSetSpec {
  int groups_per_sequence = 4;
  int searches_per_group = 4;
  Index key_stride = 10;
  Index horizon = 100;
  double max_jitter_cells = 2.0;
};

std::vector<TrainingGroup> build_training_set(std::span<const TrackSequence> sequences,
                                              const TrainingSetSpec& spec, std::uint64_t seed);

struct MaterializedGroup {
  Tensor key;
  std::vector<Tensor> searches;
  std::vector<GroundTruthMap> targets;
};

MaterializedGroup materialize(const TrainingGroup& group, std::span<const TrackSequence> sequences,
                              const std::array<double, 3>& pad_fill, double sigma = kDefaultSigma);

// ---------------------------------------------------------------------------
// Phase 1: backbone

struct EpochLosses {
  int epoch = 0;
  std::array<std::optional<double>, kNumDepths> depth;  // mean L_d; unset when not supervised
  double total = 0.0;
};

struct BackboneHyper {
  int epochs = 20;
  double learning_rate = 0.005;
  double momentum = 0.9;
  int groups_per_step = 2;
  double grad_clip = 10.0;  // global L2 norm; <= 0 disables
  double sigma = kDefaultSigma;
  std::uint64_t seed = 0;
  // Called after every epoch with that epoch's losses and the current weights.
  std::function<void(const EpochLosses&, const BackboneWeights&)> on_epoch;
};

struct BackboneTrainResult {
  BackboneWeights weights;
  std::vector<EpochLosses> trace;
};

/// Loss and parameter gradient for one key and its search crops.
struct GroupGradient {
  double loss = 0.0;
  std::array<double, kNumDepths> depth_loss{};
  BackboneWeights grad;
};

GroupGradient group_gradient(const BackboneWeights& weights, const MaterializedGroup& group,
                             Supervision mode);

/// Momentum SGD on the mean conv loss. Starts from init_weights(config, seed).
/// Throws TrainingFailure when a loss turns non-finite.
BackboneTrainResult train_backbone(const BackboneConfig& config, std::span<const TrackSequence> sequences,
                                   std::span<const TrainingGroup> groups, Supervision mode,
                                   const BackboneHyper& hyper, const std::array<double, 3>& pad_fill);

// Continues training from `init` (used for one-step checks).
BackboneTrainResult train_backbone_from(BackboneWeights init, std::span<const TrackSequence> sequences,
                                        std::span<const TrainingGroup> groups, Supervision mode,
                                        const BackboneHyper& hyper, const std::array<double, 3>& pad_fill);

/// Mean per-depth tracking loss over the groups.
std::array<double, kNumDepths> evaluate_depth_losses(const BackboneWeights& weights,
                                                     std::span<const TrackSequence> sequences,
                                                     std::span<const TrainingGroup> groups,
                                                     const std::array<double, 3>& pad_fill,
                                                     double sigma = kDefaultSigma);

// ---------------------------------------------------------------------------
// Phase 2: gates

inline constexpr std::array<double, kNumDepths> kDefaultCosts{1.00, 1.43, 3.35, 3.34, 0.95};
inline constexpr double kDefaultLambda = 0.75;

struct GateLossConfig {
  double lambda = kDefaultLambda;
  std::array<double, kNumDepths> costs = kDefaultCosts;
  double learning_rate = 0.5;
  int epochs = 300;
  int batch = 25;
  std::uint64_t seed = 0;
};

/// Per-frame inputs of the gate loss; constant with respect to the gates.
struct GateSample {
  std::array<FeatureVector, kNumGates> features;
  std::array<double, kNumDepths> losses{};
};

GateSample make_gate_sample(std::span<const XcorrMap> maps, const GroundTruthMap& gt);

struct GateLossTerms {
  double tracking = 0.0;
  double cost = 0.0;
  double total() const { return tracking + cost; }
};

std::array<double, kNumDepths> budgeted_scores(const GateSample& sample, const GateParams& params);

/// sum g*_i L_i + lambda * sum p_i g*_i, reported as its two terms.
GateLossTerms gate_loss(const GateSample& sample, const GateParams& params, const GateLossConfig& config);
GateLossTerms gate_loss(std::span<const XcorrMap> maps, const GroundTruthMap& gt, const GateParams& params,
                        const GateLossConfig& config);

/// Closed-form d(gate_loss)/d(phi), laid out like GateParams.
GateParams gate_loss_gradient(const GateSample& sample, const GateParams& params,
                              const GateLossConfig& config);

struct GateEpoch {
  int epoch = 0;
  double tracking = 0.0;
  double cost = 0.0;
};

struct GateTrainResult {
  GateParams params;
  std::vector<GateEpoch> trace;
};

/// Mini-batch gradient descent on the mean gate loss. Features are
/// standardised internally; the returned weights act on raw features.
GateTrainResult train_gates(std::span<const GateSample> samples, const GateLossConfig& config);

/// Precomputes gate samples with the frozen backbone, then trains.
std::vector<GateSample> collect_gate_samples(const BackboneWeights& frozen,
                                             std::span<const TrackSequence> sequences,
                                             std::span<const TrainingGroup> groups,
                                             const std::array<double, 3>& pad_fill,
                                             double sigma = kDefaultSigma);

GateTrainResult train_gates(const BackboneWeights& frozen, std::span<const TrackSequence> sequences,
                            std::span<const TrainingGroup> groups, const std::array<double, 3>& pad_fill,
                            const GateLossConfig& config);

/// Depth chosen by hard gating for a precomputed sample.
int hard_gate_depth(const GateSample& sample, const GateParams& params, double threshold);

}  // namespace adtrack
