#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adtrack/tensor.hpp"

namespace adtrack {

inline constexpr int kNumDepths = 5;

struct BlockSpec {
  int conv_count = 2;
  Index channels = 8;
  bool followed_by_pool = true;
};

/// Five conv blocks with a tap after each one. Every conv is 3x3, pad 1,
/// followed by ReLU; blocks 1-4 end in a 2x2 max-pool, block 5 does not.
struct BackboneConfig {
  std::string preset;
  Index input_channels = 3;
  std::array<BlockSpec, kNumDepths> blocks;

  /// "vgg19-track" or "toy"; throws ContractViolation otherwise.
  static BackboneConfig from_preset(std::string_view name);

  void validate() const;
  Index tap_channels(int depth) const { return blocks.at(depth - 1).channels; }
  // Spatial reduction factor of tap `depth` relative to the input.
  Index tap_stride(int depth) const;
};

struct BackboneWeights {
  BackboneConfig config;
  std::array<std::vector<ConvSpec>, kNumDepths> blocks;

  Index parameter_count() const;
  Vector flatten() const;
  void assign(const Vector& flat);
  // Same layer structure, all kernels and biases zero.
  BackboneWeights zeros_like() const;
};

/// Kernels ~ N(0, 1/fan_in) with fan_in = C_in*9, zero biases. Deterministic per seed.
BackboneWeights init_weights(const BackboneConfig& config, std::uint64_t seed);

struct ForwardStats {
  int conv_layers = 0;
  double multiplies = 0.0;
};

/// Taps 1..max_depth for a [C,H,W] image with H, W divisible by 16.
/// Blocks deeper than max_depth are not evaluated.
std::vector<Tensor> forward_taps(const BackboneWeights& weights, const Tensor& image, int max_depth,
                                 ForwardStats* stats = nullptr);

// Incremental evaluation state for a single image. Single owner.
class BlockCache {
 public:
  int depth() const { return depth_; }
  const ForwardStats& stats() const { return stats_; }

 private:
  friend Tensor forward_taps_with_cache(const BackboneWeights&, const Tensor&, BlockCache&, int);

  bool bound_ = false;
  std::uint64_t token_ = 0;
  int depth_ = 0;
  Tensor activation_;
  ForwardStats stats_;
};

/// Evaluates only blocks cache.depth()+1 .. target_depth and returns tap
/// `target_depth`. The first call binds the cache to `image`; later calls
/// with a different image throw ContractViolation.
Tensor forward_taps_with_cache(const BackboneWeights& weights, const Tensor& image, BlockCache& cache,
                               int target_depth);

// Activations retained for the reverse pass: per block, the block input
// followed by every post-ReLU activation.
struct BackboneTrace {
  std::vector<std::vector<Tensor>> activations;
  std::vector<Tensor> taps;
};

BackboneTrace forward_trace(const BackboneWeights& weights, const Tensor& image, int depth);

/// Reverse pass. tap_grads[i] is dLoss/dtap_{i+1}; empty tensors count as zero.
/// Returns parameter gradients laid out like `weights`.
BackboneWeights backward_taps(const BackboneWeights& weights, const BackboneTrace& trace,
                              std::span<const Tensor> tap_grads);

std::uint64_t fingerprint(const Tensor& t);

}  // namespace adtrack
