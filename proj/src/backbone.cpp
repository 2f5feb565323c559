#include "adtrack/backbone.hpp"

#include <cmath>
#include <cstring>
#include <random>

namespace adtrack {

namespace {

constexpr Index kKernel = 3;

void check_depth(int depth) {
  require(depth >= 1 && depth <= kNumDepths,
          "depth must be in [1,5], got " + std::to_string(depth));
}

void check_image(const BackboneConfig& config, const Tensor& image) {
  require(image.rank() == 3 && image.extent(0) == config.input_channels,
          "backbone: image must be [" + std::to_string(config.input_channels) + ",H,W], got " +
              shape_string(image.shape()));
  require(image.extent(1) % 16 == 0 && image.extent(2) % 16 == 0,
          "backbone: image extents must be divisible by 16, got " + shape_string(image.shape()));
}

// Runs one block, appending post-ReLU activations to `keep` when non-null.
Tensor run_block(const BackboneWeights& weights, int block, Tensor x, ForwardStats* stats,
                 std::vector<Tensor>* keep) {
  for (const ConvSpec& conv : weights.blocks[block]) {
    Tensor y = relu(conv2d(x, conv));
    if (stats) {
      stats->conv_layers += 1;
      stats->multiplies += double(conv.out_channels()) * double(conv.in_channels()) *
                           double(conv.kernel_h() * conv.kernel_w()) *
                           double(y.extent(1) * y.extent(2));
    }
    if (keep) keep->push_back(y);
    x = std::move(y);
  }
  if (weights.config.blocks[block].followed_by_pool) x = maxpool2(x);
  return x;
}

}  // namespace

BackboneConfig BackboneConfig::from_preset(std::string_view name) {
  BackboneConfig config;
  config.preset = std::string(name);
  if (name == "vgg19-track") {
    config.blocks = {{{2, 64, true}, {2, 128, true}, {4, 256, true}, {4, 512, true}, {4, 512, false}}};
  } else if (name == "toy") {
    config.blocks = {{{2, 8, true}, {2, 16, true}, {2, 16, true}, {2, 32, true}, {2, 32, false}}};
  } else {
    throw ContractViolation("unknown backbone preset '" + std::string(name) + "'");
  }
  return config;
}

void BackboneConfig::validate() const {
  require(input_channels >= 1, "backbone: input_channels must be positive");
  for (int b = 0; b < kNumDepths; ++b) {
    require(blocks[b].conv_count >= 2 && blocks[b].conv_count <= 4,
            "backbone: conv_count must be in [2,4]");
    require(blocks[b].channels >= 1, "backbone: channels must be positive");
  }
  require(!blocks[kNumDepths - 1].followed_by_pool, "backbone: block 5 must not pool");
}

Index BackboneConfig::tap_stride(int depth) const {
  check_depth(depth);
  Index stride = 1;
  for (int b = 0; b < depth; ++b)
    if (blocks[b].followed_by_pool) stride *= 2;
  return stride;
}

Index BackboneWeights::parameter_count() const {
  Index n = 0;
  for (const auto& block : blocks)
    for (const ConvSpec& conv : block) n += conv.kernel.size() + conv.bias->size();
  return n;
}

Vector BackboneWeights::flatten() const {
  Vector out(parameter_count());
  Index at = 0;
  for (const auto& block : blocks)
    for (const ConvSpec& conv : block) {
      out.segment(at, conv.kernel.size()) = conv.kernel.flat();
      at += conv.kernel.size();
      out.segment(at, conv.bias->size()) = *conv.bias;
      at += conv.bias->size();
    }
  return out;
}

void BackboneWeights::assign(const Vector& flat) {
  require(flat.size() == parameter_count(), "backbone: parameter vector length mismatch");
  Index at = 0;
  for (auto& block : blocks)
    for (ConvSpec& conv : block) {
      conv.kernel.flat() = flat.segment(at, conv.kernel.size());
      at += conv.kernel.size();
      *conv.bias = flat.segment(at, conv.bias->size());
      at += conv.bias->size();
    }
}

BackboneWeights BackboneWeights::zeros_like() const {
  BackboneWeights out = *this;
  out.assign(Vector::Zero(parameter_count()));
  return out;
}

BackboneWeights init_weights(const BackboneConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  BackboneWeights weights;
  weights.config = config;
  Index in = config.input_channels;
  for (int b = 0; b < kNumDepths; ++b) {
    const Index out = config.blocks[b].channels;
    for (int l = 0; l < config.blocks[b].conv_count; ++l) {
      const Index fan_in = in * kKernel * kKernel;
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(fan_in)));
      ConvSpec conv;
      conv.stride = 1;
      conv.padding = 1;
      conv.kernel = Tensor({out, in, kKernel, kKernel});
      for (Index i = 0; i < conv.kernel.size(); ++i) conv.kernel[i] = dist(rng);
      conv.bias = Vector::Zero(out);
      weights.blocks[b].push_back(std::move(conv));
      in = out;
    }
  }
  return weights;
}

std::vector<Tensor> forward_taps(const BackboneWeights& weights, const Tensor& image, int max_depth,
                                 ForwardStats* stats) {
  check_depth(max_depth);
  check_image(weights.config, image);
  std::vector<Tensor> taps;
  taps.reserve(max_depth);
  Tensor x = image;
  for (int b = 0; b < max_depth; ++b) {
    x = run_block(weights, b, std::move(x), stats, nullptr);
    taps.push_back(x);
  }
  return taps;
}

std::uint64_t fingerprint(const Tensor& t) {
  // FNV-1a over the shape and the raw bytes of the values.
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (Index e : t.shape()) mix(&e, sizeof e);
  mix(t.data(), sizeof(double) * std::size_t(t.size()));
  return h;
}

Tensor forward_taps_with_cache(const BackboneWeights& weights, const Tensor& image, BlockCache& cache,
                               int target_depth) {
  check_depth(target_depth);
  const std::uint64_t token = fingerprint(image);
  if (!cache.bound_) {
    check_image(weights.config, image);
    cache.bound_ = true;
    cache.token_ = token;
    cache.activation_ = image;
  } else {
    require(cache.token_ == token, "forward_taps_with_cache: cache belongs to a different image");
  }
  require(target_depth > cache.depth_,
          "forward_taps_with_cache: cache already at depth " + std::to_string(cache.depth_));
  for (int b = cache.depth_; b < target_depth; ++b)
    cache.activation_ = run_block(weights, b, std::move(cache.activation_), &cache.stats_, nullptr);
  cache.depth_ = target_depth;
  return cache.activation_;
}

BackboneTrace forward_trace(const BackboneWeights& weights, const Tensor& image, int depth) {
  check_depth(depth);
  check_image(weights.config, image);
  BackboneTrace trace;
  Tensor x = image;
  for (int b = 0; b < depth; ++b) {
    std::vector<Tensor> keep{x};
    x = run_block(weights, b, std::move(x), nullptr, &keep);
    trace.activations.push_back(std::move(keep));
    trace.taps.push_back(x);
  }
  return trace;
}

BackboneWeights backward_taps(const BackboneWeights& weights, const BackboneTrace& trace,
                              std::span<const Tensor> tap_grads) {
  const int depth = static_cast<int>(trace.taps.size());
  require(static_cast<int>(tap_grads.size()) <= depth, "backward_taps: more gradients than taps");
  BackboneWeights grads = weights.zeros_like();

  Tensor carry;  // gradient flowing into the output of the current block
  for (int b = depth - 1; b >= 0; --b) {
    Tensor g = carry;
    if (b < static_cast<int>(tap_grads.size()) && !tap_grads[b].empty()) {
      if (g.empty())
        g = tap_grads[b];
      else
        g.flat() += tap_grads[b].flat();
    }
    if (g.empty()) continue;  // nothing deeper contributes

    const auto& acts = trace.activations[b];
    if (weights.config.blocks[b].followed_by_pool) g = maxpool2_backward(acts.back(), g);
    const auto& convs = weights.blocks[b];
    for (int l = static_cast<int>(convs.size()) - 1; l >= 0; --l) {
      g = relu_backward(acts[l + 1], g);
      const bool want_input = !(b == 0 && l == 0);
      ConvGrad cg = conv2d_backward(acts[l], convs[l], g, want_input);
      grads.blocks[b][l].kernel = std::move(cg.kernel);
      *grads.blocks[b][l].bias = std::move(cg.bias);
      g = std::move(cg.input);
    }
    carry = std::move(g);
  }
  return grads;
}

}  // namespace adtrack
